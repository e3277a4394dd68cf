import os
import random
import tempfile

import highspy
import pytest

from modxhstt import model as m
from modxhstt.evaluator import evaluate
from modxhstt.ilp import (BuildOptions, IlpModel, Lin, ModelError, build_model, choice_pools, column_aliases,
                          decode_solution, emit_lp, emit_mps, registry_json, stats_json, subevent_pool)

import fixtures as fx
import milp
import toys

DATA = os.path.join(os.path.dirname(__file__), "data")


def one_event(time=None, n_times=2):
    ev = m.Event("E", duration=1, time=time, resources=(m.EventResource(None, "Teacher", "R"),))
    return fx.instance(n_times, resources=[fx.teacher("R")], events=[ev],
                       constraints=[m.Constraint("C", m.AssignTime(events=("E",)))])


def test_one_event_model():
    inst = one_event()
    md = build_model(inst)
    ys = sorted(n for n, v in md.vars.items() if v.meaning[0] == "y")
    assert ys == ["y.0.0", "y.0.1", "y.0.D"]
    assert len([r for r in md.rows if r.block == "assign_time"]) == 1
    best = min(md.objective_value({"u.0": 1 if y != "y.0.D" else 0, y: 1,
                                   "s.0.0.0": 0 if y != "y.0.D" else 1}) for y in ys)
    assert best == 0
    assert milp.solve(md).objective == 0


def test_preassigned_time_row():
    inst = one_event(time="T2", n_times=4)
    md = build_model(inst)
    (row,) = [r for r in md.rows if r.block == "preassigned_time"]
    assert row.terms == {"y.0.2": 1} and row.sense == "=" and row.rhs == 1


def workload_toy(load, lo, hi, required=False):
    ev = m.Event("E", duration=1, time="T0", resources=(m.EventResource(None, "Teacher", "R", workload=load),))
    c = m.Constraint("W", m.LimitWorkload(resources=("R",), minimum=lo, maximum=hi), required=required)
    return fx.instance(1, resources=[fx.teacher("R")], events=[ev], constraints=[c])


def structural(md):
    return {n for n, v in md.vars.items() if v.meaning[0] in ("u", "y", "x", "w")}


@pytest.mark.parametrize("load,expected", [(6, 2), (1, 1), (3, 0)])
def test_u_device_tight(load, expected):
    md = build_model(workload_toy(load, 2, 4), BuildOptions(tighten=True))
    fix = {"u.0": 1, "y.0.0": 1}
    lo = milp.solve(md, fix, structural(md))
    hi = milp.solve(md, fix, structural(md), maximize=True)
    assert round(lo.objective) == round(hi.objective) == expected


def test_u_device_untight_is_lower_bound():
    md = build_model(workload_toy(1, 2, 4))
    fix = {"u.0": 1, "y.0.0": 1}
    assert round(milp.solve(md, fix, structural(md)).objective) == 1
    assert round(milp.solve(md, fix, structural(md), maximize=True).objective) > 1


def test_single_source_deviation_has_no_selectors():
    md = build_model(workload_toy(3, None, 0), BuildOptions(tighten=True))
    assert not [n for n in md.vars if n.startswith("z.")]
    fix = {"u.0": 1, "y.0.0": 1}
    assert round(milp.solve(md, fix, structural(md), maximize=True).objective) == 3


def pool_toy():
    """Two students, event E may only take S0 (hard PreferResources)."""
    ev = m.Event("E", duration=1, resources=(m.EventResource("St", "Student"),))
    c = m.Constraint("P", m.PreferResources(events=("E",), role="St", resources=("S0",)))
    return fx.instance(2, resources=[fx.student("S0"), fx.student("S1")], events=[ev], constraints=[c])


def test_reduce_drops_out_of_pool_pairs():
    inst = pool_toy()
    full, red = build_model(inst), build_model(inst, BuildOptions(reduce=True))
    pairs = lambda md: {v.meaning[6] for v in md.vars.values() if v.meaning[0] == "x"}  # noqa: E731
    assert "S1" in pairs(full) and "S1" not in pairs(red)
    assert len(red.vars) < len(full.vars)
    assert choice_pools(inst, True)[("E", 0)] == ["S0"]


def test_reduce_split_partition():
    ev = m.Event("E", duration=4)
    c = m.Constraint("S", m.SplitEvents(events=("E",), min_duration=2, max_duration=2))
    inst = fx.instance(6, events=[ev], constraints=[c])
    assert [p.duration for p in subevent_pool(inst, True)] == [2, 2]
    assert sorted(p.duration for p in subevent_pool(inst, False)) == [1, 1, 1, 1, 2, 2, 3, 4]


def test_reduction_keeps_optimum():
    inst = pool_toy()
    a = milp.solve(build_model(inst, BuildOptions(tighten=True)))
    b = milp.solve(build_model(inst, BuildOptions(tighten=True, reduce=True)))
    assert a.objective == b.objective


def test_unresolved_reference_raises():
    inst = fx.instance(1, constraints=[m.Constraint("C", m.AssignTime(event_groups=("Ghost",)))])
    with pytest.raises(ModelError, match="Ghost"):
        build_model(inst)


def test_hard_weight_dominates_soft():
    rng = random.Random(3)
    for _ in range(20):
        inst = toys.random_instance(rng)
        md = build_model(inst)
        assert md.hard_weight >= 1
        forced = build_model(inst, BuildOptions(hard_weight=7))
        assert forced.hard_weight == 7


def test_pin_mode_bounds_hard_deviations():
    inst = one_event()
    md = build_model(inst, BuildOptions(hard_mode="pin"))
    assert md.vars["s.0.0.0"].ub == 0


def one_var_model():
    md = IlpModel()
    md.add_var("x", 0, 1, ("x",))
    md.add_objective(Lin.var("x"))
    md.add_row(Lin.var("x") - 1, "<=", "cap")
    return md


def test_lp_fixture():
    with open(os.path.join(DATA, "one_var.lp")) as fh:
        assert emit_lp(one_var_model()) == fh.read()


def test_fractional_rows_scaled():
    md = IlpModel()
    md.add_var("x", 0, 4, ("x",))
    from fractions import Fraction
    row = md.add_row(Lin.var("x", Fraction(1, 3)) - Fraction(2, 3), "<=", "r")
    assert (row.terms, row.rhs) == ({"x": 1}, 2)


def _read_back(text, suffix):
    with tempfile.TemporaryDirectory() as d:
        path = os.path.join(d, "m" + suffix)
        with open(path, "w") as fh:
            fh.write(text)
        h = highspy.Highs()
        h.setOptionValue("output_flag", False)
        h.readModel(path)
        return h.getLp()


def _matrix(md, names):
    cols = {n: i for i, n in enumerate(names)}
    entries = set()
    for k, r in enumerate(md.rows):
        for n, c in r.terms.items():
            entries.add((k, cols[n], float(c)))
    return entries


@pytest.mark.parametrize("seed", range(8))
@pytest.mark.parametrize("fmt", ["mps", "lp"])
def test_emit_reparse_matrix(seed, fmt):
    inst = toys.random_instance(random.Random(seed))
    md = build_model(inst, BuildOptions(tighten=seed % 2 == 0))
    text = emit_mps(md) if fmt == "mps" else emit_lp(md)
    lp = _read_back(text, "." + fmt)
    aliases = column_aliases(md)
    ours = list(md.vars)
    names = list(lp.col_names_)
    if fmt == "mps":
        names = [dict((a, n) for n, a in aliases.items())[x] for x in names]
    assert sorted(names) == sorted(ours)
    order = {n: i for i, n in enumerate(names)}
    # objective and bounds
    for n, v in md.vars.items():
        j = order[n]
        assert lp.col_cost_[j] == md.objective.get(n, 0)
        assert (lp.col_lower_[j], lp.col_upper_[j]) == (v.lb, v.ub)
    # matrix, column-wise
    a = lp.a_matrix_
    got = set()
    row_pos = {}
    for k in range(lp.num_row_):
        row_pos[k] = k
    for j in range(lp.num_col_):
        for p in range(a.start_[j], a.start_[j + 1]):
            got.add((a.index_[p], j, a.value_[p]))
    expected = set()
    for k, r in enumerate(md.rows):
        for n, c in r.terms.items():
            expected.add((k, order[n], float(c)))
    assert got == expected
    for k, r in enumerate(md.rows):
        lo, hi = lp.row_lower_[k], lp.row_upper_[k]
        if r.sense == "<=":
            assert hi == r.rhs and lo < -1e30
        elif r.sense == ">=":
            assert lo == r.rhs and hi > 1e30
        else:
            assert lo == hi == r.rhs


def test_stats_outputs():
    md = build_model(pool_toy())
    s = md.stats()
    assert s["variables"] == len(md.vars) and s["constraints"] == len(md.rows)
    assert sum(s["constraints_by_block"].values()) == len(md.rows)
    assert sum(s["variables_by_symbol"].values()) == len(md.vars)
    assert md.stats_line() == f"variables={len(md.vars)}, constraints={len(md.rows)}"
    assert '"constraints_by_block"' in stats_json(md)
    assert '"variables"' in registry_json(md)


def test_all_dummy_decodes_empty():
    ev = m.Event("E", duration=2, resources=(m.EventResource("T", "Teacher"),))
    cons = [m.Constraint("AT", m.AssignTime(events=("E",)), weight=2),
            m.Constraint("AR", m.AssignResource(events=("E",)), weight=3)]
    inst = fx.instance(3, resources=[fx.teacher("R")], events=[ev], constraints=cons)
    md = build_model(inst, BuildOptions(tighten=True))
    values = {}
    for n, v in md.vars.items():
        kind, sub = v.meaning[0], v.meaning[1:4]
        if kind == "y" and v.meaning[4] is None:
            values[n] = 1
        elif kind == "x" and v.meaning[4] is None and v.meaning[6] is None:
            values[n] = 1
        elif kind == "u" and sub == ("E", 2, 0):
            values[n] = 1
    sol = decode_solution(md, values, inst, verify="structural")
    assert sol.events == ()
    report = evaluate(inst, sol)
    best = milp.solve(md, values, structural(md))
    assert report.pair == (2 * 2 + 3 * 2, 0)
    assert round(best.objective) == report.scalar(md.hard_weight)


def test_hand_built_assignment_decodes():
    inst = one_event()
    md = build_model(inst)
    sol = decode_solution(md, {"u.0": 1, "y.0.1": 1}, inst, verify="structural")
    assert sol.events == (m.SolutionEvent("E", 1, "T1", {"#0": "R"}),)
