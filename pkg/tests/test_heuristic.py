import logging
import random

import pytest
from hypothesis import given, settings, strategies as st

from modxhstt import heuristic as hs
from modxhstt import model as m
from modxhstt.evaluator import evaluate

import fixtures as fx
import toys


def test_budget_validation():
    with pytest.raises(ValueError):
        hs.SearchBudget(max_iterations=0)
    with pytest.raises(ValueError):
        hs.SearchBudget(max_seconds=0)


def test_preassigned_times_reproduced():
    events = [m.Event(f"E{i}", duration=1, time=f"T{i}") for i in range(3)]
    inst = fx.instance(3, events=events, constraints=[m.Constraint("C", m.AssignTime(event_groups=(), events=("E0",)))])
    sol = hs.construct_initial(inst, 0)
    assert {se.event: se.time for se in m.normalize(inst, sol).events} == {"E0": "T0", "E1": "T1", "E2": "T2"}


def test_empty_instance():
    inst = m.Instance("Empty")
    assert hs.construct_initial(inst, 0).events == ()
    sol, pair = hs.solve(inst, hs.SearchBudget(10))
    assert sol.events == () and pair == (0, 0)


@pytest.mark.parametrize("seed", range(5))
def test_construction_deterministic(seed):
    inst = toys.random_instance(random.Random(seed), n_constraints=(3, 6))
    assert hs.construct_initial(inst, seed) == hs.construct_initial(inst, seed)


def test_search_deterministic():
    inst = toys.random_instance(random.Random(11), n_constraints=(3, 6))
    budget = hs.SearchBudget(500, seed=4)
    a = hs.local_search(inst, hs.construct_initial(inst, 0), budget)
    b = hs.local_search(inst, hs.construct_initial(inst, 0), budget)
    assert a == b


def clash_toy():
    events = [m.Event(f"E{i}", resources=(m.EventResource(None, "Teacher", "R"),)) for i in range(2)]
    cons = [m.Constraint("Clash", m.AvoidClashes(resources=("R",))),
            m.Constraint("Time", m.AssignTime(events=("E0", "E1")))]
    return fx.instance(2, resources=[fx.teacher("R")], events=events, constraints=cons)


def test_clash_removed():
    inst = clash_toy()
    start = m.Solution(inst.id, (m.SolutionEvent("E0", 1, "T0"), m.SolutionEvent("E1", 1, "T0")))
    assert evaluate(inst, start).hard_cost == 1
    out = hs.local_search(inst, start, hs.SearchBudget(1000))
    assert evaluate(inst, out).pair == (0, 0)


def test_optimal_start_kept():
    inst = clash_toy()
    start = m.Solution(inst.id, (m.SolutionEvent("E0", 1, "T0"), m.SolutionEvent("E1", 1, "T1")))
    out = hs.local_search(inst, start, hs.SearchBudget(1000))
    assert hs.cost_of(inst, out) == hs.cost_of(inst, start) == (0, 0)


@given(st.integers(0, 10_000))
@settings(max_examples=25, deadline=None)
def test_trace_monotone(seed):
    inst = toys.random_instance(random.Random(seed))
    trace = []
    out = hs.local_search(inst, hs.construct_initial(inst, seed), hs.SearchBudget(300, seed=seed), trace=trace)
    costs = [c for _, c in trace]
    assert all(a >= b for a, b in zip(costs, costs[1:]))
    assert costs[-1] == hs.cost_of(inst, out)
    assert m.validate_solution(inst, out).ok


def test_hard_pool_respects_role_type():
    # hard PreferResources lists a Student for an event whose free role needs a Teacher
    inst = toys.random_instance(random.Random(925))
    out = hs.local_search(inst, hs.construct_initial(inst, 925), hs.SearchBudget(300, seed=925))
    assert m.validate_solution(inst, out).ok


def test_progress_log_and_info(caplog):
    inst = clash_toy()
    start = m.Solution(inst.id, (m.SolutionEvent("E0", 1, "T0"), m.SolutionEvent("E1", 1, "T0")))
    info = {}
    with caplog.at_level(logging.INFO, logger="modxhstt.search"):
        hs.local_search(inst, start, hs.SearchBudget(1000), info=info)
    lines = [r.getMessage() for r in caplog.records]
    assert lines[0] == "iter=0 hard=1 soft=0"
    assert lines[-1].endswith("hard=0 soft=0")
    assert 1 <= info["iterations"] < 1000


def test_restarts_and_workers(monkeypatch):
    inst = toys.random_instance(random.Random(21), n_constraints=(3, 6))
    budget = hs.SearchBudget(200, seed=1)
    serial = hs.solve(inst, budget, restarts=3, workers=1)
    parallel = hs.solve(inst, budget, restarts=3, workers=3)
    assert serial == parallel
    monkeypatch.setenv("MODXHSTT_THREADS", "4")
    assert hs.default_workers() == 4
    monkeypatch.setenv("MODXHSTT_THREADS", "junk")
    assert hs.default_workers() == 1
