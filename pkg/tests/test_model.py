import pytest

from modxhstt import model as m

import fixtures as fx


def test_empty_instance_resolves():
    assert m.resolve_references(m.Instance("Empty")).ok


def test_unknown_event_group_is_named():
    inst = fx.instance(2, constraints=[m.Constraint("C", m.AssignTime(event_groups=("EG_X",)))])
    res = m.resolve_references(inst)
    assert len(res.problems) == 1
    assert "EG_X" in str(res.problems[0])


def test_bob_scenario_resolves():
    assert m.resolve_references(fx.bob_instance()).ok


def test_duplicate_ids_rejected():
    with pytest.raises(m.DuplicateIdError):
        fx.instance(2, resources=[fx.teacher("R"), fx.teacher("R")])


def test_time_indices_must_be_dense():
    with pytest.raises(ValueError):
        m.Instance("I", times=(m.TimePoint("T0", index=1),))


def test_constraint_bounds_checked():
    with pytest.raises(ValueError):
        m.Constraint("C", m.LimitWorkload(minimum=3, maximum=2))
    with pytest.raises(ValueError):
        m.Constraint("C", m.StudentChoice(event_groups=("A",), minimum=0, maximum=2))
    with pytest.raises(ValueError):
        m.Constraint("C", m.BalanceClassSize(event_groups=("A",)))


def _attendance_toy():
    groups = [m.EventGroup("G")]
    events = [m.Event(f"E{i}", resources=(m.EventResource("S", "Student"),), groups=("G",)) for i in range(2)]
    return fx.instance(2, resources=[fx.student("A"), fx.student("B")], events=events, event_groups=groups)


def test_attends_single_subevent():
    inst = _attendance_toy()
    sol = m.Solution(inst.id, (m.SolutionEvent("E0", 1, "T0", {"S": "A"}),))
    assert m.attends(inst, sol, "A", "G")
    assert not m.attends(inst, sol, "B", "G")


def test_attends_is_boolean_over_members():
    inst = _attendance_toy()
    sol = m.Solution(inst.id, (m.SolutionEvent("E0", 1, "T0", {"S": "A"}),
                               m.SolutionEvent("E1", 1, "T1", {"S": "A"})))
    assert m.attends(inst, sol, "A", "G") is True


def test_resource_key_and_candidates():
    ev = m.Event("E", resources=(m.EventResource(None, "Teacher", "R1"), m.EventResource("Room", "Room")))
    inst = fx.instance(1, resources=[fx.teacher("R1"), m.Resource("X", resource_type="Room")], events=[ev])
    assert ev.resource_key(0) == "#0"
    assert ev.resource_key(1) == "Room"
    assert inst.candidates(ev, 1) == ["X"]


def test_normalize_adds_absent_events_and_preassignments():
    ev = m.Event("E", duration=2, time="T1", resources=(m.EventResource(None, "Teacher", "R1"),))
    inst = fx.instance(3, resources=[fx.teacher("R1")], events=[ev])
    norm = m.normalize(inst, m.Solution(inst.id, ()))
    assert norm.events == (m.SolutionEvent("E", 2, "T1", {"#0": "R1"}),)
    assert m.canonical(inst, m.Solution(inst.id, ())).events == ()


def test_validate_solution_duration_sum():
    ev = m.Event("E", duration=2)
    inst = fx.instance(3, events=[ev])
    good = m.Solution(inst.id, (m.SolutionEvent("E", 2, "T0"),))
    bad = m.Solution(inst.id, (m.SolutionEvent("E", 2, "T0"), m.SolutionEvent("E", 1, "T2")))
    assert m.validate_solution(inst, good).ok
    assert not m.validate_solution(inst, bad).ok


def test_validate_solution_rejects_overrun_and_unknown_role():
    inst = fx.instance(3, resources=[fx.teacher("R1")],
                       events=[m.Event("E", duration=2, resources=(m.EventResource("T", "Teacher"),))])
    overrun = m.Solution(inst.id, (m.SolutionEvent("E", 2, "T2"),))
    role = m.Solution(inst.id, (m.SolutionEvent("E", 2, "T0", {"X": "R1"}),))
    assert not m.validate_solution(inst, overrun).ok
    assert not m.validate_solution(inst, role).ok
