"""Small hand-built instances shared by the unit tests."""

from __future__ import annotations

from modxhstt import model as m
from modxhstt.expansion import link_subject_level_choices


def times(n: int, days: int = 1) -> tuple[tuple[m.TimePoint, ...], tuple[m.TimeGroup, ...]]:
    per = max(1, n // days)
    tps = tuple(m.TimePoint(f"T{i}", index=i, groups=(f"D{min(i // per, days - 1)}",)) for i in range(n))
    return tps, tuple(m.TimeGroup(f"D{d}", kind="Day") for d in range(days))


def instance(n_times=3, resources=(), events=(), constraints=(), event_groups=(), days=1,
             types=("Teacher", "Student", "Room"), resource_groups=(), iid="Fixture") -> m.Instance:
    tps, tgs = times(n_times, days)
    return m.Instance(iid, times=tps, time_groups=tgs, resource_types=tuple(m.ResourceType(t) for t in types),
                      resource_groups=tuple(resource_groups), resources=tuple(resources),
                      event_groups=tuple(event_groups), events=tuple(events), constraints=tuple(constraints))


def teacher(rid: str, groups=()) -> m.Resource:
    return m.Resource(rid, resource_type="Teacher", groups=tuple(groups))


def student(rid: str, groups=()) -> m.Resource:
    return m.Resource(rid, resource_type="Student", groups=tuple(groups))


def bob_instance() -> m.Instance:
    """ST_Bob choosing among Biology_10, Physics_10 and Chemistry_10 (two Biology courses)."""
    courses = {"Biology_10": ("Biology_10_1", "Biology_10_2"), "Physics_10": ("Physics_10_1",),
               "Chemistry_10": ("Chemistry_10_1",)}
    events, groups = [], []
    for subject, ids in courses.items():
        groups.append(m.EventGroup(subject, kind="EventGroup"))
        for eid in ids:
            groups.append(m.EventGroup(f"{eid}_course", kind="Course"))
            events.append(m.Event(eid, duration=1, resources=(m.EventResource("Student", "Student"),),
                                  groups=(subject, f"{eid}_course")))
    subjects = {s: tuple(f"{e}_course" for e in ids) for s, ids in courses.items()}
    cons = link_subject_level_choices("ST_Bob", subjects, 1, 3, prefix="Bob")
    return instance(3, resources=[student("ST_Bob")], events=events, event_groups=groups, constraints=cons,
                    iid="Bob")


def balance_instance(sizes: tuple[int, ...], maximum_difference: int) -> tuple[m.Instance, m.Solution]:
    """Parallel classes with ``sizes[i]`` students seated in class i (one seat event per student)."""
    students = [student(f"S{i}") for i in range(max(sizes, default=0) * len(sizes))]
    events, groups, placed = [], [], []
    k = 0
    for g, size in enumerate(sizes):
        groups.append(m.EventGroup(f"Class{g}", kind="Course"))
        for j in range(size):
            eid = f"Class{g}_seat{j}"
            events.append(m.Event(eid, duration=1, resources=(m.EventResource("Student", "Student"),),
                                  groups=(f"Class{g}",)))
            placed.append(m.SolutionEvent(eid, 1, None, {"Student": students[k].id}))
            k += 1
    cons = [m.Constraint("Balance", m.BalanceClassSize(event_groups=tuple(g.id for g in groups),
                                                       maximum_difference=maximum_difference))]
    inst = instance(1, resources=students, events=events, event_groups=groups, constraints=cons, iid="Balance")
    return inst, m.Solution(inst.id, tuple(placed))


def modular_toy(s_min: int = 2, s_max: int = 4, n_eligible: int = 5, n_times: int = 3):
    """Main event with a teacher, a hard AssignTime, and n_eligible + 1 students (the last one not eligible)."""
    from modxhstt.expansion import ModularCourseSpec

    studs = [student(f"S{i}") for i in range(n_eligible + 1)]
    main = m.Event("Course", duration=1, resources=(m.EventResource(None, "Teacher", "Tch"),))
    inst = instance(n_times, resources=[teacher("Tch")] + studs, events=[main],
                    constraints=[m.Constraint("Course_time", m.AssignTime(events=("Course",)))], iid="Modular")
    spec = ModularCourseSpec("Course", s_min, s_max, tuple(s.id for s in studs[:n_eligible]))
    return inst, spec


def cli_toy() -> m.Instance:
    """Two teachers, one room pool, three events; used for the CLI fixtures."""
    res = [teacher("Tch1"), teacher("Tch2"), m.Resource("Room1", resource_type="Room"),
           m.Resource("Room2", resource_type="Room")]
    events = [
        m.Event("Math", duration=2, resources=(m.EventResource(None, "Teacher", "Tch1"), m.EventResource("Room", "Room"))),
        m.Event("Art", duration=1, resources=(m.EventResource("Teacher", "Teacher"),)),
        m.Event("Gym", duration=1, time="T0", resources=(m.EventResource(None, "Teacher", "Tch2"),)),
    ]
    cons = [
        m.Constraint("Times", m.AssignTime(events=("Math", "Art", "Gym"))),
        m.Constraint("Rooms", m.AssignResource(events=("Math",), role="Room")),
        m.Constraint("Teachers", m.AssignResource(events=("Art",), role="Teacher"), required=False, weight=2),
        m.Constraint("ArtTeacher", m.PreferResources(events=("Art",), role="Teacher", resources=("Tch2",))),
        m.Constraint("Clashes", m.AvoidClashes(resources=("Tch1", "Tch2", "Room1", "Room2"))),
        m.Constraint("Idle", m.LimitIdleTimes(resources=("Tch1", "Tch2"), time_groups=("D0",), maximum=0),
                     required=False, weight=1, cost_function=m.CostFunction.SQUARE_SUM),
    ]
    return instance(3, resources=res, events=events, constraints=cons, iid="CliToy")
