"""Domain types for extended XHSTT instances and solutions.

Everything here is immutable after construction.  Group membership is stored
on the member side (a ``Resource`` lists its groups, an ``Event`` its event
groups, a ``TimePoint`` its time groups) because that is how the XML declares
it; :class:`Instance` exposes the reverse maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Iterable, Mapping, Optional, Union


class CostFunction(str, Enum):
    SUM = "Sum"
    SUM_SQUARE = "SumSquare"
    SQUARE_SUM = "SquareSum"


class DuplicateIdError(ValueError):
    pass


def _sorted_groups(obj) -> None:
    object.__setattr__(obj, "groups", tuple(sorted(set(obj.groups))))


@dataclass(frozen=True)
class TimePoint:
    id: str
    name: str = ""
    index: int = 0
    groups: tuple[str, ...] = ()

    def __post_init__(self):
        _sorted_groups(self)


@dataclass(frozen=True)
class TimeGroup:
    id: str
    name: str = ""
    # XHSTT distinguishes Week, Day and plain TimeGroup; all behave alike.
    kind: str = "TimeGroup"


@dataclass(frozen=True)
class ResourceType:
    id: str
    name: str = ""


@dataclass(frozen=True)
class ResourceGroup:
    id: str
    name: str = ""
    resource_type: str = ""


@dataclass(frozen=True)
class Resource:
    id: str
    name: str = ""
    resource_type: str = ""
    groups: tuple[str, ...] = ()

    def __post_init__(self):
        _sorted_groups(self)


@dataclass(frozen=True)
class EventResource:
    role: Optional[str] = None
    resource_type: Optional[str] = None
    preassigned: Optional[str] = None
    workload: Optional[int] = None

    @property
    def is_preassigned(self) -> bool:
        return self.preassigned is not None


@dataclass(frozen=True)
class EventGroup:
    id: str
    name: str = ""
    kind: str = "EventGroup"  # or "Course"


@dataclass(frozen=True)
class Event:
    id: str
    name: str = ""
    duration: int = 1
    time: Optional[str] = None
    resources: tuple[EventResource, ...] = ()
    groups: tuple[str, ...] = ()
    workload: Optional[int] = None

    def __post_init__(self):
        _sorted_groups(self)

    def resource_key(self, index: int) -> str:
        """Key under which event resource ``index`` appears in solutions."""
        role = self.resources[index].role
        return role if role is not None else f"#{index}"

    def workload_of(self, index: int) -> int:
        er = self.resources[index]
        if er.workload is not None:
            return er.workload
        return self.workload if self.workload is not None else self.duration


# --- constraint bodies -----------------------------------------------------
#
# Bounds are ``None`` when absent.  A missing lower bound never charges and a
# missing upper bound never charges.


@dataclass(frozen=True)
class AssignResource:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    role: Optional[str] = None
    tag = "AssignResourceConstraint"


@dataclass(frozen=True)
class AssignTime:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    tag = "AssignTimeConstraint"


@dataclass(frozen=True)
class SplitEvents:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    min_duration: Optional[int] = None
    max_duration: Optional[int] = None
    min_amount: Optional[int] = None
    max_amount: Optional[int] = None
    tag = "SplitEventsConstraint"


@dataclass(frozen=True)
class DistributeSplitEvents:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    duration: int = 1
    minimum: Optional[int] = None
    maximum: Optional[int] = None
    tag = "DistributeSplitEventsConstraint"


@dataclass(frozen=True)
class PreferResources:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    role: Optional[str] = None
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    tag = "PreferResourcesConstraint"


@dataclass(frozen=True)
class PreferTimes:
    events: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    times: tuple[str, ...] = ()
    time_groups: tuple[str, ...] = ()
    duration: Optional[int] = None
    tag = "PreferTimesConstraint"


@dataclass(frozen=True)
class AvoidSplitAssignments:
    event_groups: tuple[str, ...] = ()
    role: Optional[str] = None
    tag = "AvoidSplitAssignmentsConstraint"


@dataclass(frozen=True)
class SpreadTimeGroup:
    time_group: str
    minimum: Optional[int] = None
    maximum: Optional[int] = None


@dataclass(frozen=True)
class SpreadEvents:
    event_groups: tuple[str, ...] = ()
    time_groups: tuple[SpreadTimeGroup, ...] = ()
    tag = "SpreadEventsConstraint"


@dataclass(frozen=True)
class LinkEvents:
    event_groups: tuple[str, ...] = ()
    tag = "LinkEventsConstraint"


@dataclass(frozen=True)
class OrderEvents:
    pairs: tuple[tuple[str, str], ...] = ()
    min_separation: int = 0
    max_separation: Optional[int] = None
    tag = "OrderEventsConstraint"


@dataclass(frozen=True)
class AvoidClashes:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    tag = "AvoidClashesConstraint"


@dataclass(frozen=True)
class AvoidUnavailableTimes:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    times: tuple[str, ...] = ()
    time_groups: tuple[str, ...] = ()
    tag = "AvoidUnavailableTimesConstraint"


@dataclass(frozen=True)
class LimitIdleTimes:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    time_groups: tuple[str, ...] = ()
    minimum: Optional[int] = None
    maximum: Optional[int] = None
    tag = "LimitIdleTimesConstraint"


@dataclass(frozen=True)
class ClusterBusyTimes:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    time_groups: tuple[str, ...] = ()
    minimum: Optional[int] = None
    maximum: Optional[int] = None
    tag = "ClusterBusyTimesConstraint"


@dataclass(frozen=True)
class LimitBusyTimes:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    time_groups: tuple[str, ...] = ()
    minimum: Optional[int] = None
    maximum: Optional[int] = None
    tag = "LimitBusyTimesConstraint"


@dataclass(frozen=True)
class LimitWorkload:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    minimum: Optional[int] = None
    maximum: Optional[int] = None
    tag = "LimitWorkloadConstraint"


@dataclass(frozen=True)
class StudentChoice:
    resources: tuple[str, ...] = ()
    resource_groups: tuple[str, ...] = ()
    event_groups: tuple[str, ...] = ()
    minimum: int = 0
    maximum: int = 0
    tag = "StudentChoiceConstraint"


@dataclass(frozen=True)
class BalanceClassSize:
    event_groups: tuple[str, ...] = ()
    maximum_difference: int = 0
    counted_type: Optional[str] = None
    tag = "BalanceClassSizeConstraint"


Body = Union[
    AssignResource, AssignTime, SplitEvents, DistributeSplitEvents,
    PreferResources, PreferTimes, AvoidSplitAssignments, SpreadEvents,
    LinkEvents, OrderEvents, AvoidClashes, AvoidUnavailableTimes,
    LimitIdleTimes, ClusterBusyTimes, LimitBusyTimes, LimitWorkload,
    StudentChoice, BalanceClassSize,
]

BODY_TYPES: tuple[type, ...] = (
    AssignResource, AssignTime, SplitEvents, DistributeSplitEvents,
    PreferResources, PreferTimes, AvoidSplitAssignments, SpreadEvents,
    LinkEvents, OrderEvents, AvoidClashes, AvoidUnavailableTimes,
    LimitIdleTimes, ClusterBusyTimes, LimitBusyTimes, LimitWorkload,
    StudentChoice, BalanceClassSize,
)

BODY_BY_TAG: dict[str, type] = {cls.tag: cls for cls in BODY_TYPES}


@dataclass(frozen=True)
class Constraint:
    id: str
    body: Body
    name: str = ""
    required: bool = True
    weight: int = 1
    cost_function: CostFunction = CostFunction.SUM

    def __post_init__(self):
        if self.weight < 0:
            raise ValueError(f"constraint {self.id}: negative weight")
        lo, hi = _bounds_of(self.body)
        if lo is not None and hi is not None and lo > hi:
            raise ValueError(f"constraint {self.id}: lower bound {lo} > upper bound {hi}")
        if isinstance(self.body, StudentChoice) and self.body.maximum > len(self.body.event_groups):
            raise ValueError(f"constraint {self.id}: Maximum exceeds number of event groups")
        if isinstance(self.body, BalanceClassSize) and len(self.body.event_groups) < 2:
            raise ValueError(f"constraint {self.id}: needs at least two event groups")

    @property
    def kind(self) -> str:
        return type(self.body).__name__


def _bounds_of(body) -> tuple[Optional[int], Optional[int]]:
    if isinstance(body, OrderEvents):
        return body.min_separation, body.max_separation
    if isinstance(body, SplitEvents):
        if body.min_duration is not None and body.max_duration is not None \
                and body.min_duration > body.max_duration:
            return body.min_duration, body.max_duration
        return body.min_amount, body.max_amount
    return getattr(body, "minimum", None), getattr(body, "maximum", None)


@dataclass(frozen=True)
class Instance:
    id: str = "Instance"
    name: str = ""
    metadata: tuple[tuple[str, str], ...] = ()
    times: tuple[TimePoint, ...] = ()
    time_groups: tuple[TimeGroup, ...] = ()
    resource_types: tuple[ResourceType, ...] = ()
    resource_groups: tuple[ResourceGroup, ...] = ()
    resources: tuple[Resource, ...] = ()
    event_groups: tuple[EventGroup, ...] = ()
    events: tuple[Event, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def __post_init__(self):
        for label, items in (
            ("time", self.times), ("time group", self.time_groups),
            ("resource type", self.resource_types), ("resource group", self.resource_groups),
            ("resource", self.resources), ("event group", self.event_groups),
            ("event", self.events), ("constraint", self.constraints),
        ):
            seen: set[str] = set()
            for item in items:
                if item.id in seen:
                    raise DuplicateIdError(f"duplicate {label} id {item.id!r}")
                seen.add(item.id)
        for i, t in enumerate(self.times):
            if t.index != i:
                raise ValueError(f"time {t.id!r} has index {t.index}, expected {i}")
        for e in self.events:
            if e.duration < 1:
                raise ValueError(f"event {e.id!r}: duration must be positive")
            keys = [e.resource_key(i) for i in range(len(e.resources))]
            if len(set(keys)) != len(keys):
                raise ValueError(f"event {e.id!r}: duplicate roles")

    # --- lookups (built lazily; safe because the dataclass is frozen) --------

    @cached_property
    def time_index(self) -> dict[str, int]:
        return {t.id: t.index for t in self.times}

    @cached_property
    def time_group_by_id(self) -> dict[str, TimeGroup]:
        return {g.id: g for g in self.time_groups}

    @cached_property
    def time_group_members(self) -> dict[str, tuple[int, ...]]:
        members: dict[str, list[int]] = {g.id: [] for g in self.time_groups}
        for t in self.times:
            for g in t.groups:
                if g in members and t.index not in members[g]:
                    members[g].append(t.index)
        return {g: tuple(sorted(m)) for g, m in members.items()}

    @cached_property
    def resource_by_id(self) -> dict[str, Resource]:
        return {r.id: r for r in self.resources}

    @cached_property
    def resource_order(self) -> dict[str, int]:
        return {r.id: i for i, r in enumerate(self.resources)}

    @cached_property
    def resource_type_ids(self) -> set[str]:
        return {rt.id for rt in self.resource_types}

    @cached_property
    def resource_group_by_id(self) -> dict[str, ResourceGroup]:
        return {g.id: g for g in self.resource_groups}

    @cached_property
    def resource_group_members(self) -> dict[str, tuple[str, ...]]:
        members: dict[str, list[str]] = {g.id: [] for g in self.resource_groups}
        for r in self.resources:
            for g in r.groups:
                if g in members and r.id not in members[g]:
                    members[g].append(r.id)
        return {g: tuple(m) for g, m in members.items()}

    @cached_property
    def event_by_id(self) -> dict[str, Event]:
        return {e.id: e for e in self.events}

    @cached_property
    def event_order(self) -> dict[str, int]:
        return {e.id: i for i, e in enumerate(self.events)}

    @cached_property
    def event_group_by_id(self) -> dict[str, EventGroup]:
        return {g.id: g for g in self.event_groups}

    @cached_property
    def event_group_members(self) -> dict[str, tuple[str, ...]]:
        members: dict[str, list[str]] = {g.id: [] for g in self.event_groups}
        for e in self.events:
            for g in e.groups:
                if g in members and e.id not in members[g]:
                    members[g].append(e.id)
        return {g: tuple(m) for g, m in members.items()}

    @cached_property
    def constraint_by_id(self) -> dict[str, Constraint]:
        return {c.id: c for c in self.constraints}

    # --- applies-to resolution ---------------------------------------------

    def select_events(self, events: Iterable[str] = (), groups: Iterable[str] = ()) -> list[str]:
        """Union of listed events and group members, in declaration order."""
        chosen = set(events)
        for g in groups:
            chosen.update(self.event_group_members.get(g, ()))
        order = self.event_order
        return sorted((e for e in chosen if e in order), key=order.__getitem__)

    def select_resources(self, resources: Iterable[str] = (), groups: Iterable[str] = ()) -> list[str]:
        chosen = set(resources)
        for g in groups:
            chosen.update(self.resource_group_members.get(g, ()))
        order = self.resource_order
        return sorted((r for r in chosen if r in order), key=order.__getitem__)

    def select_times(self, times: Iterable[str] = (), groups: Iterable[str] = ()) -> list[int]:
        chosen = {self.time_index[t] for t in times if t in self.time_index}
        for g in groups:
            chosen.update(self.time_group_members.get(g, ()))
        return sorted(chosen)

    def candidates(self, event: Event, index: int) -> list[str]:
        """Resources able to fill event resource ``index`` (type match)."""
        er = event.resources[index]
        if er.preassigned is not None:
            return [er.preassigned]
        if er.resource_type is None:
            return [r.id for r in self.resources]
        return [r.id for r in self.resources if r.resource_type == er.resource_type]


# --- solutions ---------------------------------------------------------------


@dataclass(frozen=True)
class SolutionEvent:
    event: str
    duration: int
    time: Optional[str] = None
    # role key -> resource id; includes preassigned roles
    assignments: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.duration < 1:
            raise ValueError("solution event duration must be positive")
        object.__setattr__(self, "assignments", dict(sorted(self.assignments.items())))

    def __hash__(self):
        return hash((self.event, self.duration, self.time, tuple(self.assignments.items())))

    def sort_key(self) -> tuple:
        return (self.event, self.time is not None, self.time or "", self.duration,
                tuple(self.assignments.items()))


@dataclass(frozen=True)
class Solution:
    """A set of solution events; stored sorted so equality ignores order."""

    instance_id: str
    events: tuple[SolutionEvent, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(sorted(self.events, key=SolutionEvent.sort_key)))

    def by_event(self) -> dict[str, list[SolutionEvent]]:
        out: dict[str, list[SolutionEvent]] = {}
        for se in self.events:
            out.setdefault(se.event, []).append(se)
        return out


def fill_preassigned(instance: Instance, se: SolutionEvent) -> SolutionEvent:
    """Return ``se`` with every preassigned role present in its assignments."""
    event = instance.event_by_id[se.event]
    merged = dict(se.assignments)
    for i, er in enumerate(event.resources):
        if er.preassigned is not None:
            merged[event.resource_key(i)] = er.preassigned
    if merged == se.assignments:
        return se
    return SolutionEvent(se.event, se.duration, se.time, merged)


def is_unplaced(instance: Instance, se: SolutionEvent) -> bool:
    """True for a full-duration subevent with no time and no solver-assigned resource."""
    event = instance.event_by_id[se.event]
    if se.time is not None or se.duration != event.duration:
        return False
    for i, er in enumerate(event.resources):
        if er.preassigned is None and event.resource_key(i) in se.assignments:
            return False
    return True


def normalize(instance: Instance, solution: Solution) -> Solution:
    """Make every event explicit: events absent from ``solution`` become one
    unplaced subevent of full duration (at the preassigned time, if any)."""
    present = {se.event for se in solution.events}
    extra = []
    for e in instance.events:
        if e.id not in present:
            extra.append(fill_preassigned(instance, SolutionEvent(e.id, e.duration, e.time)))
    items = [fill_preassigned(instance, se) for se in solution.events] + extra
    return Solution(solution.instance_id, tuple(items))


def canonical(instance: Instance, solution: Solution) -> Solution:
    """Sorted form that omits events left entirely unplaced.

    Two solutions with equal canonical forms are evaluated identically.
    """
    norm = normalize(instance, solution)
    groups = norm.by_event()
    keep = []
    for e in instance.events:
        ses = groups.get(e.id, [])
        if len(ses) == 1 and e.time is None and is_unplaced(instance, ses[0]):
            continue
        if len(ses) == 1 and e.time is not None and ses[0].time == e.time \
                and is_unplaced(instance, SolutionEvent(e.id, e.duration, None, ses[0].assignments)):
            continue
        keep.extend(ses)
    return Solution(solution.instance_id, tuple(keep))


# --- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Problem:
    kind: str       # entity class of the dangling reference or "structure"
    ref: str
    location: str
    message: str = ""

    def __str__(self) -> str:
        text = self.message or f"unknown {self.kind} {self.ref!r}"
        return f"{self.location}: {text}"


@dataclass
class ValidationResult:
    problems: list[Problem] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.problems

    def __bool__(self) -> bool:
        return self.ok


def resolve_references(instance: Instance) -> ValidationResult:
    """Check every cross-reference in ``instance``; problems are returned, not raised."""
    res = ValidationResult()
    add = res.problems.append
    tg = instance.time_group_by_id
    rg = instance.resource_group_by_id
    eg = instance.event_group_by_id
    rt = instance.resource_type_ids
    rs = instance.resource_by_id
    ev = instance.event_by_id
    ti = instance.time_index

    def check(kind, table, ref, where):
        if ref not in table:
            add(Problem(kind, ref, where))

    for t in instance.times:
        for g in t.groups:
            check("time group", tg, g, f"Time {t.id}")
    for g in instance.resource_groups:
        check("resource type", rt, g.resource_type, f"ResourceGroup {g.id}")
    for r in instance.resources:
        check("resource type", rt, r.resource_type, f"Resource {r.id}")
        for g in r.groups:
            check("resource group", rg, g, f"Resource {r.id}")
    for e in instance.events:
        where = f"Event {e.id}"
        if e.time is not None:
            check("time", ti, e.time, where)
            if e.time in ti and ti[e.time] + e.duration > len(instance.times):
                add(Problem("structure", e.time, where, "preassigned time leaves too few times for the duration"))
        for g in e.groups:
            check("event group", eg, g, where)
        for i, er in enumerate(e.resources):
            if er.resource_type is not None:
                check("resource type", rt, er.resource_type, where)
            if er.preassigned is not None:
                check("resource", rs, er.preassigned, where)
                r = rs.get(er.preassigned)
                if r is not None and er.resource_type is not None and r.resource_type != er.resource_type:
                    add(Problem("structure", er.preassigned, where,
                                f"preassigned resource {er.preassigned!r} is not of type {er.resource_type!r}"))
            elif er.role is None:
                add(Problem("structure", e.resource_key(i), where, "unassigned event resource needs a role"))
    for c in instance.constraints:
        where = f"{c.body.tag} {c.id}"
        b = c.body
        for name, table, kind in (
            ("events", ev, "event"), ("event_groups", eg, "event group"),
            ("resources", rs, "resource"), ("resource_groups", rg, "resource group"),
            ("times", ti, "time"), ("time_groups", tg, "time group"),
        ):
            if name == "time_groups" and isinstance(b, SpreadEvents):
                continue
            for ref in getattr(b, name, ()):
                check(kind, table, ref, where)
        if isinstance(b, SpreadEvents):
            for stg in b.time_groups:
                check("time group", tg, stg.time_group, where)
        if isinstance(b, OrderEvents):
            for e1, e2 in b.pairs:
                check("event", ev, e1, where)
                check("event", ev, e2, where)
        if isinstance(b, BalanceClassSize) and b.counted_type is not None:
            check("resource type", rt, b.counted_type, where)
    return res


def validate_solution(instance: Instance, solution: Solution) -> ValidationResult:
    """Structural checks on a solution (references, durations, preassignments)."""
    res = ValidationResult()
    add = res.problems.append
    n_times = len(instance.times)
    totals: dict[str, int] = {}
    for k, se in enumerate(solution.events):
        where = f"SolutionEvent[{k}] ({se.event})"
        event = instance.event_by_id.get(se.event)
        if event is None:
            add(Problem("event", se.event, where))
            continue
        totals[se.event] = totals.get(se.event, 0) + se.duration
        if se.duration > event.duration:
            add(Problem("structure", se.event, where, "duration exceeds event duration"))
        if se.time is not None:
            if se.time not in instance.time_index:
                add(Problem("time", se.time, where))
            elif instance.time_index[se.time] + se.duration > n_times:
                add(Problem("structure", se.time, where, "subevent runs past the last time"))
        if event.time is not None and (se.time != event.time or se.duration != event.duration):
            add(Problem("structure", se.event, where,
                        f"event is preassigned time {event.time!r} and must be one subevent there"))
        keys = {event.resource_key(i): i for i in range(len(event.resources))}
        for role, rid in se.assignments.items():
            if role not in keys:
                add(Problem("role", role, where))
                continue
            if rid not in instance.resource_by_id:
                add(Problem("resource", rid, where))
                continue
            er = event.resources[keys[role]]
            if er.preassigned is not None and rid != er.preassigned:
                add(Problem("structure", rid, where, f"role {role!r} is preassigned {er.preassigned!r}"))
            elif er.resource_type is not None and instance.resource_by_id[rid].resource_type != er.resource_type:
                add(Problem("structure", rid, where, f"resource {rid!r} has the wrong type for role {role!r}"))
    for eid, total in totals.items():
        event = instance.event_by_id[eid]
        if total != event.duration:
            add(Problem("structure", eid, f"Event {eid}",
                        f"subevent durations sum to {total}, event duration is {event.duration}"))
    return res


def attends(instance: Instance, solution: Solution, resource: str, event_group: str) -> bool:
    """True iff ``resource`` is assigned to some subevent of some member event."""
    members = set(instance.event_group_members.get(event_group, ()))
    for se in normalize(instance, solution).events:
        if se.event in members and resource in se.assignments.values():
            return True
    return False
