"""Deviation and cost computation for every constraint family.

This is the reference semantics of the toolkit: the ILP generator and the
heuristic are both checked against it.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from . import model as m


class InvalidSolutionError(ValueError):
    def __init__(self, problems: list[m.Problem]):
        self.problems = problems
        super().__init__("; ".join(str(p) for p in problems))


def apply_cost_function(kind: m.CostFunction, deviations: Sequence[int], weight: int) -> int:
    if kind is m.CostFunction.SUM:
        return weight * sum(deviations)
    if kind is m.CostFunction.SUM_SQUARE:
        return weight * sum(d * d for d in deviations)
    if kind is m.CostFunction.SQUARE_SUM:
        return weight * sum(deviations) ** 2
    raise ValueError(f"unsupported cost function {kind!r}")


def bounded_deviation(value, lower: Optional[int], upper: Optional[int]) -> int:
    """max(0, value - upper, lower - value), rounded up for fractional values."""
    dev = 0
    if upper is not None:
        dev = max(dev, value - upper)
    if lower is not None:
        dev = max(dev, lower - value)
    return math.ceil(dev)


def student_choice_deviation(attended: int, minimum: int, maximum: int) -> int:
    return max(0, attended - maximum) + max(0, minimum - attended)


def balance_deviations(sizes: Sequence[int], maximum_difference: int) -> list[int]:
    out = []
    for i, a in enumerate(sizes):
        worst = max((abs(a - b) for j, b in enumerate(sizes) if j != i), default=0)
        out.append(max(0, worst - maximum_difference))
    return out


@dataclass(frozen=True)
class Entry:
    constraint: str
    point: str
    deviations: tuple[int, ...]
    cost: int
    required: bool

    @property
    def deviation(self) -> int:
        return sum(self.deviations)


@dataclass
class DeviationReport:
    entries: list[Entry] = field(default_factory=list)
    hard_cost: int = 0
    soft_cost: int = 0

    @property
    def pair(self) -> tuple[int, int]:
        return self.hard_cost, self.soft_cost

    def scalar(self, hard_weight: int) -> int:
        return hard_weight * self.hard_cost + self.soft_cost

    def to_text(self, nonzero_only: bool = True) -> str:
        lines = []
        for e in self.entries:
            if nonzero_only and not e.cost:
                continue
            lines.append(f"{e.constraint}\t{e.point}\t{'hard' if e.required else 'soft'}"
                         f"\tdeviation={e.deviation}\tcost={e.cost}")
        lines.append(f"({self.hard_cost}, {self.soft_cost})")
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps({
            "entries": [
                {"constraint": e.constraint, "point": e.point, "required": e.required,
                 "deviations": list(e.deviations), "deviation": e.deviation, "cost": e.cost}
                for e in self.entries
            ],
            "hard_cost": self.hard_cost,
            "soft_cost": self.soft_cost,
        }, indent=2)


# --- solution view -------------------------------------------------------------


@dataclass(frozen=True)
class Sub:
    event: str
    duration: int
    start: Optional[int]
    resources: dict  # role key -> resource id

    def occupies(self) -> range:
        if self.start is None:
            return range(0)
        return range(self.start, self.start + self.duration)


class BusyMatrix:
    """Usage counts ``v[r][t]`` plus derived busy flags."""

    def __init__(self, n_times: int):
        self.n_times = n_times
        self.usage: dict[str, list[int]] = {}

    def add(self, resource: str, times: Iterable[int]) -> None:
        row = self.usage.setdefault(resource, [0] * self.n_times)
        for t in times:
            row[t] += 1

    def v(self, resource: str, t: int) -> int:
        row = self.usage.get(resource)
        return row[t] if row else 0

    def q(self, resource: str, t: int) -> int:
        return 1 if self.v(resource, t) >= 1 else 0

    def p(self, resource: str, times: Iterable[int]) -> int:
        row = self.usage.get(resource)
        return 1 if row and any(row[t] for t in times) else 0


def build_busy_matrix(instance: m.Instance, solution: m.Solution) -> BusyMatrix:
    return _View(instance, solution).busy


class _View:
    def __init__(self, instance: m.Instance, solution: m.Solution):
        self.instance = instance
        ti = instance.time_index
        norm = m.normalize(instance, solution)
        self.subs = [Sub(se.event, se.duration, ti[se.time] if se.time is not None else None,
                         dict(se.assignments)) for se in norm.events]
        self.by_event: dict[str, list[Sub]] = {e.id: [] for e in instance.events}
        for s in self.subs:
            self.by_event[s.event].append(s)
        self.busy = BusyMatrix(len(instance.times))
        for s in self.subs:
            if s.start is not None:
                for r in s.resources.values():
                    self.busy.add(r, s.occupies())

    def attends(self, resource: str, event_group: str) -> bool:
        for e in self.instance.event_group_members.get(event_group, ()):
            for s in self.by_event[e]:
                if resource in s.resources.values():
                    return True
        return False

    def occupied(self, event: str) -> set[int]:
        out: set[int] = set()
        for s in self.by_event[event]:
            out.update(s.occupies())
        return out


# --- per-family deviations --------------------------------------------------------
# Each returns a list of (point id, deviations at that point).


def _event_points(inst: m.Instance, body) -> list[str]:
    return inst.select_events(body.events, body.event_groups)


def _resource_points(inst: m.Instance, body) -> list[str]:
    return inst.select_resources(body.resources, body.resource_groups)


def _role_matches(role: Optional[str], er: m.EventResource) -> bool:
    return role is None or er.role == role


def _assign_resource(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for eid in _event_points(inst, b):
        event = inst.event_by_id[eid]
        for i, er in enumerate(event.resources):
            if not _role_matches(b.role, er):
                continue
            key = event.resource_key(i)
            done = sum(s.duration for s in view.by_event[eid] if key in s.resources)
            out.append((f"{c.id}/{eid}/{key}", (event.duration - done,)))
    return out


def _assign_time(view: _View, c: m.Constraint):
    inst = view.instance
    out = []
    for eid in _event_points(inst, c.body):
        timed = sum(s.duration for s in view.by_event[eid] if s.start is not None)
        out.append((f"{c.id}/{eid}", (inst.event_by_id[eid].duration - timed,)))
    return out


def _split_events(view: _View, c: m.Constraint):
    b = c.body
    out = []
    for eid in _event_points(view.instance, b):
        subs = view.by_event[eid]
        amount = bounded_deviation(len(subs), b.min_amount, b.max_amount)
        bad = sum(1 for s in subs
                  if (b.min_duration is not None and s.duration < b.min_duration)
                  or (b.max_duration is not None and s.duration > b.max_duration))
        out.append((f"{c.id}/{eid}", (amount + bad,)))
    return out


def _distribute_split_events(view: _View, c: m.Constraint):
    b = c.body
    out = []
    for eid in _event_points(view.instance, b):
        n = sum(1 for s in view.by_event[eid] if s.duration == b.duration)
        out.append((f"{c.id}/{eid}", (bounded_deviation(n, b.minimum, b.maximum),)))
    return out


def _prefer_resources(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    allowed = set(inst.select_resources(b.resources, b.resource_groups))
    out = []
    for eid in _event_points(inst, b):
        event = inst.event_by_id[eid]
        for i, er in enumerate(event.resources):
            if er.preassigned is not None or not _role_matches(b.role, er):
                continue
            key = event.resource_key(i)
            dev = sum(s.duration for s in view.by_event[eid]
                      if key in s.resources and s.resources[key] not in allowed)
            out.append((f"{c.id}/{eid}/{key}", (dev,)))
    return out


def _prefer_times(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    allowed = set(inst.select_times(b.times, b.time_groups))
    out = []
    for eid in _event_points(inst, b):
        dev = sum(s.duration for s in view.by_event[eid]
                  if s.start is not None and s.start not in allowed
                  and (b.duration is None or s.duration == b.duration))
        out.append((f"{c.id}/{eid}", (dev,)))
    return out


def _avoid_split_assignments(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for eg in b.event_groups:
        used: set[str] = set()
        for eid in inst.event_group_members.get(eg, ()):
            event = inst.event_by_id[eid]
            keys = [event.resource_key(i) for i, er in enumerate(event.resources)
                    if er.preassigned is None and _role_matches(b.role, er)]
            for s in view.by_event[eid]:
                used.update(s.resources[k] for k in keys if k in s.resources)
        out.append((f"{c.id}/{eg}", (max(0, len(used) - 1),)))
    return out


def _spread_events(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for eg in b.event_groups:
        subs = [s for eid in inst.event_group_members.get(eg, ()) for s in view.by_event[eid]]
        devs = []
        for stg in b.time_groups:
            members = set(inst.time_group_members.get(stg.time_group, ()))
            n = sum(1 for s in subs if s.start is not None and s.start in members)
            devs.append(bounded_deviation(n, stg.minimum, stg.maximum))
        out.append((f"{c.id}/{eg}", tuple(devs)))
    return out


def _link_events(view: _View, c: m.Constraint):
    inst = view.instance
    out = []
    for eg in c.body.event_groups:
        occ = [view.occupied(eid) for eid in inst.event_group_members.get(eg, ())]
        devs = []
        for t in range(len(inst.times)):
            flags = [t in o for o in occ]
            devs.append(1 if any(flags) and not all(flags) else 0)
        out.append((f"{c.id}/{eg}", tuple(devs)))
    return out


def first_last(view: _View, event: str) -> tuple[int, int]:
    """(first start index, last exclusive end) over timed subevents; (|T|, 0) if none."""
    timed = [s for s in view.by_event[event] if s.start is not None]
    if not timed:
        return len(view.instance.times), 0
    return min(s.start for s in timed), max(s.start + s.duration for s in timed)


def _order_events(view: _View, c: m.Constraint):
    b = c.body
    out = []
    for e1, e2 in b.pairs:
        _, last = first_last(view, e1)
        first, _ = first_last(view, e2)
        dev = bounded_deviation(first - last, b.min_separation, b.max_separation)
        out.append((f"{c.id}/{e1}/{e2}", (dev,)))
    return out


def _avoid_clashes(view: _View, c: m.Constraint):
    n = len(view.instance.times)
    out = []
    for r in _resource_points(view.instance, c.body):
        out.append((f"{c.id}/{r}", tuple(max(0, view.busy.v(r, t) - 1) for t in range(n))))
    return out


def _avoid_unavailable_times(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    times = inst.select_times(b.times, b.time_groups)
    return [(f"{c.id}/{r}", (sum(view.busy.q(r, t) for t in times),))
            for r in _resource_points(inst, b)]


def idle_times(busy_flags: Sequence[int]) -> int:
    """Free slots with a busy slot somewhere before and somewhere after."""
    busy = [i for i, f in enumerate(busy_flags) if f]
    if len(busy) < 2:
        return 0
    return sum(1 for i in range(busy[0] + 1, busy[-1]) if not busy_flags[i])


def _limit_idle_times(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for r in _resource_points(inst, b):
        total = sum(idle_times([view.busy.q(r, t) for t in inst.time_group_members.get(g, ())])
                    for g in b.time_groups)
        out.append((f"{c.id}/{r}", (bounded_deviation(total, b.minimum, b.maximum),)))
    return out


def _cluster_busy_times(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for r in _resource_points(inst, b):
        n = sum(view.busy.p(r, inst.time_group_members.get(g, ())) for g in b.time_groups)
        out.append((f"{c.id}/{r}", (bounded_deviation(n, b.minimum, b.maximum),)))
    return out


def _limit_busy_times(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    out = []
    for r in _resource_points(inst, b):
        devs = []
        for g in b.time_groups:
            n = sum(view.busy.q(r, t) for t in inst.time_group_members.get(g, ()))
            devs.append(bounded_deviation(n, b.minimum, b.maximum) if n else 0)
        out.append((f"{c.id}/{r}", tuple(devs)))
    return out


def _limit_workload(view: _View, c: m.Constraint):
    inst, b = view.instance, c.body
    load: dict[str, Fraction] = {}
    for s in view.subs:
        if s.start is None:
            continue
        event = inst.event_by_id[s.event]
        for i in range(len(event.resources)):
            r = s.resources.get(event.resource_key(i))
            if r is not None:
                load[r] = load.get(r, Fraction(0)) + Fraction(s.duration * event.workload_of(i), event.duration)
    return [(f"{c.id}/{r}", (bounded_deviation(load.get(r, Fraction(0)), b.minimum, b.maximum),))
            for r in _resource_points(inst, b)]


def _student_choice(view: _View, c: m.Constraint):
    b = c.body
    out = []
    for r in _resource_points(view.instance, b):
        a = sum(1 for eg in b.event_groups if view.attends(r, eg))
        out.append((f"{c.id}/{r}", (student_choice_deviation(a, b.minimum, b.maximum),)))
    return out


def class_sizes(view: _View, body: m.BalanceClassSize) -> list[int]:
    inst = view.instance
    sizes = []
    for eg in body.event_groups:
        members = set()
        for eid in inst.event_group_members.get(eg, ()):
            for s in view.by_event[eid]:
                members.update(s.resources.values())
        if body.counted_type is not None:
            members = {r for r in members if inst.resource_by_id[r].resource_type == body.counted_type}
        sizes.append(len(members))
    return sizes


def _balance_class_size(view: _View, c: m.Constraint):
    b = c.body
    devs = balance_deviations(class_sizes(view, b), b.maximum_difference)
    return [(f"{c.id}/{eg}", (d,)) for eg, d in zip(b.event_groups, devs)]


_DISPATCH = {
    m.AssignResource: _assign_resource,
    m.AssignTime: _assign_time,
    m.SplitEvents: _split_events,
    m.DistributeSplitEvents: _distribute_split_events,
    m.PreferResources: _prefer_resources,
    m.PreferTimes: _prefer_times,
    m.AvoidSplitAssignments: _avoid_split_assignments,
    m.SpreadEvents: _spread_events,
    m.LinkEvents: _link_events,
    m.OrderEvents: _order_events,
    m.AvoidClashes: _avoid_clashes,
    m.AvoidUnavailableTimes: _avoid_unavailable_times,
    m.LimitIdleTimes: _limit_idle_times,
    m.ClusterBusyTimes: _cluster_busy_times,
    m.LimitBusyTimes: _limit_busy_times,
    m.LimitWorkload: _limit_workload,
    m.StudentChoice: _student_choice,
    m.BalanceClassSize: _balance_class_size,
}


# --- public entry points ---------------------------------------------------------


def evaluate_constraint(instance: m.Instance, constraint: m.Constraint,
                        solution: m.Solution | _View) -> list[tuple[str, tuple[int, ...]]]:
    view = solution if isinstance(solution, _View) else _View(instance, solution)
    return _DISPATCH[type(constraint.body)](view, constraint)


def evaluate_student_choice(instance: m.Instance, body: m.StudentChoice,
                            solution: m.Solution) -> dict[str, int]:
    c = m.Constraint("_", body)
    return {p.split("/", 1)[1]: d[0] for p, d in _student_choice(_View(instance, solution), c)}


def evaluate_balance_class_size(instance: m.Instance, body: m.BalanceClassSize,
                                solution: m.Solution) -> dict[str, int]:
    c = m.Constraint("_", body)
    return {p.split("/", 1)[1]: d[0] for p, d in _balance_class_size(_View(instance, solution), c)}


def evaluate(instance: m.Instance, solution: m.Solution, workers: int = 1,
             check: bool = True) -> DeviationReport:
    """Evaluate every constraint; raises InvalidSolutionError on structural problems."""
    if check:
        problems = m.validate_solution(instance, solution).problems
        if problems:
            raise InvalidSolutionError(problems)
    view = _View(instance, solution)

    def run(c: m.Constraint) -> list[Entry]:
        return [Entry(c.id, point, devs, apply_cost_function(c.cost_function, devs, c.weight), c.required)
                for point, devs in _DISPATCH[type(c.body)](view, c)]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            chunks = list(pool.map(run, instance.constraints))
    else:
        chunks = [run(c) for c in instance.constraints]
    report = DeviationReport()
    for chunk in chunks:
        for e in chunk:
            report.entries.append(e)
            if e.required:
                report.hard_cost += e.cost
            else:
                report.soft_cost += e.cost
    return report


def cost_pair(instance: m.Instance, solution: m.Solution) -> tuple[int, int]:
    return evaluate(instance, solution, check=False).pair
