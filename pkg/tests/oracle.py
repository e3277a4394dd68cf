"""Independent deviation oracle.

Written from the constraint definitions without reusing evaluator code: it
expands every subevent into explicit (resource, slot) occupancy tuples and
recomputes each family by direct counting.  Only the model types are shared.
"""

from __future__ import annotations

import math
from fractions import Fraction

from modxhstt import model as m


def _subevents(inst, sol):
    """List of dicts, one per subevent, with absent events filled in as unplaced."""
    present = {se.event for se in sol.events}
    raw = list(sol.events) + [m.SolutionEvent(e.id, e.duration, e.time) for e in inst.events
                              if e.id not in present]
    out = []
    for se in raw:
        ev = inst.event_by_id[se.event]
        roles = {}
        for i, er in enumerate(ev.resources):
            key = er.role if er.role is not None else f"#{i}"
            if er.preassigned is not None:
                roles[key] = er.preassigned
            elif key in se.assignments:
                roles[key] = se.assignments[key]
        start = None if se.time is None else [t.id for t in inst.times].index(se.time)
        slots = [] if start is None else list(range(start, start + se.duration))
        out.append({"event": se.event, "dur": se.duration, "start": start, "slots": slots, "roles": roles})
    return out


def _bound_dev(x, lo, hi):
    d = 0
    if hi is not None and x > hi:
        d = x - hi
    if lo is not None and x < lo:
        d = max(d, lo - x)
    return math.ceil(d)


def _cost(cf, devs, weight):
    if cf == m.CostFunction.SUM:
        return weight * sum(devs)
    if cf == m.CostFunction.SUM_SQUARE:
        return weight * sum(d ** 2 for d in devs)
    return weight * sum(devs) ** 2


def _events_of(inst, body):
    ids = set(getattr(body, "events", ()))
    for g in getattr(body, "event_groups", ()):
        ids |= {e.id for e in inst.events if g in e.groups}
    return [e.id for e in inst.events if e.id in ids]


def _members(inst, eg):
    return [e.id for e in inst.events if eg in e.groups]


def _resources_of(inst, body):
    ids = set(body.resources)
    for g in body.resource_groups:
        ids |= {r.id for r in inst.resources if g in r.groups}
    return [r.id for r in inst.resources if r.id in ids]


def _times_in(inst, tg):
    return [t.index for t in inst.times if tg in t.groups]


def _usage(subs, r, t):
    return sum(1 for s in subs if t in s["slots"] for who in s["roles"].values() if who == r)


def deviations(inst: m.Instance, c: m.Constraint, sol: m.Solution) -> list[tuple]:
    subs = _subevents(inst, sol)
    b = c.body
    T = len(inst.times)
    of = lambda eid: [s for s in subs if s["event"] == eid]  # noqa: E731
    k = type(b).__name__
    res = []
    if k == "AssignResource":
        for eid in _events_of(inst, b):
            ev = inst.event_by_id[eid]
            for i, er in enumerate(ev.resources):
                if b.role is not None and er.role != b.role:
                    continue
                key = er.role if er.role is not None else f"#{i}"
                res.append((ev.duration - sum(s["dur"] for s in of(eid) if key in s["roles"]),))
    elif k == "AssignTime":
        for eid in _events_of(inst, b):
            res.append((inst.event_by_id[eid].duration - sum(s["dur"] for s in of(eid) if s["start"] is not None),))
    elif k == "SplitEvents":
        for eid in _events_of(inst, b):
            n = len(of(eid))
            d = _bound_dev(n, b.min_amount, b.max_amount)
            for s in of(eid):
                if (b.min_duration is not None and s["dur"] < b.min_duration) or \
                        (b.max_duration is not None and s["dur"] > b.max_duration):
                    d += 1
            res.append((d,))
    elif k == "DistributeSplitEvents":
        for eid in _events_of(inst, b):
            res.append((_bound_dev(sum(1 for s in of(eid) if s["dur"] == b.duration), b.minimum, b.maximum),))
    elif k == "PreferResources":
        ok = set(_resources_of(inst, b))
        for eid in _events_of(inst, b):
            ev = inst.event_by_id[eid]
            for i, er in enumerate(ev.resources):
                if er.preassigned is not None or (b.role is not None and er.role != b.role):
                    continue
                key = er.role if er.role is not None else f"#{i}"
                res.append((sum(s["dur"] for s in of(eid) if key in s["roles"] and s["roles"][key] not in ok),))
    elif k == "PreferTimes":
        ok = {inst.time_index[t] for t in b.times}
        for g in b.time_groups:
            ok |= set(_times_in(inst, g))
        for eid in _events_of(inst, b):
            res.append((sum(s["dur"] for s in of(eid) if s["start"] is not None and s["start"] not in ok
                            and (b.duration is None or b.duration == s["dur"])),))
    elif k == "AvoidSplitAssignments":
        for eg in b.event_groups:
            seen = set()
            for eid in _members(inst, eg):
                ev = inst.event_by_id[eid]
                for i, er in enumerate(ev.resources):
                    if er.preassigned is not None or (b.role is not None and er.role != b.role):
                        continue
                    key = er.role if er.role is not None else f"#{i}"
                    seen |= {s["roles"][key] for s in of(eid) if key in s["roles"]}
            res.append((max(0, len(seen) - 1),))
    elif k == "SpreadEvents":
        for eg in b.event_groups:
            row = []
            for stg in b.time_groups:
                ts = set(_times_in(inst, stg.time_group))
                n = sum(1 for eid in _members(inst, eg) for s in of(eid) if s["start"] in ts)
                row.append(_bound_dev(n, stg.minimum, stg.maximum))
            res.append(tuple(row))
    elif k == "LinkEvents":
        for eg in b.event_groups:
            occ = [{t for s in of(eid) for t in s["slots"]} for eid in _members(inst, eg)]
            row = []
            for t in range(T):
                n = sum(1 for o in occ if t in o)
                row.append(1 if 0 < n < len(occ) else 0)
            res.append(tuple(row))
    elif k == "OrderEvents":
        for e1, e2 in b.pairs:
            ends = [s["start"] + s["dur"] for s in of(e1) if s["start"] is not None]
            starts = [s["start"] for s in of(e2) if s["start"] is not None]
            last = max(ends) if ends else 0
            first = min(starts) if starts else T
            res.append((_bound_dev(first - last, b.min_separation, b.max_separation),))
    elif k == "AvoidClashes":
        for r in _resources_of(inst, b):
            res.append(tuple(max(0, _usage(subs, r, t) - 1) for t in range(T)))
    elif k == "AvoidUnavailableTimes":
        ts = {inst.time_index[t] for t in b.times}
        for g in b.time_groups:
            ts |= set(_times_in(inst, g))
        for r in _resources_of(inst, b):
            res.append((sum(1 for t in ts if _usage(subs, r, t) > 0),))
    elif k == "LimitIdleTimes":
        for r in _resources_of(inst, b):
            total = 0
            for g in b.time_groups:
                ts = sorted(_times_in(inst, g))
                busy = [_usage(subs, r, t) > 0 for t in ts]
                for j in range(len(ts)):
                    if not busy[j] and any(busy[:j]) and any(busy[j + 1:]):
                        total += 1
            res.append((_bound_dev(total, b.minimum, b.maximum),))
    elif k == "ClusterBusyTimes":
        for r in _resources_of(inst, b):
            n = sum(1 for g in b.time_groups if any(_usage(subs, r, t) for t in _times_in(inst, g)))
            res.append((_bound_dev(n, b.minimum, b.maximum),))
    elif k == "LimitBusyTimes":
        for r in _resources_of(inst, b):
            row = []
            for g in b.time_groups:
                n = sum(1 for t in _times_in(inst, g) if _usage(subs, r, t))
                row.append(0 if n == 0 else _bound_dev(n, b.minimum, b.maximum))
            res.append(tuple(row))
    elif k == "LimitWorkload":
        for r in _resources_of(inst, b):
            load = Fraction(0)
            for s in subs:
                if s["start"] is None:
                    continue
                ev = inst.event_by_id[s["event"]]
                for i, er in enumerate(ev.resources):
                    key = er.role if er.role is not None else f"#{i}"
                    if s["roles"].get(key) == r:
                        L = er.workload if er.workload is not None else (
                            ev.workload if ev.workload is not None else ev.duration)
                        load += Fraction(s["dur"] * L, ev.duration)
            res.append((_bound_dev(load, b.minimum, b.maximum),))
    elif k == "StudentChoice":
        for r in _resources_of(inst, b):
            a = sum(1 for g in b.event_groups
                    if any(r in s["roles"].values() for eid in _members(inst, g) for s in of(eid)))
            res.append((max(0, a - b.maximum) + max(0, b.minimum - a),))
    elif k == "BalanceClassSize":
        sizes = []
        for g in b.event_groups:
            who = {x for eid in _members(inst, g) for s in of(eid) for x in s["roles"].values()}
            if b.counted_type is not None:
                who = {x for x in who if inst.resource_by_id[x].resource_type == b.counted_type}
            sizes.append(len(who))
        for i in range(len(sizes)):
            diffs = [abs(sizes[i] - sizes[j]) for j in range(len(sizes)) if j != i]
            res.append((max(0, max(diffs) - b.maximum_difference),))
    else:
        raise AssertionError(k)
    return res


def cost(inst: m.Instance, sol: m.Solution) -> tuple[int, int]:
    hard = soft = 0
    for c in inst.constraints:
        total = sum(_cost(c.cost_function, list(d), c.weight) for d in deviations(inst, c, sol))
        if c.required:
            hard += total
        else:
            soft += total
    return hard, soft
