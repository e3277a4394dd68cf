"""Greedy construction and first-improvement local search.

Costs are compared lexicographically as (hard, soft).  The search only
accepts moves that do not worsen the current cost, so the incumbent never
gets worse.
"""

from __future__ import annotations

import logging
import os
import random
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

from . import model as m
from .evaluator import evaluate

log = logging.getLogger("modxhstt.search")

MOVE_KINDS = ("shift-time", "swap-times", "reassign-resource", "swap-resources",
              "toggle-optional-subevent", "split", "merge")


@dataclass(frozen=True)
class SearchBudget:
    max_iterations: int = 10_000
    max_seconds: Optional[float] = None
    seed: int = 0

    def __post_init__(self):
        if self.max_iterations <= 0:
            raise ValueError("max_iterations must be positive")
        if self.max_seconds is not None and self.max_seconds <= 0:
            raise ValueError("max_seconds must be positive")


@dataclass(frozen=True)
class Move:
    kind: str
    operands: tuple


def cost_of(instance: m.Instance, solution: m.Solution) -> tuple[int, int]:
    return evaluate(instance, solution, check=False).pair


class _State:
    """Mutable working copy: per subevent [event, duration, start index or None, {role: resource}]."""

    def __init__(self, instance: m.Instance, solution: m.Solution):
        self.inst = instance
        ti = instance.time_index
        self.subs = [[se.event, se.duration, ti[se.time] if se.time is not None else None,
                      self._free_only(se)] for se in m.normalize(instance, solution).events]

    def _free_only(self, se: m.SolutionEvent) -> dict:
        ev = self.inst.event_by_id[se.event]
        fixed = {ev.resource_key(i) for i, er in enumerate(ev.resources) if er.preassigned is not None}
        return {k: r for k, r in se.assignments.items() if k not in fixed}

    def snapshot(self) -> list:
        return [[e, d, t, dict(a)] for e, d, t, a in self.subs]

    def restore(self, snap: list) -> None:
        self.subs = snap

    def solution(self) -> m.Solution:
        tid = self.inst.times
        return m.canonical(self.inst, m.Solution(self.inst.id, tuple(
            m.SolutionEvent(e, d, tid[t].id if t is not None else None, a) for e, d, t, a in self.subs)))


def _free_roles(event: m.Event) -> list[tuple[str, int]]:
    return [(event.resource_key(i), i) for i, er in enumerate(event.resources) if er.preassigned is None]


def _starts(instance: m.Instance, duration: int) -> list[int]:
    return [t for t in range(len(instance.times)) if t + duration <= len(instance.times)]


def _hard_pools(instance: m.Instance) -> dict[tuple[str, str], list[str]]:
    """Resources allowed by hard PreferResources, per (event, role key)."""
    out: dict[tuple[str, str], set[str]] = {}
    for c in instance.constraints:
        b = c.body
        if not (c.required and isinstance(b, m.PreferResources)):
            continue
        pool = set(instance.select_resources(b.resources, b.resource_groups))
        for eid in instance.select_events(b.events, b.event_groups):
            ev = instance.event_by_id[eid]
            for key, i in _free_roles(ev):
                if b.role is None or ev.resources[i].role == b.role:
                    typed = pool & set(instance.candidates(ev, i))
                    out[(eid, key)] = out.get((eid, key), typed) & typed
    return {k: sorted(v, key=instance.resource_order.__getitem__) for k, v in out.items()}


def construct_initial(instance: m.Instance, seed: int = 0) -> m.Solution:
    """Greedy: preassigned times first, then hard LinkEvents clusters, then the rest."""
    rng = random.Random(seed)
    pools = _hard_pools(instance)
    placed: list[m.SolutionEvent] = []

    def cost_with(extra: list[m.SolutionEvent]) -> tuple[int, int]:
        return cost_of(instance, m.Solution(instance.id, tuple(placed + extra)))

    def resources_for(event: m.Event, time: Optional[str]) -> dict:
        chosen: dict[str, str] = {}
        for key, i in _free_roles(event):
            cands = pools.get((event.id, key), instance.candidates(event, i))
            options = list(cands)
            rng.shuffle(options)
            best, best_cost = None, None
            for r in options + [None]:
                trial = dict(chosen)
                if r is not None:
                    trial[key] = r
                c = cost_with([m.SolutionEvent(event.id, event.duration, time, trial)])
                if best_cost is None or c < best_cost:
                    best, best_cost = r, c
            if best is not None:
                chosen[key] = best
        return chosen

    def place_group(events: list[m.Event]) -> None:
        if all(e.time is not None for e in events):
            for e in events:
                placed.append(m.SolutionEvent(e.id, e.duration, e.time, resources_for(e, e.time)))
            return
        longest = max(e.duration for e in events)
        fixed = next((e.time for e in events if e.time is not None), None)
        starts = [instance.times[t].id for t in _starts(instance, longest)] if fixed is None else [fixed]
        rng.shuffle(starts)
        best, best_cost = None, None
        for t in starts + [None]:
            trial = [m.SolutionEvent(e.id, e.duration, e.time or t, {}) for e in events]
            c = cost_with(trial)
            if best_cost is None or c < best_cost:
                best, best_cost = t, c
        for e in events:
            time = e.time or best
            placed.append(m.SolutionEvent(e.id, e.duration, time, resources_for(e, time)))

    done: set[str] = set()
    for e in instance.events:
        if e.time is not None:
            place_group([e])
            done.add(e.id)
    for c in instance.constraints:
        if c.required and isinstance(c.body, m.LinkEvents):
            for eg in c.body.event_groups:
                members = [instance.event_by_id[x] for x in instance.event_group_members.get(eg, ())
                           if x not in done]
                if members:
                    place_group(members)
                    done.update(e.id for e in members)
    rest = [e for e in instance.events if e.id not in done]
    rest.sort(key=lambda e: (-len(e.resources), -e.duration, instance.event_order[e.id]))
    for e in rest:
        place_group([e])
    return m.canonical(instance, m.Solution(instance.id, tuple(placed)))


def _random_move(rng: random.Random, st: _State, pools: dict) -> Optional[Move]:
    inst = st.inst
    subs = st.subs
    if not subs:
        return None
    kind = rng.choice(MOVE_KINDS)
    k = rng.randrange(len(subs))
    e, d, t, a = subs[k]
    ev = inst.event_by_id[e]
    if kind == "shift-time":
        if ev.time is not None:
            return None
        options = _starts(inst, d) + [None]
        return Move(kind, (k, rng.choice(options)))
    if kind == "swap-times":
        j = rng.randrange(len(subs))
        e2, d2, t2, _ = subs[j]
        if j == k or t == t2 or ev.time is not None or inst.event_by_id[e2].time is not None:
            return None
        T = len(inst.times)
        if (t2 is not None and t2 + d > T) or (t is not None and t + d2 > T):
            return None
        return Move(kind, (k, j))
    roles = _free_roles(ev)
    if kind in ("reassign-resource", "toggle-optional-subevent"):
        if not roles:
            return None
        key, i = rng.choice(roles)
        if kind == "toggle-optional-subevent":
            if key in a:
                return Move(kind, (k, key, None))
            cands = pools.get((e, key), inst.candidates(ev, i))
            return Move(kind, (k, key, rng.choice(cands))) if cands else None
        cands = inst.candidates(ev, i) + [None]
        return Move(kind, (k, key, rng.choice(cands)))
    if kind == "swap-resources":
        j = rng.randrange(len(subs))
        if j == k or not roles:
            return None
        ev2 = inst.event_by_id[subs[j][0]]
        roles2 = _free_roles(ev2)
        if not roles2:
            return None
        (key, i), (key2, i2) = rng.choice(roles), rng.choice(roles2)
        r1, r2 = a.get(key), subs[j][3].get(key2)
        if r1 == r2:
            return None
        if (r2 is not None and r2 not in inst.candidates(ev, i)) or \
                (r1 is not None and r1 not in inst.candidates(ev2, i2)):
            return None
        return Move(kind, (k, key, j, key2))
    if kind == "split":
        if d < 2 or ev.time is not None:
            return None
        return Move(kind, (k, rng.randint(1, d - 1)))
    if kind == "merge":
        others = [j for j, s in enumerate(subs) if s[0] == e and j != k]
        if not others:
            return None
        return Move(kind, (k, rng.choice(others)))
    return None


def _apply(st: _State, move: Move) -> None:
    subs = st.subs
    T = len(st.inst.times)
    kind, ops = move.kind, move.operands
    if kind == "shift-time":
        subs[ops[0]][2] = ops[1]
    elif kind == "swap-times":
        k, j = ops
        subs[k][2], subs[j][2] = subs[j][2], subs[k][2]
    elif kind in ("reassign-resource", "toggle-optional-subevent"):
        k, key, r = ops
        if r is None:
            subs[k][3].pop(key, None)
        else:
            subs[k][3][key] = r
    elif kind == "swap-resources":
        k, key, j, key2 = ops
        r1, r2 = subs[k][3].get(key), subs[j][3].get(key2)
        for idx, kk, r in ((k, key, r2), (j, key2, r1)):
            if r is None:
                subs[idx][3].pop(kk, None)
            else:
                subs[idx][3][kk] = r
    elif kind == "split":
        k, first = ops
        e, d, t, a = subs[k]
        subs[k] = [e, first, t, dict(a)]
        t2 = t + first if t is not None and t + d <= T else None
        subs.append([e, d - first, t2, dict(a)])
    elif kind == "merge":
        k, j = ops
        e, d, t, a = subs[k]
        d2 = d + subs[j][1]
        if t is not None and t + d2 > T:
            t = None
        subs[k] = [e, d2, t, a]
        del subs[j]
    else:
        raise ValueError(kind)


def local_search(instance: m.Instance, start: m.Solution, budget: SearchBudget,
                 trace: Optional[list] = None,
                 on_improve: Optional[Callable[[int, tuple[int, int]], None]] = None,
                 info: Optional[dict] = None) -> m.Solution:
    """First-improvement search; equal-cost moves are accepted as sideways steps.

    ``info["iterations"]`` receives the number of iterations actually run.
    """
    rng = random.Random(budget.seed)
    pools = _hard_pools(instance)
    st = _State(instance, start)
    current = cost_of(instance, st.solution())
    if trace is not None:
        trace.append((0, current))
    log.info("iter=%d hard=%d soft=%d", 0, *current)
    deadline = None if budget.max_seconds is None else time.monotonic() + budget.max_seconds
    done = 0
    for it in range(1, budget.max_iterations + 1):
        if current == (0, 0):
            break
        if deadline is not None and time.monotonic() > deadline:
            break
        done = it
        move = _random_move(rng, st, pools)
        if move is None:
            continue
        snap = st.snapshot()
        _apply(st, move)
        cand = st.solution()
        if not m.validate_solution(instance, cand).ok:
            st.restore(snap)
            continue
        c = cost_of(instance, cand)
        if c <= current:
            if c < current:
                log.info("iter=%d hard=%d soft=%d", it, *c)
                if on_improve:
                    on_improve(it, c)
            current = c
            if trace is not None:
                trace.append((it, c))
        else:
            st.restore(snap)
    log.info("iter=%d hard=%d soft=%d", done, *current)
    if info is not None:
        info["iterations"] = done
    return st.solution()


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get("MODXHSTT_THREADS", "1")))
    except ValueError:
        return 1


def solve(instance: m.Instance, budget: SearchBudget, restarts: int = 1,
          workers: Optional[int] = None, info: Optional[dict] = None) -> tuple[m.Solution, tuple[int, int]]:
    """Independent seeded runs (seed, seed+1, ...); the lexicographically best result wins.

    ``info["iterations"]`` receives the total iteration count over all runs.
    """
    workers = workers or default_workers()

    def run(k: int):
        b = SearchBudget(budget.max_iterations, budget.max_seconds, budget.seed + k)
        stats: dict = {}
        sol = local_search(instance, construct_initial(instance, b.seed), b, info=stats)
        return cost_of(instance, sol), k, sol, stats["iterations"]

    if workers > 1 and restarts > 1:
        with ThreadPoolExecutor(workers) as pool:
            results = list(pool.map(run, range(restarts)))
    else:
        results = [run(k) for k in range(restarts)]
    best = min(results, key=lambda r: (r[0], r[1]))
    if info is not None:
        info["iterations"] = sum(r[3] for r in results)
    return best[2], best[0]
