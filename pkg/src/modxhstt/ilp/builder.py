"""Build the integer program for an instance.

Variable names are ``<symbol>.<index>...`` with integer indices into the
instance tables; ``D`` stands for the dummy time or the dummy resource.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional

from .. import model as m
from .model import IlpModel, Lin, ModelError

DUMMY = "D"

# Rows that only involve the assignment structure (no constraint blocks).
STRUCTURAL_BLOCKS = frozenset({
    "start", "start_feasible", "assign_one", "assign_link", "w_link",
    "active_time", "active_res", "duration", "preassigned_time",
})


@dataclass(frozen=True)
class BuildOptions:
    reduce: bool = False
    tighten: bool = False
    hard_mode: str = "penalty"      # "penalty" or "pin"
    hard_weight: Optional[int] = None

    def __post_init__(self):
        if self.hard_mode not in ("penalty", "pin"):
            raise ValueError(f"unknown hard mode {self.hard_mode!r}")
        if self.hard_weight is not None and self.hard_weight < 1:
            raise ValueError("hard weight must be positive")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "BuildOptions":
        return cls(**{k: data[k] for k in ("reduce", "tighten", "hard_mode", "hard_weight") if k in data})


@dataclass(frozen=True)
class PoolSub:
    index: int
    event: str
    duration: int
    copy: int


def _partition_possible(total: int, durations: list[int], lo: int, hi: int) -> bool:
    # reachable[k] = sums reachable with exactly k parts
    reachable = [{0}]
    for _ in range(hi):
        reachable.append({s + d for s in reachable[-1] for d in durations if s + d <= total})
    return any(total in reachable[k] for k in range(lo, hi + 1))


def subevent_pool(instance: m.Instance, reduce: bool = False) -> list[PoolSub]:
    """All candidate subevents: ``floor(D/d)`` copies of each duration ``d``.

    With ``reduce``, hard SplitEvents bounds restrict durations and copies.
    """
    split_bounds: dict[str, list[m.SplitEvents]] = {}
    if reduce:
        for c in instance.constraints:
            if c.required and isinstance(c.body, m.SplitEvents):
                for eid in instance.select_events(c.body.events, c.body.event_groups):
                    split_bounds.setdefault(eid, []).append(c.body)
    pool: list[PoolSub] = []
    for e in instance.events:
        D = e.duration
        copies = {d: D // d for d in range(1, D + 1)}
        bodies = split_bounds.get(e.id, [])
        if bodies:
            lo_d = max([b.min_duration for b in bodies if b.min_duration is not None], default=1)
            hi_d = min([b.max_duration for b in bodies if b.max_duration is not None], default=D)
            lo_n = max([b.min_amount for b in bodies if b.min_amount is not None], default=1)
            hi_n = min([b.max_amount for b in bodies if b.max_amount is not None], default=D)
            durs = [d for d in copies if lo_d <= d <= hi_d]
            if e.time is not None and D not in durs:
                durs = []
            if durs and _partition_possible(D, durs, max(lo_n, 1), min(hi_n, D)):
                copies = {d: min(copies[d], hi_n) for d in durs}
        for d in sorted(copies, reverse=True):
            for k in range(copies[d]):
                pool.append(PoolSub(len(pool), e.id, d, k))
    return pool


def choice_pools(instance: m.Instance, reduce: bool) -> dict[tuple[str, int], list[str]]:
    """Candidate resources per unpreassigned event resource.

    With ``reduce``, resources outside every hard PreferResources pool that
    applies to the event resource are removed.
    """
    allowed: dict[tuple[str, int], set[str]] = {}
    if reduce:
        for c in instance.constraints:
            b = c.body
            if not (c.required and isinstance(b, m.PreferResources)):
                continue
            pool = set(instance.select_resources(b.resources, b.resource_groups))
            for eid in instance.select_events(b.events, b.event_groups):
                e = instance.event_by_id[eid]
                for i, er in enumerate(e.resources):
                    if er.preassigned is None and (b.role is None or er.role == b.role):
                        key = (eid, i)
                        allowed[key] = allowed[key] & pool if key in allowed else set(pool)
    out = {}
    for e in instance.events:
        for i, er in enumerate(e.resources):
            if er.preassigned is not None:
                continue
            cands = instance.candidates(e, i)
            if (e.id, i) in allowed:
                cands = [r for r in cands if r in allowed[(e.id, i)]]
            out[(e.id, i)] = cands
    return out


class _Builder:
    def __init__(self, instance: m.Instance, opts: BuildOptions):
        self.inst = instance
        self.opts = opts
        self.md = IlpModel()
        self.T = len(instance.times)
        self.t_ids = [t.id for t in instance.times]
        self.r_index = {r.id: i for i, r in enumerate(instance.resources)}
        self.e_index = {e.id: i for i, e in enumerate(instance.events)}
        self.eg_index = {g.id: i for i, g in enumerate(instance.event_groups)}
        self.tg_index = {g.id: i for i, g in enumerate(instance.time_groups)}
        self.pool = subevent_pool(instance, opts.reduce)
        self.subs: dict[str, list[PoolSub]] = {e.id: [] for e in instance.events}
        for se in self.pool:
            self.subs[se.event].append(se)
        self.cands = choice_pools(instance, opts.reduce)
        self._occupancy: dict[tuple[str, int], Lin] = {}
        self._q: dict[tuple[str, int], Lin] = {}
        self._p: dict[tuple[str, str], Lin] = {}
        self._o: dict[tuple[str, int], Lin] = {}
        self._l: dict[tuple[str, int], Lin] = {}
        self._c: dict[tuple[str, str], Lin] = {}
        self._h: dict[tuple[str, str], str] = {}
        self._idle: dict[tuple[str, str], Lin] = {}
        self._charges: list[tuple[m.Constraint, Lin, int]] = []
        # first/last variables must be exact for every event whose pair has an
        # upper separation limit, since a bound alone can hide that deviation
        self._h_exact: set[str] = set()
        for c in instance.constraints:
            if isinstance(c.body, m.OrderEvents) and (opts.tighten or c.body.max_separation is not None):
                for pair in c.body.pairs:
                    self._h_exact.update(pair)

    # --- naming helpers ---------------------------------------------------------

    def y(self, se: PoolSub, t) -> str:
        return f"y.{se.index}.{t}"

    def x(self, se: PoolSub, t, i: int, r) -> str:
        return f"x.{se.index}.{t}.{i}.{r}"

    def w(self, se: PoolSub, i: int, r: str) -> str:
        return f"w.{se.index}.{i}.{self.r_index[r]}"

    def u(self, se: PoolSub) -> str:
        return f"u.{se.index}"

    def b(self, e: str, r: str) -> str:
        return f"b.{self.e_index[e]}.{self.r_index[r]}"

    def feasible(self, se: PoolSub, t: int) -> bool:
        return t + se.duration <= self.T

    def starts_covering(self, se: PoolSub, t: int) -> range:
        return range(max(0, t - se.duration + 1), min(t, self.T - se.duration) + 1)

    # --- max/min definitions ------------------------------------------------------

    def define_extreme(self, target: str, sources: list[Lin], kind: str, exact: bool, block: str) -> None:
        """Constrain ``target`` to bound (or, if ``exact``, equal) the max/min of ``sources``.

        For ``max``, fractional sources are rounded up: the target is integral
        and exactness is enforced with a ``d - 1`` slack on scaled rows.
        """
        md = self.md
        sign = 1 if kind == "max" else -1
        for src in sources:
            # max: target >= src ; min: target <= src
            md.add_row(sign * (Lin.var(target) - src), ">=", block)
        if not exact:
            return
        if len(sources) == 1:
            md.add_row(sign * (Lin.var(target) - sources[0]), "<=", block, slack=kind == "max")
            return
        tv = md.vars[target]
        sels = []
        for i, src in enumerate(sources):
            lo, hi = md.bounds(src)
            big = math.ceil(tv.ub - lo) if kind == "max" else math.ceil(hi - tv.lb)
            if big < 0:
                continue
            sel = md.add_var(f"z.{target}.{i}", 0, 1, ("sel", target, i))
            sels.append(sel)
            # max: target <= src + big (1 - sel) ; min: target >= src - big (1 - sel)
            expr = sign * (Lin.var(target) - src)
            expr.add(Lin.var(sel, big)).add(-big)
            md.add_row(expr, "<=", block + "_sel", slack=kind == "max")
        if not sels:
            raise ModelError(f"no feasible selector for {target}")
        md.add_row(Lin.total(sels) - 1, "=", block + "_sel")

    def new_extreme(self, name: str, meaning: tuple, sources: list[Lin], kind: str,
                    exact: bool, block: str) -> Lin:
        bnds = [self.md.bounds(s) for s in sources]
        if kind == "max":
            lo = math.ceil(max(b[0] for b in bnds))
            hi = math.ceil(max(b[1] for b in bnds))
        else:
            lo = math.floor(min(b[0] for b in bnds))
            hi = math.floor(min(b[1] for b in bnds))
        self.md.add_var(name, lo, hi, meaning)
        self.define_extreme(name, sources, kind, exact, block)
        return Lin.var(name)

    def deviation(self, name: str, meaning: tuple, sources: list[Lin], block: str) -> Lin:
        """``name = max(0, sources...)`` (bound only, unless tightening)."""
        live = [src for src in sources if self.md.bounds(src)[1] > 0]
        if len(live) == 1 and self.md.bounds(live[0])[0] >= 0:
            return self.new_extreme(name, meaning, live, "max", self.opts.tighten, block)
        return self.new_extreme(name, meaning, [Lin()] + live, "max", self.opts.tighten, block)

    def deviation_eq(self, name: str, meaning: tuple, expr: Lin, block: str) -> Lin:
        """Deviation defined by an equality whose right side is never negative."""
        lo, hi = self.md.bounds(expr)
        self.md.add_var(name, 0, max(0, hi), meaning)
        self.md.add_row(Lin.var(name) - expr, "=", block)
        return Lin.var(name)

    def u_device(self, value: Lin, lower: Optional[int], upper: Optional[int]) -> list[Lin]:
        out = []
        if upper is not None:
            out.append(value - upper)
        if lower is not None:
            out.append(lower - value)
        return out

    # --- general structure ------------------------------------------------------------

    def general(self) -> None:
        md, inst = self.md, self.inst
        for e in inst.events:
            free = [i for i, er in enumerate(e.resources) if er.preassigned is None]
            for se in self.subs[e.id]:
                md.add_var(self.u(se), 0, 1, ("u", se.event, se.duration, se.copy))
                ys = []
                for t in list(range(self.T)) + [DUMMY]:
                    md.add_var(self.y(se, t), 0, 1, ("y", se.event, se.duration, se.copy,
                                                      self.t_ids[t] if t != DUMMY else None))
                    ys.append(self.y(se, t))
                md.add_row(Lin.total(ys) - 1, "=", "start")
                for t in range(self.T):
                    if not self.feasible(se, t):
                        md.add_row(Lin.var(self.y(se, t)), "=", "start_feasible")
                real_y = [self.y(se, t) for t in range(self.T) if self.feasible(se, t)]
                md.add_row(Lin.total(real_y) - Lin.var(self.u(se)), "<=", "active_time")
                times = [t for t in range(self.T) if self.feasible(se, t)] + [DUMMY]
                per_t: dict = {t: Lin() for t in times}
                for i in free:
                    er_x = []
                    ws = []
                    for r in self.cands[(e.id, i)] + [None]:
                        rk = self.r_index[r] if r is not None else DUMMY
                        xs = []
                        for t in times:
                            name = md.add_var(self.x(se, t, i, rk), 0, 1,
                                              ("x", se.event, se.duration, se.copy,
                                               self.t_ids[t] if t != DUMMY else None, e.resource_key(i), r))
                            xs.append(name)
                            per_t[t].add(Lin.var(name))
                            if r is not None and t != DUMMY:
                                self._occ(r, se, t).add(Lin.var(name))
                        er_x.extend(xs)
                        if r is not None:
                            wn = md.add_var(self.w(se, i, r), 0, 1,
                                            ("w", se.event, se.duration, se.copy, e.resource_key(i), r))
                            md.add_row(Lin.var(wn) - Lin.total(xs), "=", "w_link")
                            ws.append(wn)
                    md.add_row(Lin.total(er_x) - 1, "=", "assign_one")
                    md.add_row(Lin.total(ws) - Lin.var(self.u(se)), "<=", "active_res")
                if free:
                    for t in times:
                        md.add_row(per_t[t] - Lin.var(self.y(se, t), len(free)), "=", "assign_link")
                for i, er in enumerate(e.resources):
                    if er.preassigned is not None:
                        for t in range(self.T):
                            if self.feasible(se, t):
                                self._occ(er.preassigned, se, t).add(Lin.var(self.y(se, t)))
            md.add_row(Lin({self.u(se): se.duration for se in self.subs[e.id]}) - e.duration,
                       "=", "duration")
            if e.time is not None:
                full = [se for se in self.subs[e.id] if se.duration == e.duration]
                if not full:
                    raise ModelError(f"event {e.id}: no full-duration subevent for its preassigned time")
                md.add_row(Lin.var(self.y(full[0], inst.time_index[e.time])) - 1, "=", "preassigned_time")
        self.attendance()
        self.busy()

    def _occ(self, r: str, se: PoolSub, start: int) -> Lin:
        """Accumulator for the start-at-``start`` contribution; expanded in busy()."""
        key = (r, se.index, start)
        return self._occupancy.setdefault(key, Lin())

    def attendance(self) -> None:
        md = self.md
        for e in self.inst.events:
            fixed = {er.preassigned for er in e.resources if er.preassigned is not None}
            rs: dict[str, list[str]] = {}
            for i, er in enumerate(e.resources):
                if er.preassigned is None:
                    for r in self.cands[(e.id, i)]:
                        rs.setdefault(r, []).extend(self.w(se, i, r) for se in self.subs[e.id])
            for r in sorted(fixed | set(rs), key=self.r_index.__getitem__):
                name = self.b(e.id, r)
                if r in fixed:
                    md.add_var(name, 1, 1, ("b", e.id, r))
                    continue
                md.add_var(name, 0, 1, ("b", e.id, r))
                for wn in rs[r]:
                    md.add_row(Lin.var(wn) - Lin.var(name), "<=", "b_link")
                md.add_row(Lin.var(name) - Lin.total(rs[r]), "<=", "b_link")

    def busy(self) -> None:
        md = self.md
        usage: dict[tuple[str, int], Lin] = {}
        for (r, se_index, start), expr in self._occupancy.items():
            se = self.pool[se_index]
            for t in range(start, start + se.duration):
                usage.setdefault((r, t), Lin()).add(expr)
        for r in self.inst.resources:
            ri = self.r_index[r.id]
            for t in range(self.T):
                expr = usage.get((r.id, t))
                if expr is None:
                    continue
                lo, hi = md.bounds(expr)
                v = md.add_var(f"v.{t}.{ri}", 0, hi, ("v", self.t_ids[t], r.id))
                md.add_row(Lin.var(v) - expr, "=", "v_link")
                q = md.add_var(f"q.{ri}.{t}", 0, 1, ("q", r.id, self.t_ids[t]))
                md.add_row(Lin.var(v) - Lin.var(q, max(1, hi)), "<=", "busy")
                md.add_row(Lin.var(q) - Lin.var(v), "<=", "busy")
                self._q[(r.id, t)] = Lin.var(q)

    def q(self, r: str, t: int) -> Lin:
        return self._q.get((r, t), Lin())

    def p(self, r: str, tg: str) -> Lin:
        key = (r, tg)
        if key not in self._p:
            qs = [self.q(r, t) for t in self.inst.time_group_members.get(tg, ())]
            qs = [q for q in qs if q.terms]
            if not qs:
                self._p[key] = Lin()
            else:
                name = self.md.add_var(f"p.{self.r_index[r]}.{self.tg_index[tg]}", 0, 1, ("p", r, tg))
                for q in qs:
                    self.md.add_row(q - Lin.var(name), "<=", "busy_group")
                total = Lin()
                for q in qs:
                    total.add(q)
                self.md.add_row(Lin.var(name) - total, "<=", "busy_group")
                self._p[key] = Lin.var(name)
        return self._p[key]

    def c(self, eg: str, r: str) -> Lin:
        key = (eg, r)
        if key not in self._c:
            bs = [self.b(e, r) for e in self.inst.event_group_members.get(eg, ())
                  if self.b(e, r) in self.md.vars]
            if not bs:
                self._c[key] = Lin()
            elif any(self.md.vars[b].lb == 1 for b in bs):
                self._c[key] = Lin(const=1)
            else:
                name = self.md.add_var(f"c.{self.eg_index[eg]}.{self.r_index[r]}", 0, 1, ("c", eg, r))
                for b in bs:
                    self.md.add_row(Lin.var(b) - Lin.var(name), "<=", "c_link")
                self.md.add_row(Lin.var(name) - Lin.total(bs), "<=", "c_link")
                self._c[key] = Lin.var(name)
        return self._c[key]

    def o(self, e: str, t: int) -> Lin:
        key = (e, t)
        if key not in self._o:
            per_se = []
            for se in self.subs[e]:
                ys = [self.y(se, s) for s in self.starts_covering(se, t)]
                if ys:
                    per_se.append(Lin.total(ys))
            if not per_se:
                self._o[key] = Lin()
            else:
                name = self.md.add_var(f"o.{self.e_index[e]}.{t}", 0, 1, ("o", e, self.t_ids[t]))
                total = Lin()
                for expr in per_se:
                    self.md.add_row(expr - Lin.var(name), "<=", "occupied")
                    total.add(expr)
                self.md.add_row(Lin.var(name) - total, "<=", "occupied")
                self._o[key] = Lin.var(name)
        return self._o[key]

    def l(self, eg: str, t: int) -> Lin:
        key = (eg, t)
        if key not in self._l:
            os_ = [self.o(e, t) for e in self.inst.event_group_members.get(eg, ())]
            os_ = [o for o in os_ if o.terms]
            if not os_:
                self._l[key] = Lin()
            else:
                name = self.md.add_var(f"l.{self.eg_index[eg]}.{t}", 0, 1, ("l", eg, self.t_ids[t]))
                total = Lin()
                for o in os_:
                    self.md.add_row(o - Lin.var(name), "<=", "link_group")
                    total.add(o)
                if self.opts.tighten:
                    self.md.add_row(Lin.var(name) - total, "<=", "link_group")
                self._l[key] = Lin.var(name)
        return self._l[key]

    def h(self, e: str, which: str) -> Lin:
        """First start index (``first``) or last exclusive end (``last``) of ``e``."""
        key = (e, which)
        ei = self.e_index[e]
        if key in self._h:
            return Lin.var(self._h[key])
        exact = e in self._h_exact
        name = f"h_{which}.{ei}"
        sources = []
        for se in self.subs[e]:
            for t in range(self.T):
                if not self.feasible(se, t):
                    continue
                yv = self.y(se, t)
                if which == "last":
                    sources.append(Lin.var(yv, t + se.duration))
                else:
                    sources.append(Lin.var(yv, t - self.T) + self.T)
        meaning = (f"h_{which}", e, "exact" if exact else "bound")
        if which == "last":
            self.new_extreme(name, meaning, [Lin()] + sources, "max", exact, "order_h")
        else:
            self.new_extreme(name, meaning, [Lin(const=self.T)] + sources, "min", exact, "order_h")
        self._h[key] = name
        return Lin.var(name)

    def idle(self, r: str, tg: str) -> Lin:
        key = (r, tg)
        if key in self._idle:
            return self._idle[key]
        md = self.md
        members = list(self.inst.time_group_members.get(tg, ()))
        qs = [self.q(r, t) for t in members]
        ri, gi = self.r_index[r], self.tg_index[tg]
        slots = []
        for pos, t in enumerate(members):
            before, after = qs[:pos], qs[pos + 1:]
            if not any(q.terms for q in before) or not any(q.terms for q in after):
                continue  # never idle: nothing can be busy on one side
            flags = []
            for side, group in (("before", before), ("after", after)):
                name = md.add_var(f"h_{side}.{ri}.{gi}.{t}", 0, 1, (f"h_{side}", r, tg, self.t_ids[t]))
                total = Lin()
                for q in group:
                    if q.terms:
                        md.add_row(q - Lin.var(name), "<=", "idle")
                        total.add(q)
                md.add_row(Lin.var(name) - total, "<=", "idle")
                flags.append(Lin.var(name))
            slot = md.add_var(f"h_timeslot.{ri}.{gi}.{t}", 0, 1, ("h_timeslot", r, tg, self.t_ids[t]))
            s = Lin.var(slot)
            md.add_row(flags[0] - qs[pos] + flags[1] - 1 - s, "<=", "idle")
            md.add_row(s + qs[pos] - 1, "<=", "idle")
            md.add_row(s - flags[0], "<=", "idle")
            md.add_row(s - flags[1], "<=", "idle")
            slots.append(slot)
        if slots:
            name = md.add_var(f"h_timegroup.{ri}.{gi}", 0, len(slots), ("h_timegroup", r, tg))
            md.add_row(Lin.var(name) - Lin.total(slots), "=", "idle")
            self._idle[key] = Lin.var(name)
        else:
            self._idle[key] = Lin()
        return self._idle[key]

    # --- constraint blocks -------------------------------------------------------------

    def constraint(self, ci: int, c: m.Constraint) -> None:
        handler = getattr(self, "_c_" + type(c.body).__name__)
        points: list[tuple[str, list[Lin]]] = handler(ci, c)
        self._charge(ci, c, [p for p, _ in points], [vals for _, vals in points])

    def s(self, ci: int, pi: int, di, c: m.Constraint, point: str) -> tuple[str, tuple]:
        return f"s.{ci}.{pi}.{di}", ("s", c.id, point, di)

    def _events(self, b) -> list[str]:
        return self.inst.select_events(b.events, b.event_groups)

    def _resources(self, b) -> list[str]:
        return self.inst.select_resources(b.resources, b.resource_groups)

    def _c_AssignResource(self, ci, c):
        out = []
        for eid in self._events(c.body):
            e = self.inst.event_by_id[eid]
            for i, er in enumerate(e.resources):
                if c.body.role is not None and er.role != c.body.role:
                    continue
                point = f"{c.id}/{eid}/{e.resource_key(i)}"
                pi = len(out)
                name, meaning = self.s(ci, pi, 0, c, point)
                if er.preassigned is not None:
                    self.md.add_var(name, 0, 0, meaning)
                    out.append((point, [Lin.var(name)]))
                    continue
                expr = Lin(const=e.duration)
                for se in self.subs[eid]:
                    for r in self.cands[(eid, i)]:
                        expr.add(Lin.var(self.w(se, i, r), -se.duration))
                out.append((point, [self.deviation_eq(name, meaning, expr, "assign_resource")]))
        return out

    def _c_AssignTime(self, ci, c):
        out = []
        for eid in self._events(c.body):
            e = self.inst.event_by_id[eid]
            expr = Lin(const=e.duration)
            for se in self.subs[eid]:
                for t in range(self.T):
                    if self.feasible(se, t):
                        expr.add(Lin.var(self.y(se, t), -se.duration))
            point = f"{c.id}/{eid}"
            name, meaning = self.s(ci, len(out), 0, c, point)
            out.append((point, [self.deviation_eq(name, meaning, expr, "assign_time")]))
        return out

    def _c_SplitEvents(self, ci, c):
        b = c.body
        out = []
        for eid in self._events(b):
            point = f"{c.id}/{eid}"
            pi = len(out)
            count = Lin.total(self.u(se) for se in self.subs[eid])
            amount = self.deviation(f"s.{ci}.{pi}.amount", ("s", c.id, point, "amount"),
                                    self.u_device(count, b.min_amount, b.max_amount), "split_amount")
            bad = [self.u(se) for se in self.subs[eid]
                   if (b.min_duration is not None and se.duration < b.min_duration)
                   or (b.max_duration is not None and se.duration > b.max_duration)]
            dur = self.deviation_eq(f"s.{ci}.{pi}.dur", ("s", c.id, point, "dur"), Lin.total(bad), "split_duration")
            out.append((point, [amount + dur]))
        return out

    def _c_DistributeSplitEvents(self, ci, c):
        b = c.body
        out = []
        for eid in self._events(b):
            point = f"{c.id}/{eid}"
            count = Lin.total(self.u(se) for se in self.subs[eid] if se.duration == b.duration)
            name, meaning = self.s(ci, len(out), 0, c, point)
            out.append((point, [self.deviation(name, meaning, self.u_device(count, b.minimum, b.maximum),
                                               "distribute_split")]))
        return out

    def _c_PreferResources(self, ci, c):
        b = c.body
        allowed = set(self._resources(b))
        out = []
        for eid in self._events(b):
            e = self.inst.event_by_id[eid]
            for i, er in enumerate(e.resources):
                if er.preassigned is not None or (b.role is not None and er.role != b.role):
                    continue
                point = f"{c.id}/{eid}/{e.resource_key(i)}"
                expr = Lin()
                for se in self.subs[eid]:
                    for r in self.cands[(eid, i)]:
                        if r not in allowed:
                            expr.add(Lin.var(self.w(se, i, r), se.duration))
                name, meaning = self.s(ci, len(out), 0, c, point)
                out.append((point, [self.deviation_eq(name, meaning, expr, "prefer_resources")]))
        return out

    def _c_PreferTimes(self, ci, c):
        b = c.body
        allowed = set(self.inst.select_times(b.times, b.time_groups))
        out = []
        for eid in self._events(b):
            expr = Lin()
            for se in self.subs[eid]:
                if b.duration is not None and se.duration != b.duration:
                    continue
                for t in range(self.T):
                    if t not in allowed and self.feasible(se, t):
                        expr.add(Lin.var(self.y(se, t), se.duration))
            point = f"{c.id}/{eid}"
            name, meaning = self.s(ci, len(out), 0, c, point)
            out.append((point, [self.deviation_eq(name, meaning, expr, "prefer_times")]))
        return out

    def _c_AvoidSplitAssignments(self, ci, c):
        b = c.body
        out = []
        for pi, eg in enumerate(b.event_groups):
            point = f"{c.id}/{eg}"
            ws: dict[str, list[str]] = {}
            for eid in self.inst.event_group_members.get(eg, ()):
                e = self.inst.event_by_id[eid]
                for i, er in enumerate(e.resources):
                    if er.preassigned is not None or (b.role is not None and er.role != b.role):
                        continue
                    for r in self.cands[(eid, i)]:
                        ws.setdefault(r, []).extend(self.w(se, i, r) for se in self.subs[eid])
            ks = []
            for r in sorted(ws, key=self.r_index.__getitem__):
                k = self.md.add_var(f"k.{ci}.{pi}.{self.r_index[r]}", 0, 1, ("k", c.id, eg, r))
                for wn in ws[r]:
                    self.md.add_row(Lin.var(wn) - Lin.var(k), "<=", "avoid_split_k")
                if self.opts.tighten:
                    self.md.add_row(Lin.var(k) - Lin.total(ws[r]), "<=", "avoid_split_k")
                ks.append(k)
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, [Lin.total(ks) - 1], "avoid_split")]))
        return out

    def _c_SpreadEvents(self, ci, c):
        b = c.body
        out = []
        for pi, eg in enumerate(b.event_groups):
            point = f"{c.id}/{eg}"
            members = self.inst.event_group_members.get(eg, ())
            vals = []
            for di, stg in enumerate(b.time_groups):
                times = self.inst.time_group_members.get(stg.time_group, ())
                count = Lin.total(self.y(se, t) for eid in members for se in self.subs[eid]
                                  for t in times if self.feasible(se, t))
                name, meaning = self.s(ci, pi, di, c, point)
                vals.append(self.deviation(name, meaning, self.u_device(count, stg.minimum, stg.maximum),
                                           "spread"))
            out.append((point, vals))
        return out

    def _c_LinkEvents(self, ci, c):
        out = []
        for pi, eg in enumerate(c.body.event_groups):
            point = f"{c.id}/{eg}"
            members = self.inst.event_group_members.get(eg, ())
            vals = []
            for t in range(self.T):
                l = self.l(eg, t)
                name, meaning = self.s(ci, pi, t, c, point)
                vals.append(self.deviation(name, meaning, [l - self.o(e, t) for e in members], "link"))
            out.append((point, vals))
        return out

    def _c_OrderEvents(self, ci, c):
        b = c.body
        out = []
        for pi, (e1, e2) in enumerate(b.pairs):
            point = f"{c.id}/{e1}/{e2}"
            sep = self.h(e2, "first") - self.h(e1, "last")
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning,
                                               self.u_device(sep, b.min_separation, b.max_separation), "order")]))
        return out

    def _c_AvoidClashes(self, ci, c):
        out = []
        for pi, r in enumerate(self._resources(c.body)):
            point = f"{c.id}/{r}"
            ri = self.r_index[r]
            vals = []
            for t in range(self.T):
                v = f"v.{t}.{ri}"
                src = [Lin.var(v) - 1] if v in self.md.vars else []
                name, meaning = self.s(ci, pi, t, c, point)
                vals.append(self.deviation(name, meaning, src, "avoid_clashes"))
            out.append((point, vals))
        return out

    def _c_AvoidUnavailableTimes(self, ci, c):
        b = c.body
        times = self.inst.select_times(b.times, b.time_groups)
        out = []
        for pi, r in enumerate(self._resources(b)):
            point = f"{c.id}/{r}"
            expr = Lin()
            for t in times:
                expr.add(self.q(r, t))
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation_eq(name, meaning, expr, "unavailable")]))
        return out

    def _c_LimitIdleTimes(self, ci, c):
        b = c.body
        out = []
        for pi, r in enumerate(self._resources(b)):
            point = f"{c.id}/{r}"
            total = Lin()
            for tg in b.time_groups:
                total.add(self.idle(r, tg))
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, self.u_device(total, b.minimum, b.maximum),
                                               "idle_dev")]))
        return out

    def _c_ClusterBusyTimes(self, ci, c):
        b = c.body
        out = []
        for pi, r in enumerate(self._resources(b)):
            point = f"{c.id}/{r}"
            total = Lin()
            for tg in b.time_groups:
                total.add(self.p(r, tg))
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, self.u_device(total, b.minimum, b.maximum),
                                               "cluster_busy")]))
        return out

    def _c_LimitBusyTimes(self, ci, c):
        b = c.body
        out = []
        for pi, r in enumerate(self._resources(b)):
            point = f"{c.id}/{r}"
            vals = []
            for di, tg in enumerate(b.time_groups):
                members = self.inst.time_group_members.get(tg, ())
                busy = Lin()
                for t in members:
                    busy.add(self.q(r, t))
                p = self.p(r, tg)
                big = max(len(members), b.minimum or 0)
                guard = Lin(const=-big).add(p, big)          # -M (1 - p)
                srcs = [s + guard for s in self.u_device(busy, b.minimum, b.maximum)]
                name, meaning = self.s(ci, pi, di, c, point)
                vals.append(self.deviation(name, meaning, srcs, "limit_busy"))
            out.append((point, vals))
        return out

    def _c_LimitWorkload(self, ci, c):
        b = c.body
        points = self._resources(b)
        loads = {r: Lin() for r in points}
        for e in self.inst.events:
            for i, er in enumerate(e.resources):
                L = e.workload_of(i)
                if er.preassigned is not None:
                    if er.preassigned not in loads:
                        continue
                    for se in self.subs[e.id]:
                        frac = Fraction(se.duration * L, e.duration)
                        for t in range(self.T):
                            if self.feasible(se, t):
                                loads[er.preassigned].add(Lin.var(self.y(se, t), frac))
                    continue
                for r in self.cands[(e.id, i)]:
                    if r not in loads:
                        continue
                    ri = self.r_index[r]
                    for se in self.subs[e.id]:
                        frac = Fraction(se.duration * L, e.duration)
                        for t in range(self.T):
                            if self.feasible(se, t):
                                loads[r].add(Lin.var(self.x(se, t, i, ri), frac))
        out = []
        for pi, r in enumerate(points):
            point = f"{c.id}/{r}"
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, self.u_device(loads[r], b.minimum, b.maximum),
                                               "workload")]))
        return out

    def _c_StudentChoice(self, ci, c):
        b = c.body
        out = []
        for pi, r in enumerate(self._resources(b)):
            point = f"{c.id}/{r}"
            total = Lin()
            for eg in b.event_groups:
                total.add(self.c(eg, r))
            name, meaning = self.s(ci, pi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, self.u_device(total, b.minimum, b.maximum),
                                               "student_choice")]))
        return out

    def _c_BalanceClassSize(self, ci, c):
        b = c.body
        sizes = []
        for gi, eg in enumerate(b.event_groups):
            rs: set[str] = set()
            for eid in self.inst.event_group_members.get(eg, ()):
                e = self.inst.event_by_id[eid]
                for i, er in enumerate(e.resources):
                    rs.update(self.inst.candidates(e, i) if er.preassigned is not None else self.cands[(eid, i)])
            if b.counted_type is not None:
                rs = {r for r in rs if self.inst.resource_by_id[r].resource_type == b.counted_type}
            total = Lin()
            for r in sorted(rs, key=self.r_index.__getitem__):
                total.add(self.c(eg, r))
            lo, hi = self.md.bounds(total)
            mr = self.md.add_var(f"mr.{ci}.{gi}", lo, hi, ("mr", c.id, eg))
            self.md.add_row(Lin.var(mr) - total, "=", "balance_size")
            sizes.append(Lin.var(mr))
        out = []
        for gi, eg in enumerate(b.event_groups):
            point = f"{c.id}/{eg}"
            srcs = []
            for gj in range(len(sizes)):
                if gj != gi:
                    srcs.append(sizes[gi] - sizes[gj] - b.maximum_difference)
                    srcs.append(sizes[gj] - sizes[gi] - b.maximum_difference)
            name, meaning = self.s(ci, gi, 0, c, point)
            out.append((point, [self.deviation(name, meaning, srcs, "balance")]))
        return out

    # --- cost functions and objective -------------------------------------------------

    def _charge(self, ci: int, c: m.Constraint, points: list[str], values: list[list[Lin]]) -> None:
        md = self.md
        if c.required and self.opts.hard_mode == "pin":
            for vals in values:
                for v in vals:
                    for n in v.terms:
                        md.vars[n].ub = 0
        cf = c.cost_function
        obj = Lin()
        worst = 0
        for pi, vals in enumerate(values):
            if cf is m.CostFunction.SUM:
                for v in vals:
                    obj.add(v, c.weight)
                    worst += c.weight * md.bounds(v)[1]
            elif cf is m.CostFunction.SUM_SQUARE:
                for di, v in enumerate(vals):
                    hi = int(md.bounds(v)[1])
                    worst += c.weight * hi * hi
                    if hi <= 0:
                        continue
                    inds = [md.add_var(f"si.{ci}.{pi}.{di}.{i}", 0, 1, ("s_indexed", c.id, points[pi], di, i))
                            for i in range(hi + 1)]
                    md.add_row(Lin({n: i for i, n in enumerate(inds)}) - v, "=", "cost_index")
                    md.add_row(Lin.total(inds) - 1, "=", "cost_index")
                    obj.add(Lin({n: c.weight * i * i for i, n in enumerate(inds)}))
            elif cf is m.CostFunction.SQUARE_SUM:
                total = Lin()
                for v in vals:
                    total.add(v)
                hi = int(md.bounds(total)[1])
                worst += c.weight * hi * hi
                if hi <= 0:
                    continue
                inds = [md.add_var(f"uq.{ci}.{pi}.{j}", 0, 1, ("u_squaresum", c.id, points[pi], j))
                        for j in range(hi + 1)]
                md.add_row(Lin({n: j for j, n in enumerate(inds)}) - total, "=", "cost_squaresum")
                md.add_row(Lin.total(inds) - 1, "=", "cost_squaresum")
                obj.add(Lin({n: c.weight * j * j for j, n in enumerate(inds)}))
            else:
                raise ModelError(f"constraint {c.id}: unsupported cost function {cf}")
        self._charges.append((c, obj, worst))

    def objective(self) -> None:
        soft_worst = sum(w for c, _, w in self._charges if not c.required)
        H = self.opts.hard_weight if self.opts.hard_weight is not None else 1 + int(soft_worst)
        self.md.hard_weight = H
        for c, obj, _ in self._charges:
            self.md.add_objective(obj, H if c.required else 1)

    def build(self) -> IlpModel:
        self.general()
        for ci, c in enumerate(self.inst.constraints):
            self.constraint(ci, c)
        self.objective()
        self.md.meta = {
            "instance": self.inst.id,
            "options": self.opts.to_dict(),
            "times": self.T,
            "pool": [[se.event, se.duration, se.copy] for se in self.pool],
        }
        return self.md


def build_model(instance: m.Instance, options: Optional[BuildOptions] = None) -> IlpModel:
    """Build the integer program; raises ModelError on unsupported input."""
    options = options or BuildOptions()
    for c in instance.constraints:
        if not isinstance(c.cost_function, m.CostFunction):
            raise ModelError(f"constraint {c.id}: unsupported cost function {c.cost_function!r}")
    problems = m.resolve_references(instance).problems
    if problems:
        raise ModelError("; ".join(str(p) for p in problems))
    return _Builder(instance, options).build()
