"""Read solver output, verify it against the model, and turn it into a Solution."""

from __future__ import annotations

import xml.etree.ElementTree as ET
from typing import Mapping, Optional

from .. import model as m
from .builder import STRUCTURAL_BLOCKS
from .model import IlpModel
from .writers import column_aliases

TOL = 1e-6
_HEADER_WORDS = {"obj", "objective", "objective:", "status", "model", "solution", "value", "columns", "rows"}


class DecodeError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        shown = problems[:20]
        more = f" (+{len(problems) - 20} more)" if len(problems) > 20 else ""
        super().__init__("; ".join(shown) + more)


def read_values(text: str, model: IlpModel, mst: Optional[bool] = None) -> dict[str, float]:
    """Parse ``name value`` lines or CPLEX MST XML; MPS column aliases are accepted."""
    aliases = {a: n for n, a in column_aliases(model).items()}
    if mst is None:
        mst = text.lstrip().startswith("<")
    raw: list[tuple[str, str]] = []
    if mst:
        root = ET.fromstring(text)
        for var in root.iter("variable"):
            raw.append((var.get("name", ""), var.get("value", "0")))
    else:
        for line in text.splitlines():
            parts = line.split()
            if not parts or parts[0].startswith("#") or parts[0].lower() in _HEADER_WORDS:
                continue
            if len(parts) < 2:
                continue
            raw.append((parts[0], parts[1]))
    values: dict[str, float] = {}
    unknown = []
    for name, val in raw:
        name = aliases.get(name, name)
        if name not in model.vars:
            unknown.append(name)
            continue
        try:
            values[name] = float(val)
        except ValueError:
            unknown.append(f"{name} (bad value {val!r})")
    if unknown:
        raise DecodeError([f"unknown variable {n}" for n in unknown])
    return values


def _index(model: IlpModel):
    """Maps from (event, duration, copy) to the structural variables of that subevent."""
    subs: dict[tuple, dict] = {}
    for name, v in model.vars.items():
        kind = v.meaning[0]
        if kind not in ("u", "y", "x", "w"):
            continue
        key = tuple(v.meaning[1:4])
        slot = subs.setdefault(key, {"u": None, "y": {}, "x": {}, "w": {}})
        if kind == "u":
            slot["u"] = name
        elif kind == "y":
            slot["y"][v.meaning[4]] = name
        elif kind == "x":
            slot["x"][tuple(v.meaning[4:7])] = name
        else:
            slot["w"][tuple(v.meaning[4:6])] = name
    return subs


def decode_solution(model: IlpModel, values: Mapping[str, float], instance: m.Instance,
                    verify: str = "full") -> m.Solution:
    """Build the Solution encoded by ``values`` (missing variables read as 0).

    ``verify`` is "full" (every row), "structural" (assignment rows only) or "none".
    """
    if verify not in ("full", "structural", "none"):
        raise ValueError(f"unknown verify mode {verify!r}")
    if verify != "none":
        blocks = None if verify == "full" else set(STRUCTURAL_BLOCKS)
        problems = model.violations(values, TOL, blocks)
        if problems:
            raise DecodeError(problems)

    def on(name: Optional[str]) -> bool:
        return name is not None and values.get(name, 0) > 0.5

    events = []
    for (eid, dur, _copy), slot in _index(model).items():
        if not on(slot["u"]):
            continue
        time = next((t for t, n in slot["y"].items() if t is not None and on(n)), None)
        assigned = {role: r for (role, r), n in slot["w"].items() if on(n)}
        events.append(m.SolutionEvent(eid, dur, time, assigned))
    return m.canonical(instance, m.Solution(instance.id, tuple(events)))


class NotRepresentable(ValueError):
    pass


def encode_solution(model: IlpModel, instance: m.Instance, solution: m.Solution) -> dict[str, int]:
    """Structural variable values (u, y, x, w) that encode ``solution``."""
    subs = _index(model)
    by_event: dict[str, dict[int, list[tuple]]] = {}
    for key in subs:
        by_event.setdefault(key[0], {}).setdefault(key[1], []).append(key)
    for per_d in by_event.values():
        for keys in per_d.values():
            keys.sort(key=lambda k: k[2])
    values: dict[str, int] = {}
    used: set[tuple] = set()
    norm = m.normalize(instance, solution)
    for se in norm.events:
        event = instance.event_by_id[se.event]
        free = [event.resource_key(i) for i, er in enumerate(event.resources) if er.preassigned is None]
        keys = [k for k in by_event.get(se.event, {}).get(se.duration, []) if k not in used]
        if not keys:
            raise NotRepresentable(f"no pool subevent of duration {se.duration} left for {se.event}")
        key = keys[0]
        used.add(key)
        slot = subs[key]
        values[slot["u"]] = 1
        if se.time not in slot["y"]:
            raise NotRepresentable(f"{se.event}: start {se.time} not available")
        values[slot["y"][se.time]] = 1
        for role in free:
            r = se.assignments.get(role)
            xn = slot["x"].get((se.time, role, r))
            if xn is None:
                raise NotRepresentable(f"{se.event}: resource {r} for {role} not in the model")
            values[xn] = 1
            if r is not None:
                values[slot["w"][(role, r)]] = 1
    for key, slot in subs.items():
        if key in used:
            continue
        values[slot["y"][None]] = 1
        for (t, role, r), xn in slot["x"].items():
            if t is None and r is None:
                values[xn] = 1
    return values
