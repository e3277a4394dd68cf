"""Reading and writing extended XHSTT XML.

Only structure is preserved: whitespace, comments and element order inside a
section are normalised, so ``parse(serialize(x)) == x`` holds structurally and
serialising the same value twice gives identical bytes.
"""

from __future__ import annotations

import xml.etree.ElementTree as ET
from dataclasses import dataclass
from typing import Optional

from . import model as m


@dataclass(frozen=True)
class ParseDiagnostic:
    severity: str   # "error" or "warning"
    xml_path: str
    message: str

    def __str__(self) -> str:
        return f"{self.severity}: {self.xml_path}: {self.message}"


class XhsttError(Exception):
    def __init__(self, diagnostics: list[ParseDiagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


COST_FUNCTION_NAMES = {
    "Sum": m.CostFunction.SUM, "Linear": m.CostFunction.SUM,
    "SumSquare": m.CostFunction.SUM_SQUARE,
    "SquareSum": m.CostFunction.SQUARE_SUM, "Quadratic": m.CostFunction.SQUARE_SUM,
}
# Base-format spellings are written where they exist.
COST_FUNCTION_OUT = {
    m.CostFunction.SUM: "Linear",
    m.CostFunction.SUM_SQUARE: "SumSquare",
    m.CostFunction.SQUARE_SUM: "Quadratic",
}

# Field layout per constraint body: (field, place, xml tag, item tag)
#   place "applies" -> refs list under <AppliesTo>, "refs" -> refs list under the
#   constraint element, "int"/"text" -> scalar child, "ref" -> <Tag Reference=.../>
_EV = [("event_groups", "applies", "EventGroups", "EventGroup"), ("events", "applies", "Events", "Event")]
_RS = [("resource_groups", "applies", "ResourceGroups", "ResourceGroup"),
       ("resources", "applies", "Resources", "Resource")]
_EG = [("event_groups", "applies", "EventGroups", "EventGroup")]

LAYOUT: dict[type, list[tuple[str, str, str, Optional[str]]]] = {
    m.AssignResource: _EV + [("role", "text", "Role", None)],
    m.AssignTime: _EV,
    m.SplitEvents: _EV + [("min_duration", "int", "MinimumDuration", None),
                          ("max_duration", "int", "MaximumDuration", None),
                          ("min_amount", "int", "MinimumAmount", None),
                          ("max_amount", "int", "MaximumAmount", None)],
    m.DistributeSplitEvents: _EV + [("duration", "int", "Duration", None),
                                    ("minimum", "int", "Minimum", None),
                                    ("maximum", "int", "Maximum", None)],
    m.PreferResources: _EV + [("resource_groups", "refs", "ResourceGroups", "ResourceGroup"),
                              ("resources", "refs", "Resources", "Resource"),
                              ("role", "text", "Role", None)],
    m.PreferTimes: _EV + [("time_groups", "refs", "TimeGroups", "TimeGroup"),
                          ("times", "refs", "Times", "Time"),
                          ("duration", "int", "Duration", None)],
    m.AvoidSplitAssignments: _EG + [("role", "text", "Role", None)],
    m.SpreadEvents: _EG + [("time_groups", "spread", "TimeGroups", "TimeGroup")],
    m.LinkEvents: _EG,
    m.OrderEvents: [("pairs", "pairs", "EventPairs", "EventPair"),
                    ("min_separation", "int", "MinSeparation", None),
                    ("max_separation", "int", "MaxSeparation", None)],
    m.AvoidClashes: _RS,
    m.AvoidUnavailableTimes: _RS + [("time_groups", "refs", "TimeGroups", "TimeGroup"),
                                    ("times", "refs", "Times", "Time")],
    m.LimitIdleTimes: _RS + [("time_groups", "refs", "TimeGroups", "TimeGroup"),
                             ("minimum", "int", "Minimum", None), ("maximum", "int", "Maximum", None)],
    m.ClusterBusyTimes: _RS + [("time_groups", "refs", "TimeGroups", "TimeGroup"),
                               ("minimum", "int", "Minimum", None), ("maximum", "int", "Maximum", None)],
    m.LimitBusyTimes: _RS + [("time_groups", "refs", "TimeGroups", "TimeGroup"),
                             ("minimum", "int", "Minimum", None), ("maximum", "int", "Maximum", None)],
    m.LimitWorkload: _RS + [("minimum", "int", "Minimum", None), ("maximum", "int", "Maximum", None)],
    m.StudentChoice: _RS + [("event_groups", "refs", "EventGroups", "EventGroup"),
                            ("minimum", "int", "Minimum", None), ("maximum", "int", "Maximum", None)],
    m.BalanceClassSize: _EG + [("maximum_difference", "int", "MaximumDifference", None),
                               ("counted_type", "ref", "Type", None)],
}


# --- parsing -------------------------------------------------------------------


class _Reader:
    def __init__(self, strict: bool):
        self.strict = strict
        self.diagnostics: list[ParseDiagnostic] = []

    def error(self, path: str, message: str) -> None:
        self.diagnostics.append(ParseDiagnostic("error", path, message))

    def warn(self, path: str, message: str) -> None:
        self.diagnostics.append(ParseDiagnostic("warning", path, message))

    def text(self, el: ET.Element, tag: str, default: str = "") -> str:
        child = el.find(tag)
        if child is None or child.text is None:
            return default
        return child.text.strip()

    def integer(self, el: ET.Element, tag: str, path: str, default=None):
        child = el.find(tag)
        if child is None or child.text is None or not child.text.strip():
            return default
        try:
            return int(child.text.strip())
        except ValueError:
            self.error(f"{path}/{tag}", f"expected an integer, got {child.text.strip()!r}")
            return default

    def ref(self, el: Optional[ET.Element], path: str) -> Optional[str]:
        if el is None:
            return None
        ref = el.get("Reference")
        if ref is None:
            self.error(path, f"<{el.tag}> lacks a Reference attribute")
        return ref

    def refs(self, parent: Optional[ET.Element], item_tag: str, path: str) -> tuple[str, ...]:
        if parent is None:
            return ()
        out = []
        for child in parent.findall(item_tag):
            r = self.ref(child, f"{path}/{item_tag}")
            if r is not None:
                out.append(r)
        return tuple(out)

    def ident(self, el: ET.Element, path: str) -> str:
        ident = el.get("Id")
        if not ident:
            self.error(path, f"<{el.tag}> lacks an Id attribute")
            return ""
        return ident

    # --- sections ---

    def instance(self, el: ET.Element) -> m.Instance:
        iid = self.ident(el, "Instance")
        base = f"Instance[{iid}]"
        meta_el = el.find("MetaData")
        name = ""
        metadata: list[tuple[str, str]] = []
        if meta_el is not None:
            for child in meta_el:
                value = (child.text or "").strip()
                if child.tag == "Name":
                    name = value
                else:
                    metadata.append((child.tag, value))

        time_groups: list[m.TimeGroup] = []
        times: list[m.TimePoint] = []
        times_el = el.find("Times")
        if times_el is not None:
            tgs = times_el.find("TimeGroups")
            if tgs is not None:
                for g in tgs:
                    time_groups.append(m.TimeGroup(self.ident(g, f"{base}/Times/TimeGroups"),
                                                   self.text(g, "Name"), g.tag))
            for k, t in enumerate(times_el.findall("Time")):
                path = f"{base}/Times/Time[{k}]"
                groups = []
                for tag in ("Week", "Day"):
                    r = self.ref(t.find(tag), f"{path}/{tag}")
                    if r is not None:
                        groups.append(r)
                groups.extend(self.refs(t.find("TimeGroups"), "TimeGroup", f"{path}/TimeGroups"))
                times.append(m.TimePoint(self.ident(t, path), self.text(t, "Name"), k, tuple(groups)))

        resource_types: list[m.ResourceType] = []
        resource_groups: list[m.ResourceGroup] = []
        resources: list[m.Resource] = []
        res_el = el.find("Resources")
        if res_el is not None:
            rts = res_el.find("ResourceTypes")
            if rts is not None:
                for rt in rts.findall("ResourceType"):
                    resource_types.append(m.ResourceType(self.ident(rt, f"{base}/ResourceTypes"),
                                                         self.text(rt, "Name")))
            rgs = res_el.find("ResourceGroups")
            if rgs is not None:
                for rg in rgs.findall("ResourceGroup"):
                    path = f"{base}/ResourceGroups"
                    resource_groups.append(m.ResourceGroup(
                        self.ident(rg, path), self.text(rg, "Name"),
                        self.ref(rg.find("ResourceType"), f"{path}/ResourceType") or ""))
            for k, r in enumerate(res_el.findall("Resource")):
                path = f"{base}/Resources/Resource[{k}]"
                resources.append(m.Resource(
                    self.ident(r, path), self.text(r, "Name"),
                    self.ref(r.find("ResourceType"), f"{path}/ResourceType") or "",
                    self.refs(r.find("ResourceGroups"), "ResourceGroup", path)))

        event_groups: list[m.EventGroup] = []
        events: list[m.Event] = []
        ev_el = el.find("Events")
        if ev_el is not None:
            egs = ev_el.find("EventGroups")
            if egs is not None:
                for g in egs:
                    event_groups.append(m.EventGroup(self.ident(g, f"{base}/EventGroups"),
                                                     self.text(g, "Name"), g.tag))
            for k, e in enumerate(ev_el.findall("Event")):
                events.append(self.event(e, f"{base}/Events/Event[{k}]"))

        constraints: list[m.Constraint] = []
        cons_el = el.find("Constraints")
        if cons_el is not None:
            for k, c in enumerate(cons_el):
                parsed = self.constraint(c, f"{base}/Constraints/{c.tag}[{k}]")
                if parsed is not None:
                    constraints.append(parsed)

        try:
            return m.Instance(iid, name, tuple(metadata), tuple(times), tuple(time_groups),
                              tuple(resource_types), tuple(resource_groups), tuple(resources),
                              tuple(event_groups), tuple(events), tuple(constraints))
        except ValueError as exc:
            self.error(base, str(exc))
            return m.Instance()

    def event(self, e: ET.Element, path: str) -> m.Event:
        duration = self.integer(e, "Duration", path, 1)
        groups = []
        course = self.ref(e.find("Course"), f"{path}/Course")
        if course is not None:
            groups.append(course)
        groups.extend(self.refs(e.find("EventGroups"), "EventGroup", f"{path}/EventGroups"))
        ers = []
        rs = e.find("Resources")
        if rs is not None:
            for j, r in enumerate(rs.findall("Resource")):
                rpath = f"{path}/Resources/Resource[{j}]"
                role = r.find("Role")
                ers.append(m.EventResource(
                    role=role.text.strip() if role is not None and role.text else None,
                    resource_type=self.ref(r.find("ResourceType"), f"{rpath}/ResourceType"),
                    preassigned=r.get("Reference"),
                    workload=self.integer(r, "Workload", rpath)))
        if e.find("ResourceGroups") is not None:
            self.warn(f"{path}/ResourceGroups", "event resource groups are not supported and were ignored")
        try:
            return m.Event(self.ident(e, path), self.text(e, "Name"), duration,
                           self.ref(e.find("Time"), f"{path}/Time"), tuple(ers), tuple(groups),
                           self.integer(e, "Workload", path))
        except ValueError as exc:
            self.error(path, str(exc))
            return m.Event(e.get("Id", ""))

    def constraint(self, c: ET.Element, path: str) -> Optional[m.Constraint]:
        cls = m.BODY_BY_TAG.get(c.tag)
        if cls is None:
            if self.strict:
                self.error(path, f"unknown constraint element <{c.tag}>")
            else:
                self.warn(path, f"unknown constraint element <{c.tag}> skipped")
            return None
        cid = self.ident(c, path)
        cf_text = self.text(c, "CostFunction", "Linear")
        cost_function = COST_FUNCTION_NAMES.get(cf_text)
        if cost_function is None:
            self.error(f"{path}/CostFunction", f"unsupported cost function {cf_text!r} in constraint {cid!r}")
            return None
        required = self.text(c, "Required", "true").lower() == "true"
        weight = self.integer(c, "Weight", path, 1)
        applies = c.find("AppliesTo")
        values: dict[str, object] = {}
        for fname, place, tag, item in LAYOUT[cls]:
            if place == "applies":
                values[fname] = self.refs(applies.find(tag) if applies is not None else None,
                                          item, f"{path}/AppliesTo/{tag}")
            elif place == "refs":
                values[fname] = self.refs(c.find(tag), item, f"{path}/{tag}")
            elif place == "int":
                v = self.integer(c, tag, path)
                if v is not None:
                    values[fname] = v
            elif place == "text":
                child = c.find(tag)
                if child is not None and child.text:
                    values[fname] = child.text.strip()
            elif place == "ref":
                r = self.ref(c.find(tag), f"{path}/{tag}")
                if r is not None:
                    values[fname] = r
            elif place == "spread":
                spread = []
                tgs = c.find(tag)
                for g in (tgs.findall(item) if tgs is not None else ()):
                    gpath = f"{path}/{tag}/{item}"
                    spread.append(m.SpreadTimeGroup(self.ref(g, gpath) or "",
                                                    self.integer(g, "Minimum", gpath),
                                                    self.integer(g, "Maximum", gpath)))
                values[fname] = tuple(spread)
            elif place == "pairs":
                pairs = []
                container = applies.find(tag) if applies is not None else None
                for p in (container.findall(item) if container is not None else ()):
                    ppath = f"{path}/AppliesTo/{tag}/{item}"
                    pairs.append((self.ref(p.find("FirstEvent"), ppath) or "",
                                  self.ref(p.find("SecondEvent"), ppath) or ""))
                values[fname] = tuple(pairs)
        if cls is m.StudentChoice:
            values.setdefault("minimum", 0)
            values.setdefault("maximum", len(values["event_groups"]))
        try:
            return m.Constraint(cid, cls(**values), self.text(c, "Name"), required, weight, cost_function)
        except (ValueError, TypeError) as exc:
            self.error(path, str(exc))
            return None

    def solution(self, el: ET.Element, instance: m.Instance, path: str) -> m.Solution:
        ses = []
        evs = el.find("Events")
        for k, e in enumerate(evs.findall("Event") if evs is not None else ()):
            epath = f"{path}/Events/Event[{k}]"
            eid = self.ref(e, epath) or ""
            event = instance.event_by_id.get(eid)
            if event is None:
                self.error(epath, f"unknown event {eid!r}")
                continue
            duration = self.integer(e, "Duration", epath, event.duration)
            time = self.ref(e.find("Time"), f"{epath}/Time")
            if time is not None and time not in instance.time_index:
                self.error(f"{epath}/Time", f"unknown time {time!r}")
            assignments = {}
            rs = e.find("Resources")
            for j, r in enumerate(rs.findall("Resource") if rs is not None else ()):
                rpath = f"{epath}/Resources/Resource[{j}]"
                rid = self.ref(r, rpath) or ""
                role = self.text(r, "Role")
                if rid not in instance.resource_by_id:
                    self.error(rpath, f"unknown resource {rid!r}")
                assignments[role] = rid
            try:
                ses.append(m.fill_preassigned(instance, m.SolutionEvent(eid, duration, time, assignments)))
            except ValueError as exc:
                self.error(epath, str(exc))
        return m.Solution(el.get("Reference", instance.id), tuple(ses))


def _parse_root(data: bytes | str) -> ET.Element:
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        return ET.fromstring(data)
    except ET.ParseError as exc:
        line, col = exc.position
        raise XhsttError([ParseDiagnostic("error", f"line {line}, column {col}", f"malformed XML: {exc}")])


def _finish(reader: _Reader, warnings: Optional[list]):
    errors = [d for d in reader.diagnostics if d.severity == "error"]
    if errors:
        raise XhsttError(reader.diagnostics)
    if warnings is not None:
        warnings.extend(reader.diagnostics)


def parse_instance(data: bytes | str, strict: bool = True, instance_id: Optional[str] = None,
                   warnings: Optional[list] = None) -> m.Instance:
    """Parse an XHSTT archive (or a bare ``<Instance>``) into an Instance.

    Raises :class:`XhsttError` carrying every diagnostic when any error is
    found.  Warnings are appended to ``warnings`` if given.  With
    ``strict=False`` unknown constraint elements are skipped with a warning.
    """
    root = _parse_root(data)
    reader = _Reader(strict)
    if root.tag == "Instance":
        candidates = [root]
    else:
        candidates = root.findall("Instances/Instance")
    if instance_id is not None:
        candidates = [c for c in candidates if c.get("Id") == instance_id]
    if not candidates:
        raise XhsttError([ParseDiagnostic("error", root.tag, "no <Instance> element found")])
    inst = reader.instance(candidates[0])
    _finish(reader, warnings)
    return inst


def parse_solution(data: bytes | str, instance: m.Instance, warnings: Optional[list] = None) -> m.Solution:
    """Parse the first solution for ``instance`` in an archive or a bare ``<Solution>``.

    Reference and duration errors are reported as diagnostics.
    """
    root = _parse_root(data)
    reader = _Reader(True)
    if root.tag == "Solution":
        sols = [root]
    else:
        sols = root.findall("SolutionGroups/SolutionGroup/Solution")
        matching = [s for s in sols if s.get("Reference") == instance.id]
        sols = matching or sols
    if not sols:
        raise XhsttError([ParseDiagnostic("error", root.tag, "no <Solution> element found")])
    sol = reader.solution(sols[0], instance, "Solution")
    if not any(d.severity == "error" for d in reader.diagnostics):
        for p in m.validate_solution(instance, sol).problems:
            reader.error(p.location, str(p).split(": ", 1)[-1])
    _finish(reader, warnings)
    return sol


# --- serialisation ------------------------------------------------------------


def _sub(parent: ET.Element, tag: str, text: Optional[str] = None, **attrs) -> ET.Element:
    el = ET.SubElement(parent, tag, attrs)
    if text is not None:
        el.text = text
    return el


def _ref_list(parent: ET.Element, tag: str, item: str, refs) -> None:
    if refs:
        box = _sub(parent, tag)
        for r in refs:
            _sub(box, item, Reference=r)


def _instance_element(inst: m.Instance) -> ET.Element:
    root = ET.Element("Instance", Id=inst.id)
    meta = _sub(root, "MetaData")
    _sub(meta, "Name", inst.name)
    for tag, value in inst.metadata:
        _sub(meta, tag, value)

    times = _sub(root, "Times")
    if inst.time_groups:
        tgs = _sub(times, "TimeGroups")
        for g in inst.time_groups:
            _sub(_sub(tgs, g.kind, Id=g.id), "Name", g.name)
    kind = {g.id: g.kind for g in inst.time_groups}
    for t in inst.times:
        el = _sub(times, "Time", Id=t.id)
        _sub(el, "Name", t.name)
        special = {}
        for g in t.groups:
            if kind.get(g) in ("Week", "Day"):
                special.setdefault(kind[g], g)
        for tag in ("Week", "Day"):
            if tag in special:
                _sub(el, tag, Reference=special[tag])
        _ref_list(el, "TimeGroups", "TimeGroup", [g for g in t.groups if g not in special.values()])

    res = _sub(root, "Resources")
    if inst.resource_types:
        rts = _sub(res, "ResourceTypes")
        for rt in inst.resource_types:
            _sub(_sub(rts, "ResourceType", Id=rt.id), "Name", rt.name)
    if inst.resource_groups:
        rgs = _sub(res, "ResourceGroups")
        for g in inst.resource_groups:
            el = _sub(rgs, "ResourceGroup", Id=g.id)
            _sub(el, "Name", g.name)
            _sub(el, "ResourceType", Reference=g.resource_type)
    for r in inst.resources:
        el = _sub(res, "Resource", Id=r.id)
        _sub(el, "Name", r.name)
        _sub(el, "ResourceType", Reference=r.resource_type)
        _ref_list(el, "ResourceGroups", "ResourceGroup", r.groups)

    evs = _sub(root, "Events")
    if inst.event_groups:
        egs = _sub(evs, "EventGroups")
        for g in inst.event_groups:
            _sub(_sub(egs, g.kind, Id=g.id), "Name", g.name)
    ekind = {g.id: g.kind for g in inst.event_groups}
    for e in inst.events:
        el = _sub(evs, "Event", Id=e.id)
        _sub(el, "Name", e.name)
        _sub(el, "Duration", str(e.duration))
        if e.workload is not None:
            _sub(el, "Workload", str(e.workload))
        course = next((g for g in e.groups if ekind.get(g) == "Course"), None)
        if course is not None:
            _sub(el, "Course", Reference=course)
        if e.time is not None:
            _sub(el, "Time", Reference=e.time)
        if e.resources:
            rs = _sub(el, "Resources")
            for er in e.resources:
                r = _sub(rs, "Resource", **({"Reference": er.preassigned} if er.preassigned else {}))
                if er.role is not None:
                    _sub(r, "Role", er.role)
                if er.resource_type is not None:
                    _sub(r, "ResourceType", Reference=er.resource_type)
                if er.workload is not None:
                    _sub(r, "Workload", str(er.workload))
        _ref_list(el, "EventGroups", "EventGroup", [g for g in e.groups if g != course])

    cons = _sub(root, "Constraints")
    for c in inst.constraints:
        cons.append(_constraint_element(c))
    return root


def _constraint_element(c: m.Constraint) -> ET.Element:
    body = c.body
    el = ET.Element(body.tag, Id=c.id)
    _sub(el, "Name", c.name)
    _sub(el, "Required", "true" if c.required else "false")
    _sub(el, "Weight", str(c.weight))
    _sub(el, "CostFunction", COST_FUNCTION_OUT[c.cost_function])
    applies = _sub(el, "AppliesTo")
    for fname, place, tag, item in LAYOUT[type(body)]:
        value = getattr(body, fname)
        if place == "applies":
            _ref_list(applies, tag, item, value)
        elif place == "refs":
            _ref_list(el, tag, item, value)
        elif place == "int":
            if value is not None:
                _sub(el, tag, str(value))
        elif place == "text":
            if value is not None:
                _sub(el, tag, value)
        elif place == "ref":
            if value is not None:
                _sub(el, tag, Reference=value)
        elif place == "spread":
            box = _sub(el, tag)
            for g in value:
                gel = _sub(box, item, Reference=g.time_group)
                if g.minimum is not None:
                    _sub(gel, "Minimum", str(g.minimum))
                if g.maximum is not None:
                    _sub(gel, "Maximum", str(g.maximum))
        elif place == "pairs":
            box = _sub(applies, tag)
            for first, second in value:
                p = _sub(box, item)
                _sub(p, "FirstEvent", Reference=first)
                _sub(p, "SecondEvent", Reference=second)
    return el


def _to_bytes(root: ET.Element) -> bytes:
    ET.indent(root, space="  ")
    return ET.tostring(root, encoding="utf-8", xml_declaration=True) + b"\n"


def serialize_instance(instance: m.Instance, archive_id: Optional[str] = None) -> bytes:
    root = ET.Element("HighSchoolTimetableArchive", Id=archive_id or instance.id)
    _sub(root, "Instances").append(_instance_element(instance))
    return _to_bytes(root)


def serialize_solution(solution: m.Solution, instance: Optional[m.Instance] = None,
                       group_id: str = "Solutions") -> bytes:
    """Write ``solution`` as an archive with one solution group.

    Preassigned roles are omitted (they are implied by the instance) when
    ``instance`` is given.
    """
    root = ET.Element("HighSchoolTimetableArchive", Id=group_id)
    group = _sub(_sub(root, "SolutionGroups"), "SolutionGroup", Id=group_id)
    _sub(group, "MetaData")
    sol = _sub(group, "Solution", Reference=solution.instance_id)
    events = _sub(sol, "Events")
    for se in solution.events:
        el = _sub(events, "Event", Reference=se.event)
        _sub(el, "Duration", str(se.duration))
        if se.time is not None:
            _sub(el, "Time", Reference=se.time)
        assigned = dict(se.assignments)
        if instance is not None and se.event in instance.event_by_id:
            event = instance.event_by_id[se.event]
            for i, er in enumerate(event.resources):
                if er.preassigned is not None:
                    assigned.pop(event.resource_key(i), None)
        if assigned:
            rs = _sub(el, "Resources")
            for role, rid in assigned.items():
                r = _sub(rs, "Resource", Reference=rid)
                _sub(r, "Role", role)
    return _to_bytes(root)
