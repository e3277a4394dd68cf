"""Modular course expansion and student-choice constraint recipes."""

from __future__ import annotations

import json
import re
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Optional, Sequence, Union

from . import model as m

STUDENT_ROLE = "Student"


class ExpansionError(ValueError):
    pass


@dataclass(frozen=True)
class ModularCourseSpec:
    course: str                      # main event id
    s_min: int
    s_max: int
    eligible: tuple[str, ...]
    mandatory: tuple[str, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "eligible", tuple(dict.fromkeys(self.eligible)))
        object.__setattr__(self, "mandatory", tuple(dict.fromkeys(self.mandatory)))

    def check(self) -> None:
        if self.s_min < 0:
            raise ExpansionError(f"{self.course}: s_min must be non-negative")
        if self.s_max < self.s_min:
            raise ExpansionError(f"{self.course}: s_max < s_min")
        if not set(self.mandatory) <= set(self.eligible):
            raise ExpansionError(f"{self.course}: mandatory students must be eligible")
        if len(self.mandatory) > self.s_min:
            raise ExpansionError(f"{self.course}: more mandatory students than s_min")
        if self.s_min > len(self.eligible):
            raise ExpansionError(f"{self.course}: s_min exceeds the number of eligible students")
        if self.s_max > len(self.eligible):
            warnings.warn(f"{self.course}: s_max exceeds the number of eligible students", stacklevel=3)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModularCourseSpec":
        return cls(course=data["course"], s_min=int(data["s_min"]), s_max=int(data["s_max"]),
                   eligible=tuple(data.get("eligible", ())), mandatory=tuple(data.get("mandatory", ())))


def load_specs(text: str) -> list[ModularCourseSpec]:
    """Read a course-spec JSON document: one object or a list of objects."""
    data = json.loads(text)
    if isinstance(data, dict):
        data = data.get("courses", [data])
    return [ModularCourseSpec.from_dict(d) for d in data]


def requirement_group_id(course: str) -> str:
    return f"{course}_requirements"


_REQ_ID = re.compile(r"^(?P<course>.+)_(?:min|max)_\d+$")


def is_requirement_event(instance: m.Instance, event_id: str) -> bool:
    """Tagged by its course's requirement group, or else matching the generated
    id pattern with a single event resource."""
    match = _REQ_ID.match(event_id)
    if match is None:
        return False
    event = instance.event_by_id[event_id]
    if requirement_group_id(match["course"]) in event.groups:
        return True
    return match["course"] in instance.event_by_id and len(event.resources) == 1


def _hard_clash_covered(instance: m.Instance) -> set[str]:
    covered: set[str] = set()
    for c in instance.constraints:
        if c.required and isinstance(c.body, m.AvoidClashes):
            covered.update(instance.select_resources(c.body.resources, c.body.resource_groups))
    return covered


def expand_course(instance: m.Instance, spec: ModularCourseSpec) -> m.Instance:
    """Return a new instance with requirement events and their hard constraints added."""
    spec.check()
    cid = spec.course
    main = instance.event_by_id.get(cid)
    if main is None:
        raise ExpansionError(f"unknown main event {cid!r}")
    req_group = requirement_group_id(cid)
    if req_group in instance.event_group_by_id:
        raise ExpansionError(f"course {cid!r} is already expanded")
    for r in spec.eligible:
        if r not in instance.resource_by_id:
            raise ExpansionError(f"{cid}: unknown student {r!r}")
    types = {instance.resource_by_id[r].resource_type for r in spec.eligible}
    if len(types) > 1:
        raise ExpansionError(f"{cid}: eligible students have mixed resource types {sorted(types)}")
    student_type = types.pop() if types else None

    link_group = f"{cid}_link"
    new_groups = [m.EventGroup(req_group, f"{cid} requirement events"),
                  m.EventGroup(link_group, f"{cid} linked events")]
    new_events: list[m.Event] = []
    min_ids, all_ids = [], []
    mandatory = list(spec.mandatory)
    for kind, count in (("min", spec.s_min), ("max", spec.s_max - spec.s_min)):
        for k in range(1, count + 1):
            eid = f"{cid}_{kind}_{k}"
            own = f"{eid}_grp"
            pre = mandatory.pop(0) if kind == "min" and mandatory else None
            new_groups.append(m.EventGroup(own, eid))
            new_events.append(m.Event(
                eid, f"{main.name or cid} {kind} {k}", main.duration, main.time,
                (m.EventResource(STUDENT_ROLE, student_type, pre),),
                (req_group, link_group, own)))
            all_ids.append(eid)
            if kind == "min":
                min_ids.append(eid)

    for e in new_events:
        if e.id in instance.event_by_id:
            raise ExpansionError(f"generated event id {e.id!r} already exists")

    cons: list[m.Constraint] = []
    if min_ids:
        cons.append(m.Constraint(f"{cid}_assign_min", m.AssignResource(events=tuple(min_ids), role=STUDENT_ROLE),
                                 f"{cid}: fill minimum seats"))
    if all_ids:
        cons.append(m.Constraint(f"{cid}_eligible", m.PreferResources(
            event_groups=(req_group,), role=STUDENT_ROLE, resources=spec.eligible), f"{cid}: eligible students"))
        for eid in all_ids:
            cons.append(m.Constraint(f"{eid}_avoid_split", m.AvoidSplitAssignments(
                event_groups=(f"{eid}_grp",), role=STUDENT_ROLE), f"{eid}: one student"))
        cons.append(m.Constraint(f"{cid}_link", m.LinkEvents(event_groups=(link_group,)),
                                 f"{cid}: align with main event"))
        uncovered = tuple(r for r in spec.eligible if r not in _hard_clash_covered(instance))
        if uncovered:
            cons.append(m.Constraint(f"{cid}_avoid_clashes", m.AvoidClashes(resources=uncovered),
                                     f"{cid}: student clashes"))
    for c in cons:
        if c.id in instance.constraint_by_id:
            raise ExpansionError(f"generated constraint id {c.id!r} already exists")

    events = tuple(replace(e, groups=e.groups + (link_group,)) if e.id == cid else e for e in instance.events)
    return replace(instance,
                   event_groups=instance.event_groups + tuple(new_groups),
                   events=events + tuple(new_events),
                   constraints=instance.constraints + tuple(cons))


def expand_courses(instance: m.Instance, specs: Sequence[ModularCourseSpec]) -> m.Instance:
    seen: set[str] = set()
    for spec in specs:
        if spec.course in seen:
            raise ExpansionError(f"course {spec.course!r} listed twice")
        seen.add(spec.course)
        instance = expand_course(instance, spec)
    return instance


def encode_preference_chain(resource: str, groups: Sequence[str], hard_weight: int = 1,
                            soft_weights: Union[int, Sequence[int]] = 1,
                            prefix: Optional[str] = None) -> list[m.Constraint]:
    """Hard "exactly one of all", then soft "exactly one of" each strict prefix, longest first."""
    if not groups:
        raise ExpansionError("preference chain is empty")
    prefix = prefix or f"{resource}_pref"
    n = len(groups)
    if isinstance(soft_weights, int):
        soft_weights = [soft_weights] * (n - 1)
    if len(soft_weights) != n - 1:
        raise ExpansionError(f"need {n - 1} soft weights, got {len(soft_weights)}")
    out = [m.Constraint(f"{prefix}_all", m.StudentChoice(resources=(resource,), event_groups=tuple(groups),
                                                          minimum=1, maximum=1),
                        required=True, weight=hard_weight)]
    for k, w in zip(range(n - 1, 0, -1), soft_weights):
        out.append(m.Constraint(f"{prefix}_{k}", m.StudentChoice(resources=(resource,), event_groups=tuple(groups[:k]),
                                                                  minimum=1, maximum=1),
                                required=False, weight=w))
    return out


def link_subject_level_choices(resource: str, subjects: Mapping[str, Sequence[str]],
                               minimum: int, maximum: int, prefix: Optional[str] = None,
                               weight: int = 1) -> list[m.Constraint]:
    """Overall choice over subject groups plus at most one course per subject.

    ``subjects`` maps a subject event group to the course event groups it contains.
    """
    if not subjects:
        raise ExpansionError("no subject groups given")
    prefix = prefix or f"{resource}_choice"
    out = [m.Constraint(f"{prefix}_overall", m.StudentChoice(
        resources=(resource,), event_groups=tuple(subjects), minimum=minimum, maximum=maximum), weight=weight)]
    for subject, courses in subjects.items():
        if not courses:
            raise ExpansionError(f"subject {subject!r} has no courses")
        out.append(m.Constraint(f"{prefix}_{subject}", m.StudentChoice(
            resources=(resource,), event_groups=tuple(courses), minimum=0, maximum=1), weight=weight))
    return out


def add_constraints(instance: m.Instance, constraints: Sequence[m.Constraint]) -> m.Instance:
    return replace(instance, constraints=instance.constraints + tuple(constraints))
