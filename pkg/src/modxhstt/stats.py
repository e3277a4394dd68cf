"""Instance statistics: resources by type and modularity counts."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from . import model as m
from .expansion import is_requirement_event

# Substrings matched (case-insensitively) against resource type id and name.
TYPE_KEYWORDS = {
    "students": ("student", "schueler", "schüler"),
    "classes": ("class", "klasse"),
    "teachers": ("teacher", "lehrer"),
    "rooms": ("room", "raum"),
}


@dataclass(frozen=True)
class StatsRecord:
    instance: str
    events: int = 0
    students: int = 0
    classes: int = 0
    teachers: int = 0
    rooms: int = 0
    choice: int = 0
    balance: int = 0
    modular_events: int = 0
    requirement_events: int = 0

    COLUMNS = ("events", "students", "classes", "teachers", "rooms",
               "choice", "balance", "modular_events", "requirement_events")

    def row(self) -> tuple[int, ...]:
        return tuple(getattr(self, c) for c in self.COLUMNS)

    def to_dict(self) -> dict:
        return asdict(self)


def _type_column(rt: m.ResourceType) -> str | None:
    text = f"{rt.id} {rt.name}".lower()
    for column, words in TYPE_KEYWORDS.items():
        if any(w in text for w in words):
            return column
    return None


def _student_types(instance: m.Instance) -> set[str]:
    return {rt.id for rt in instance.resource_types if _type_column(rt) == "students"}


def requirement_events(instance: m.Instance) -> dict[str, str]:
    """Requirement event id -> main event id.

    An event counts if it carries the expansion tag, or if it has a single
    student event resource and shares a hard LinkEvents group with an event
    that does not look like that.
    """
    out: dict[str, str] = {}
    for e in instance.events:
        if is_requirement_event(instance, e.id):
            course = e.id.rsplit("_", 2)[0]
            if course in instance.event_by_id:
                out[e.id] = course
    students = _student_types(instance)

    def single_student(e: m.Event) -> bool:
        return len(e.resources) == 1 and e.resources[0].resource_type in students

    for c in instance.constraints:
        if not (c.required and isinstance(c.body, m.LinkEvents)):
            continue
        for eg in c.body.event_groups:
            members = [instance.event_by_id[x] for x in instance.event_group_members.get(eg, ())]
            mains = [e for e in members if not single_student(e) and e.id not in out]
            if len(mains) != 1:
                continue
            for e in members:
                if single_student(e) and e.id not in out:
                    out[e.id] = mains[0].id
    return out


def instance_stats(instance: m.Instance) -> StatsRecord:
    req = requirement_events(instance)
    counts = dict.fromkeys(TYPE_KEYWORDS, 0)
    type_col = {rt.id: _type_column(rt) for rt in instance.resource_types}
    for r in instance.resources:
        col = type_col.get(r.resource_type)
        if col is not None:
            counts[col] += 1
    return StatsRecord(
        instance=instance.id,
        events=sum(1 for e in instance.events if e.id not in req),
        choice=sum(1 for c in instance.constraints if isinstance(c.body, m.StudentChoice)),
        balance=sum(1 for c in instance.constraints if isinstance(c.body, m.BalanceClassSize)),
        modular_events=len(set(req.values())),
        requirement_events=len(req),
        **counts,
    )


def format_table(records: list[StatsRecord]) -> str:
    header = ["instance"] + list(StatsRecord.COLUMNS)
    rows = [[r.instance] + [str(v) for v in r.row()] for r in records]
    widths = [max(len(x) for x in col) for col in zip(header, *rows)]
    lines = ["  ".join(h.ljust(w) for h, w in zip(header, widths))]
    for row in rows:
        lines.append("  ".join(v.ljust(w) if i == 0 else v.rjust(w) for i, (v, w) in enumerate(zip(row, widths))))
    return "\n".join(lines) + "\n"


__all__ = ["StatsRecord", "instance_stats", "requirement_events", "format_table"]
