"""CPLEX-LP and fixed-MPS text output plus the JSON registry sidecar."""

from __future__ import annotations

import json

from .model import IlpModel, Row

_SENSE_LP = {"<=": "<=", ">=": ">=", "=": "="}
_SENSE_MPS = {"<=": "L", ">=": "G", "=": "E"}
_LINE = 78


def _base36(n: int) -> str:
    digits = "0123456789ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    out = ""
    while True:
        n, k = divmod(n, 36)
        out = digits[k] + out
        if n == 0:
            return out


def column_aliases(model: IlpModel) -> dict[str, str]:
    """Short (at most 8 characters) column names in declaration order."""
    return {name: "C" + _base36(i) for i, name in enumerate(model.vars)}


def row_aliases(model: IlpModel) -> dict[str, str]:
    return {row.name: "R" + _base36(i) for i, row in enumerate(model.rows)}


def _terms(terms: dict[str, int]) -> list[str]:
    out = []
    for name, c in terms.items():
        sign = "-" if c < 0 else "+"
        mag = abs(c)
        out.append(f"{sign} {name}" if mag == 1 else f"{sign} {mag} {name}")
    return out


def _wrap(head: str, tokens: list[str], tail: str = "") -> list[str]:
    lines, cur = [], head
    for tok in tokens + ([tail] if tail else []):
        if len(cur) + 1 + len(tok) > _LINE and cur.strip():
            lines.append(cur)
            cur = "   " + tok
        else:
            cur = f"{cur} {tok}" if cur else tok
    lines.append(cur)
    return lines


def emit_lp(model: IlpModel) -> str:
    lines = [f"\\ {model.meta.get('instance', 'model')}: {model.stats_line()}", "Minimize"]
    obj = {n: c for n, c in model.objective.items() if c}
    lines += _wrap(" obj:", _terms(obj))
    lines.append("Subject To")
    for row in model.rows:
        lines += _wrap(f" {row.name}:", _terms(row.terms), f"{_SENSE_LP[row.sense]} {row.rhs}")
    lines.append("Bounds")
    binaries, generals = [], []
    for v in model.vars.values():
        if v.lb == 0 and v.ub == 1:
            binaries.append(v.name)
            continue
        generals.append(v.name)
        if v.lb == v.ub:
            lines.append(f" {v.name} = {v.lb}")
        else:
            lines.append(f" {v.lb} <= {v.name} <= {v.ub}")
    for title, names in (("Binaries", binaries), ("Generals", generals)):
        if names:
            lines.append(title)
            lines += _wrap("", names) if names else []
    lines.append("End")
    return "\n".join(lines) + "\n"


def _field_line(f1: str, f2: str, f3: str = "", f4: str = "", f5: str = "", f6: str = "") -> str:
    line = f" {f1:<2} {f2:<8}  {f3:<8}  {f4:>12}"
    if f5:
        line += f"   {f5:<8}  {f6:>12}"
    return line.rstrip()


def emit_mps(model: IlpModel, name: str = "MODXHSTT") -> str:
    cols = column_aliases(model)
    rows = row_aliases(model)
    by_col: dict[str, list[tuple[str, int]]] = {n: [] for n in model.vars}
    for n, c in model.objective.items():
        if c:
            by_col[n].append(("OBJ", c))
    for row in model.rows:
        for n, c in row.terms.items():
            by_col[n].append((rows[row.name], c))
    out = [f"NAME          {name[:8]}", "ROWS", " N  OBJ"]
    for row in model.rows:
        out.append(f" {_SENSE_MPS[row.sense]}  {rows[row.name]}")
    out.append("COLUMNS")
    out.append("    MARKER                 'MARKER'                 'INTORG'")
    for n in model.vars:
        entries = by_col[n] or [("OBJ", 0)]
        for k in range(0, len(entries), 2):
            pair = entries[k:k + 2]
            f = [cols[n], pair[0][0], str(pair[0][1])]
            if len(pair) == 2:
                f += [pair[1][0], str(pair[1][1])]
            out.append(_field_line("", *f))
    out.append("    MARKER                 'MARKER'                 'INTEND'")
    out.append("RHS")
    rhs = [(rows[r.name], r.rhs) for r in model.rows if r.rhs]
    for k in range(0, len(rhs), 2):
        pair = rhs[k:k + 2]
        f = ["RHS", pair[0][0], str(pair[0][1])]
        if len(pair) == 2:
            f += [pair[1][0], str(pair[1][1])]
        out.append(_field_line("", *f))
    out.append("BOUNDS")
    for n, v in model.vars.items():
        if v.lb == 0 and v.ub == 1:
            out.append(_field_line("BV", "BND", cols[n]))
        elif v.lb == v.ub:
            out.append(_field_line("FX", "BND", cols[n], str(v.lb)))
        else:
            out.append(_field_line("LO", "BND", cols[n], str(v.lb)))
            out.append(_field_line("UP", "BND", cols[n], str(v.ub)))
    out.append("ENDATA")
    return "\n".join(out) + "\n"


def registry_json(model: IlpModel) -> str:
    """Sidecar: variable meanings, MPS aliases, build options and subevent pool."""
    data = {
        "instance": model.meta.get("instance"),
        "options": model.meta.get("options"),
        "hard_weight": model.hard_weight,
        "pool": model.meta.get("pool"),
        "variables": {n: list(v.meaning) for n, v in model.vars.items()},
        "column_aliases": column_aliases(model),
        "row_aliases": row_aliases(model),
        "stats": model.stats(),
    }
    return json.dumps(data, indent=1, sort_keys=False) + "\n"


def stats_json(model: IlpModel) -> str:
    return json.dumps(model.stats(), indent=2) + "\n"


def row_text(row: Row) -> str:
    return " ".join(_wrap(f"{row.name}:", _terms(row.terms), f"{row.sense} {row.rhs}"))
