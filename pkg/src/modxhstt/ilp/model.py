"""A minimal integer linear model: variables, rows, objective."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Union

Num = Union[int, Fraction]


class ModelError(ValueError):
    pass


class Lin:
    """Sparse linear expression ``sum(coef * var) + const``."""

    __slots__ = ("terms", "const")

    def __init__(self, terms: Optional[Mapping[str, Num]] = None, const: Num = 0):
        self.terms: dict[str, Num] = dict(terms) if terms else {}
        self.const = const

    @classmethod
    def var(cls, name: str, coef: Num = 1) -> "Lin":
        return cls({name: coef})

    @classmethod
    def total(cls, names: Iterable[str], coef: Num = 1) -> "Lin":
        out = cls()
        for n in names:
            out.terms[n] = out.terms.get(n, 0) + coef
        return out

    def copy(self) -> "Lin":
        return Lin(self.terms, self.const)

    def add(self, other: Union["Lin", Num], scale: Num = 1) -> "Lin":
        """In-place ``self += scale * other``."""
        if isinstance(other, Lin):
            for k, v in other.terms.items():
                self.terms[k] = self.terms.get(k, 0) + scale * v
            self.const += scale * other.const
        else:
            self.const += scale * other
        return self

    def __add__(self, other):
        return self.copy().add(other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.copy().add(other, -1)

    def __rsub__(self, other):
        return (-1 * self).add(other)

    def __mul__(self, k: Num) -> "Lin":
        return Lin({n: k * v for n, v in self.terms.items()}, k * self.const)

    __rmul__ = __mul__

    def __neg__(self):
        return self * -1

    def __repr__(self) -> str:
        return f"Lin({self.terms!r}, {self.const!r})"


def _denominator(values: Iterable[Num]) -> int:
    d = 1
    for v in values:
        if isinstance(v, Fraction) and v.denominator != 1:
            d = d * v.denominator // math.gcd(d, v.denominator)
    return d


@dataclass
class Var:
    name: str
    lb: int
    ub: int
    meaning: tuple

    @property
    def binary(self) -> bool:
        return self.lb >= 0 and self.ub <= 1


@dataclass
class Row:
    name: str
    terms: dict[str, int]
    sense: str          # "<=", "=", ">="
    rhs: int
    block: str


@dataclass
class IlpModel:
    vars: dict[str, Var] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    objective: dict[str, int] = field(default_factory=dict)
    hard_weight: int = 1
    meta: dict = field(default_factory=dict)
    _row_count: Counter = field(default_factory=Counter, repr=False)

    # --- construction -------------------------------------------------------

    def add_var(self, name: str, lb: Num, ub: Num, meaning: tuple) -> str:
        if name in self.vars:
            raise ModelError(f"duplicate variable {name}")
        lb, ub = math.floor(lb), math.ceil(ub)
        if lb > ub:
            raise ModelError(f"variable {name}: empty domain [{lb}, {ub}]")
        self.vars[name] = Var(name, lb, ub, meaning)
        return name

    def bounds(self, expr: Lin) -> tuple[Num, Num]:
        lo = hi = expr.const
        for n, c in expr.terms.items():
            v = self.vars[n]
            if c >= 0:
                lo += c * v.lb
                hi += c * v.ub
            else:
                lo += c * v.ub
                hi += c * v.lb
        return lo, hi

    def add_row(self, expr: Lin, sense: str, block: str, slack: int = 0) -> Optional[Row]:
        """Add ``expr sense 0``; fractional coefficients are cleared by scaling.

        ``slack`` (applied after scaling, ``<=`` rows only) loosens the row by
        ``d - 1`` units when ``slack`` is true, which turns ``s <= e`` into
        ``s < e + 1`` for integral ``s``.
        """
        d = _denominator(list(expr.terms.values()) + [expr.const])
        terms = {n: int(c * d) for n, c in expr.terms.items() if c != 0}
        rhs = int(-expr.const * d)
        if slack:
            if sense != "<=":
                raise ModelError("slack only applies to <= rows")
            rhs += d - 1
        if not terms:
            ok = {"<=": 0 <= rhs, "=": rhs == 0, ">=": 0 >= rhs}[sense]
            if ok:
                return None
            raise ModelError(f"constant row in block {block} is infeasible")
        self._row_count[block] += 1
        row = Row(f"{block}.{self._row_count[block]}", terms, sense, rhs, block)
        self.rows.append(row)
        return row

    def add_objective(self, expr: Lin, scale: int = 1) -> None:
        for n, c in expr.terms.items():
            c = c * scale
            if c != int(c):
                raise ModelError("objective coefficients must be integral")
            self.objective[n] = self.objective.get(n, 0) + int(c)

    # --- evaluation -----------------------------------------------------------

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(c * values.get(n, 0) for n, c in self.objective.items())

    def violations(self, values: Mapping[str, float], tol: float = 1e-6,
                   blocks: Optional[set[str]] = None) -> list[str]:
        out = []
        names = None
        if blocks is not None:
            names = {n for r in self.rows if r.block in blocks for n in r.terms}
        for n, v in self.vars.items():
            if names is not None and n not in names:
                continue
            x = values.get(n, 0)
            if abs(x - round(x)) > tol:
                out.append(f"{n} = {x} is fractional")
            if x < v.lb - tol or x > v.ub + tol:
                out.append(f"{n} = {x} outside [{v.lb}, {v.ub}]")
        for r in self.rows:
            if blocks is not None and r.block not in blocks:
                continue
            lhs = sum(c * values.get(n, 0) for n, c in r.terms.items())
            bad = {"<=": lhs > r.rhs + tol, "=": abs(lhs - r.rhs) > tol, ">=": lhs < r.rhs - tol}[r.sense]
            if bad:
                out.append(f"row {r.name}: {lhs} {r.sense} {r.rhs} violated")
        return out

    def stats(self) -> dict:
        by_block = Counter(r.block for r in self.rows)
        by_symbol = Counter(v.meaning[0] for v in self.vars.values())
        return {
            "variables": len(self.vars),
            "constraints": len(self.rows),
            "binaries": sum(1 for v in self.vars.values() if v.binary),
            "integers": sum(1 for v in self.vars.values() if not v.binary),
            "nonzeros": sum(len(r.terms) for r in self.rows),
            "variables_by_symbol": dict(sorted(by_symbol.items())),
            "constraints_by_block": dict(sorted(by_block.items())),
        }

    def stats_line(self) -> str:
        s = self.stats()
        return f"variables={s['variables']}, constraints={s['constraints']}"
