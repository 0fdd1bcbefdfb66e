"""Rank-selection rules and the locally subdiagonal (LsD) axioms.

A rule is an integer function ``r`` of the current retained-set size ``L``:
observation ``n`` is kept iff its rank among the first ``n`` observations is
at most ``r(L_{n-1})``.  All arithmetic here is exact; the percentile
parameter is a :class:`fractions.Fraction`, never a float.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

import numpy as np

__all__ = [
    "INT64_MAX",
    "Percentile",
    "KRecord",
    "Table",
    "Rule",
    "Violation",
    "Validation",
    "as_fraction",
    "ceil_mul",
    "r_value",
    "r_array",
    "validate_lsd",
    "parse_rule",
    "format_rule",
    "median",
]

INT64_MAX = 2**63 - 1


def as_fraction(p) -> Fraction:
    """Coerce ``p`` to a Fraction in (0, 1], refusing floats."""
    if isinstance(p, float):
        raise TypeError(f"p must be an exact rational, got float {p!r}")
    if isinstance(p, tuple):
        p = Fraction(*p)
    p = Fraction(p)
    if not 0 < p <= 1:
        raise ValueError(f"p must satisfy 0 < p <= 1, got {p}")
    return p


def ceil_mul(p: Fraction, k: int) -> int:
    """Exact ``ceil(p * k)`` for ``k >= 1``; returns 1 for ``k == 0``.

    Raises OverflowError when ``num * k`` leaves the signed 64-bit range, which
    is the width the vectorised paths (`r_array`, the batch kernel) use.
    """
    if k < 0:
        raise ValueError("k must be nonnegative")
    if k == 0:
        return 1
    num, den = p.numerator, p.denominator
    prod = num * k
    if prod > INT64_MAX - den:
        raise OverflowError(f"{num}*{k} exceeds the supported 64-bit range")
    return (prod + den - 1) // den


@dataclass(frozen=True)
class Percentile:
    """Keep an item iff it beats the ceil(p*L)-th best retained item."""

    p: Fraction

    def __post_init__(self):
        object.__setattr__(self, "p", as_fraction(self.p))

    def r(self, a: int) -> int:
        return ceil_mul(self.p, a)

    def __str__(self) -> str:
        return f"percentile:{self.p.numerator}/{self.p.denominator}"


@dataclass(frozen=True)
class KRecord:
    """``r(a) = min(a + 1, k)``; ``k = 1`` is the classical record rule."""

    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        object.__setattr__(self, "k", int(self.k))

    def r(self, a: int) -> int:
        if a < 0:
            raise ValueError("a must be nonnegative")
        return min(a + 1, self.k)

    def __str__(self) -> str:
        return f"krecord:{self.k}"


@dataclass(frozen=True)
class Table:
    """User-supplied ``r(0), r(1), ...``, extended by its last entry.

    ``r(0)`` is always 1 regardless of ``values[0]``; `validate_lsd` reports a
    table whose first entry disagrees.
    """

    values: tuple = field(default=())

    def __post_init__(self):
        vals = tuple(int(v) for v in self.values)
        if not vals:
            raise ValueError("table rule needs at least one entry")
        if any(v < 1 for v in vals):
            raise ValueError("table entries must be positive integers")
        object.__setattr__(self, "values", vals)

    def r(self, a: int) -> int:
        if a < 0:
            raise ValueError("a must be nonnegative")
        if a == 0:
            return 1
        return self.values[min(a, len(self.values) - 1)]

    def __str__(self) -> str:
        return "table:" + ",".join(str(v) for v in self.values)


Rule = Union[Percentile, KRecord, Table]


def median() -> Percentile:
    return Percentile(Fraction(1, 2))


def r_value(rule: Rule, a: int) -> int:
    return rule.r(a)


def r_array(rule: Rule, a_max: int) -> np.ndarray:
    """``r(0..a_max)`` as an int64 array (vectorised, still exact)."""
    a = np.arange(a_max + 1, dtype=np.int64)
    if isinstance(rule, Percentile):
        num, den = rule.p.numerator, rule.p.denominator
        if num * a_max > INT64_MAX - den:
            raise OverflowError(f"{num}*{a_max} exceeds the supported 64-bit range")
        out = (num * a + den - 1) // den
    elif isinstance(rule, KRecord):
        out = np.minimum(a + 1, rule.k)
    elif isinstance(rule, Table):
        vals = np.asarray(rule.values, dtype=np.int64)
        out = vals[np.minimum(a, len(vals) - 1)]
    else:
        raise TypeError(f"unknown rule type {type(rule).__name__}")
    out = out.astype(np.int64, copy=True)
    out[0] = 1
    return out


@dataclass(frozen=True)
class Violation:
    axiom: str  # "r0", "monotone", "subdiagonal" or "bounded"
    a: int

    def __str__(self) -> str:
        return f"{self.axiom} at a={self.a}"


@dataclass(frozen=True)
class Validation:
    rule: Rule
    a_max: int
    violations: tuple

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.ok


def validate_lsd(rule: Rule, a_max: int) -> Validation:
    """Check every LsD axiom for ``0 <= a <= a_max`` and list all violations.

    A monotone or subdiagonal violation at ``a`` concerns the pair
    ``(r(a), r(a+1))``, so the last pair checked is ``(a_max - 1, a_max)``.
    """
    if a_max < 1:
        raise ValueError("a_max must be >= 1")
    r = r_array(rule, a_max)
    violations = []
    if isinstance(rule, Table) and rule.values[0] != 1:
        violations.append(Violation("r0", 0))
    step = np.diff(r)
    for a in np.flatnonzero(step < 0):
        violations.append(Violation("monotone", int(a)))
    for a in np.flatnonzero(step > 1):
        violations.append(Violation("subdiagonal", int(a)))
    if isinstance(rule, Percentile):
        k = np.arange(1, a_max + 1)
        bad = (r[1:] < 1) | (r[1:] > k)
        for a in k[bad]:
            violations.append(Violation("bounded", int(a)))
    violations.sort(key=lambda v: (v.a, v.axiom))
    return Validation(rule, a_max, tuple(violations))


_RULE_RE = re.compile(r"^\s*(percentile|krecord|table)\s*:\s*(.+?)\s*$", re.IGNORECASE)


def parse_rule(text: str) -> Rule:
    """Parse ``percentile:<num>/<den>``, ``krecord:<k>`` or ``table:<v1>,<v2>,...``.

    Decimal forms such as ``percentile:0.5`` are rejected.
    """
    m = _RULE_RE.match(text)
    if not m:
        raise ValueError(f"cannot parse rule {text!r}")
    kind, body = m.group(1).lower(), m.group(2)
    if kind == "percentile":
        pm = re.fullmatch(r"(\d+)\s*(?:/\s*(\d+))?", body)
        if not pm:
            raise ValueError(f"percentile needs <num>/<den> with integers, got {body!r}")
        num = int(pm.group(1))
        den = int(pm.group(2)) if pm.group(2) is not None else 1
        if den == 0:
            raise ValueError("zero denominator")
        return Percentile(Fraction(num, den))
    if kind == "krecord":
        if not re.fullmatch(r"\d+", body):
            raise ValueError(f"krecord needs a positive integer, got {body!r}")
        return KRecord(int(body))
    parts = [s.strip() for s in body.split(",")]
    if not all(re.fullmatch(r"\d+", s) for s in parts):
        raise ValueError(f"table needs comma-separated positive integers, got {body!r}")
    return Table(tuple(int(s) for s in parts))


def format_rule(rule: Rule) -> str:
    return str(rule)
