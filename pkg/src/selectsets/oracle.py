"""Brute-force ground truth for small ``n``.

Orderings are enumerated as relative-rank sequences: at time ``t`` the new
observation's rank among the first ``t`` is uniform on ``1..t``, and the
sequences ``(k_1, ..., k_n)`` with ``1 <= k_t <= t`` are in bijection with the
``n!`` permutations.  The rule is replayed on global ranks, so no values are
sampled and every expectation is an exact Fraction.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional, Sequence

from .rules import Rule, r_value

__all__ = [
    "CapacityError",
    "ExactResult",
    "replay",
    "relative_ranks",
    "enumerate_exact",
    "ConditionalReport",
    "conditional_check",
    "conditional_sweep",
    "AStarReport",
    "a_star_check",
    "reachable_snapshots",
    "a_star_sweep",
    "MAX_N",
]

MAX_N = 9


class CapacityError(ValueError):
    """Enumeration size beyond what the oracle supports."""


def _insert(retained: tuple, k: int, keep: bool) -> tuple:
    """Global ranks after a new observation of rank ``k`` arrives."""
    bumped = tuple(q + 1 if q >= k else q for q in retained)
    if keep:
        return tuple(sorted(bumped + (k,)))
    return bumped


def replay(rule: Rule, prefix: Sequence[int]) -> tuple:
    """Sorted global ranks of the retained items after the relative-rank ``prefix``."""
    retained: tuple = ()
    for t, k in enumerate(prefix, start=1):
        if not isinstance(k, int) or not 1 <= k <= t:
            raise ValueError(f"relative rank {k!r} at position {t} is outside 1..{t}")
        retained = _insert(retained, k, k <= r_value(rule, len(retained)))
    return retained


def relative_ranks(values: Sequence[float]) -> list[int]:
    """Relative ranks (1 = smallest so far) of a sequence of distinct values."""
    out = []
    for t, x in enumerate(values):
        out.append(1 + sum(1 for y in values[:t] if y < x))
    return out


@dataclass(frozen=True)
class ExactResult:
    rule: Rule
    n: int
    dist_L: tuple  # Fractions indexed by j = 0..n
    E_L: Fraction
    E_Q: Fraction
    E_A: Fraction
    E_V: Fraction
    trace: Optional[tuple] = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "rule": str(self.rule),
            "n": self.n,
            "dist_L": [str(f) for f in self.dist_L],
            "E_L": str(self.E_L),
            "E_Q": str(self.E_Q),
            "E_A": str(self.E_A),
            "E_V": str(self.E_V),
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["j", "P_L_j"])
        for j in range(1, self.n + 1):
            w.writerow([j, format(float(self.dist_L[j]), ".17g")])
        for key in ("E_L", "E_Q", "E_A", "E_V"):
            w.writerow([key, format(float(getattr(self, key)), ".17g")])
        return buf.getvalue()


def enumerate_exact(rule: Rule, n: int, trace: bool = False) -> ExactResult:
    """Replay ``rule`` on all ``n!`` orderings and aggregate exactly."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if n > MAX_N:
        raise CapacityError(f"n={n} exceeds the oracle cap of {MAX_N}")
    counts = [0] * (n + 1)
    q_by_L = [0] * (n + 1)
    rows = [] if trace else None

    # depth-first so that prefixes are shared between orderings
    def walk(t: int, retained: tuple, path: list):
        if t > n:
            L = len(retained)
            counts[L] += 1
            q_by_L[L] += sum(retained)
            if rows is not None:
                rows.append((tuple(path), L, sum(retained)))
            return
        j = r_value(rule, len(retained))
        for k in range(1, t + 1):
            path.append(k)
            walk(t + 1, _insert(retained, k, k <= j), path)
            path.pop()

    walk(1, (), [])
    total = math.factorial(n)
    dist = tuple(Fraction(c, total) for c in counts)
    return ExactResult(
        rule=rule,
        n=n,
        dist_L=dist,
        E_L=sum(j * w for j, w in enumerate(dist)),
        E_Q=Fraction(sum(q_by_L), total),
        E_A=sum((Fraction(q, L) for L, q in enumerate(q_by_L) if L), Fraction(0)) / total,
        E_V=sum((Fraction(q, L * L) for L, q in enumerate(q_by_L) if L), Fraction(0)) / total,
        trace=tuple(rows) if rows is not None else None,
    )


@dataclass(frozen=True)
class ConditionalReport:
    prefix: tuple
    n: int
    L: int
    Q: int
    j: int
    EL_enum: Fraction
    EL_formula: Fraction
    EQ_enum: Fraction
    EQ_formula: Fraction
    EA_enum: Fraction
    EA_formula: Fraction

    @property
    def ok(self) -> bool:
        return (self.EL_enum == self.EL_formula and self.EQ_enum == self.EQ_formula
                and self.EA_enum == self.EA_formula)


def conditional_check(rule: Rule, prefix: Sequence[int]) -> ConditionalReport:
    """Compare the one-step conditional means of ``L``, ``Q``, ``A`` with their closed forms."""
    prefix = tuple(prefix)
    if not prefix:
        raise ValueError("prefix must contain at least one observation")
    retained = replay(rule, prefix)
    n, L, Q = len(prefix), len(retained), sum(retained)
    j = r_value(rule, L)
    nxt = []
    for k in range(1, n + 2):
        after = _insert(retained, k, k <= j)
        nxt.append((len(after), sum(after)))
    m = n + 1
    EL = Fraction(sum(a for a, _ in nxt), m)
    EQ = Fraction(sum(b for _, b in nxt), m)
    EA = sum(Fraction(b, a) for a, b in nxt) / m
    A = Fraction(Q, L)
    return ConditionalReport(
        prefix=prefix, n=n, L=L, Q=Q, j=j,
        EL_enum=EL,
        EL_formula=L + Fraction(j, n + 1),
        EQ_enum=EQ,
        EQ_formula=Fraction(n + 2, n + 1) * Q + Fraction(j * (j + 1), 2 * (n + 1)),
        EA_enum=EA,
        EA_formula=A * (1 + Fraction(1 + L - j, (n + 1) * (L + 1))) + Fraction(j * (j - 1), 2 * (n + 1) * L),
    )


def _prefixes(max_len: int) -> Iterator[tuple]:
    for n in range(1, max_len + 1):
        yield from itertools.product(*(range(1, t + 1) for t in range(1, n + 1)))


def conditional_sweep(rule: Rule, max_len: int) -> list[ConditionalReport]:
    """Failing reports over every relative-rank prefix of length ``1..max_len``."""
    return [rep for rep in map(lambda pre: conditional_check(rule, pre), _prefixes(max_len)) if not rep.ok]


@dataclass(frozen=True)
class AStarReport:
    n: int
    retained: tuple
    L: int
    Q: int
    j: int
    mean_enum: Optional[Fraction]
    mean_formula: Optional[Fraction]
    second_enum: Optional[Fraction]
    second_bound: Optional[Fraction]

    @property
    def vacuous(self) -> bool:
        return self.mean_enum is None

    @property
    def ok(self) -> bool:
        if self.vacuous:
            return True
        return self.mean_enum == self.mean_formula and self.second_enum <= self.second_bound


def a_star_check(rule: Rule, n: int, retained_ranks: Sequence[int]) -> AStarReport:
    """Rank-sum bump ``A*`` from a non-retained arrival, enumerated vs closed forms.

    ``retained_ranks`` are global ranks among the ``n`` observations and must
    contain the top ``min(r(L), n)`` ranks.  When every insertion rank leads to
    retention the conditioning event is empty and the report is vacuous.
    """
    ranks = tuple(sorted(retained_ranks))
    L = len(ranks)
    if len(set(ranks)) != L or any(not 1 <= q <= n for q in ranks) or L == 0:
        raise ValueError(f"inconsistent snapshot: ranks {ranks} for n={n}")
    j = r_value(rule, L)
    top = min(j, n)
    if ranks[:top] != tuple(range(1, top + 1)):
        raise ValueError(f"snapshot {ranks} does not contain the top {top} ranks")
    Q = sum(ranks)
    if j >= n + 1:
        return AStarReport(n, ranks, L, Q, j, None, None, None, None)
    worse = ranks[j:]
    bumps = [sum(1 for q in worse if q >= k) for k in range(j + 1, n + 2)]
    m = n + 1 - j
    return AStarReport(
        n=n, retained=ranks, L=L, Q=Q, j=j,
        mean_enum=Fraction(sum(bumps), m),
        mean_formula=Fraction(2 * Q - j * (j + 1) - 2 * j * (L - j), 2 * m),
        second_enum=Fraction(sum(b * b for b in bumps), m),
        second_bound=Fraction(Q * (2 * L - 2 * j + 1), m),
    )


def reachable_snapshots(rule: Rule, n_max: int) -> set:
    """All distinct ``(n, retained ranks)`` reachable within ``n_max`` steps."""
    seen = set()
    frontier = {()}
    for n in range(1, n_max + 1):
        nxt = set()
        for retained in frontier:
            j = r_value(rule, len(retained))
            for k in range(1, n + 1):
                nxt.add(_insert(retained, k, k <= j))
        frontier = nxt
        seen.update((n, s) for s in frontier)
    return seen


def a_star_sweep(rule: Rule, n_max: int) -> tuple[int, list[AStarReport]]:
    """Check every reachable snapshot; return (snapshots checked, failures)."""
    snaps = sorted(reachable_snapshots(rule, n_max))
    bad = [rep for rep in (a_star_check(rule, n, s) for n, s in snaps) if not rep.ok]
    return len(snaps), bad
