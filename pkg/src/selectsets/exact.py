"""Exact law of ``L_n`` by forward dynamic programming, plus moment series.

``L_n`` is a Markov chain: from ``L_{n-1} = j`` the ``n``-th observation is kept
with probability ``r(j)/n``.  The float DP below is O(n) per step; `count_dp`
runs the same recursion on integer counts (orderings out of ``n!``) for
rational-exact comparisons.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

import numpy as np

from .rules import Percentile, Rule, r_array, r_value

__all__ = [
    "ConsistencyError",
    "UnsupportedRuleError",
    "LDistribution",
    "initial",
    "dp_step",
    "distributions",
    "distribution",
    "iter_counts",
    "count_dp",
    "exact_distribution",
    "overshoot",
    "d_value",
    "MomentSeries",
    "mean_recursion",
    "check_ineq_41",
    "expected_q",
    "AsymptoticReport",
    "asymptotic_report",
    "tail_probabilities",
    "harmonic",
    "RankSumMoments",
    "rank_sum_moments",
    "EXACT_COLUMNS",
]


class ConsistencyError(ArithmeticError):
    """Two independent computations of the same quantity disagree."""


class UnsupportedRuleError(TypeError):
    """The quantity is defined only for percentile rules."""


@dataclass(frozen=True)
class LDistribution:
    """``probs[j] = P(L_n = j)`` for ``j = 0..n``."""

    rule: Rule
    n: int
    probs: np.ndarray = field(repr=False)

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.n + 1)

    @property
    def mean(self) -> float:
        return float(self.support @ self.probs)

    @property
    def second_moment(self) -> float:
        j = self.support.astype(float)
        return float((j * j) @ self.probs)

    def expect(self, f) -> float:
        """``E f(L_n)`` for a vectorised ``f`` of the support."""
        return float(np.asarray(f(self.support), dtype=float) @ self.probs)


def initial(rule: Rule) -> LDistribution:
    return LDistribution(rule, 0, np.ones(1))


def _transition(rule: Rule, n: int, r_tab: Optional[np.ndarray] = None) -> np.ndarray:
    """Retention probabilities ``min(r(j)/n, 1)`` for ``j = 0..n-1``."""
    if r_tab is None:
        r_tab = r_array(rule, n)
    return np.minimum(r_tab[:n] / n, 1.0)


def dp_step(dist: LDistribution, r_tab: Optional[np.ndarray] = None) -> LDistribution:
    """Advance ``P(L_{n-1} = .)`` to ``P(L_n = .)``."""
    n = dist.n + 1
    keep = _transition(dist.rule, n, r_tab)
    out = np.zeros(n + 1)
    out[1:] += keep * dist.probs
    out[:-1] += (1.0 - keep) * dist.probs
    return LDistribution(dist.rule, n, out)


def distributions(rule: Rule, n_max: int) -> Iterator[LDistribution]:
    """Yield the laws of ``L_1, ..., L_{n_max}``."""
    r_tab = r_array(rule, n_max)
    dist = initial(rule)
    for _ in range(n_max):
        dist = dp_step(dist, r_tab)
        yield dist


def distribution(rule: Rule, n: int) -> LDistribution:
    dist = initial(rule)
    for dist in distributions(rule, n):
        pass
    return dist


def iter_counts(rule: Rule, n_max: int) -> Iterator[list[int]]:
    """Exact ordering counts by ``L_n`` for ``n = 1..n_max``; entry ``j`` counts ``L_n = j`` out of ``n!``."""
    counts = np.array([1], dtype=object)
    r_tab = [int(v) for v in r_array(rule, max(n_max, 1))]
    for m in range(1, n_max + 1):
        keep = np.array([min(r_tab[j], m) for j in range(m)], dtype=object)
        nxt = np.zeros(m + 1, dtype=object)
        nxt[1:] += keep * counts
        nxt[:-1] += (m - keep) * counts
        counts = nxt
        yield [int(c) for c in counts]


def count_dp(rule: Rule, n: int) -> list[int]:
    """Number of the ``n!`` orderings with ``L_n = j``, for ``j = 0..n`` (exact)."""
    if n == 0:
        return [1]
    for counts in iter_counts(rule, n):
        pass
    return counts


def exact_distribution(rule: Rule, n: int) -> list[Fraction]:
    total = math.factorial(n)
    return [Fraction(c, total) for c in count_dp(rule, n)]


def overshoot(p: Fraction, j: np.ndarray) -> np.ndarray:
    """``ceil(p j) - p j`` for integer ``j >= 0`` (exact, then converted)."""
    num, den = p.numerator, p.denominator
    j = np.asarray(j, dtype=np.int64)
    # ceil(pj) - pj = ((-num*j) mod den) / den
    return ((-num * j) % den) / den


def d_value(dist: LDistribution, p: Optional[Fraction] = None) -> float:
    """Mean fractional overshoot ``E(ceil(p L_n) - p L_n)``."""
    if not isinstance(dist.rule, Percentile):
        raise UnsupportedRuleError("d_n is defined for percentile rules only")
    if p is None:
        p = dist.rule.p
    return float(overshoot(p, dist.support) @ dist.probs)


@dataclass(frozen=True)
class MomentSeries:
    """Per-``n`` moments for ``n = 1..n_max`` (index ``n - 1``)."""

    p: Fraction
    n: np.ndarray
    M: np.ndarray
    M_recursion: np.ndarray
    T: np.ndarray
    d: np.ndarray
    EL2: np.ndarray
    U: np.ndarray
    EQ: np.ndarray

    def at(self, n: int) -> dict:
        i = n - 1
        return {k: float(getattr(self, k)[i]) for k in ("M", "M_recursion", "T", "d", "EL2", "U", "EQ")}


def _sweep(rule: Rule, n_max: int, with_ineq: bool = False):
    """One DP pass collecting the per-n scalars used by the reports."""
    pct = isinstance(rule, Percentile)
    r_tab = r_array(rule, n_max)
    M = np.empty(n_max)
    EL2 = np.empty(n_max)
    d = np.full(n_max, np.nan)
    Er = np.empty(n_max)  # E[r(L_n)(r(L_n)+1)]
    ineq = np.ones(n_max, dtype=bool)
    dist = initial(rule)
    for i in range(n_max):
        dist = dp_step(dist, r_tab)
        j = dist.support
        M[i] = dist.mean
        EL2[i] = dist.second_moment
        rj = r_tab[: dist.n + 1].astype(float)
        Er[i] = float((rj * (rj + 1)) @ dist.probs)
        if pct:
            d[i] = float(overshoot(rule.p, j) @ dist.probs)
        if with_ineq:
            ineq[i] = check_ineq_41(dist)[0]
    return M, EL2, d, Er, ineq


def _eq_from(Er: np.ndarray) -> np.ndarray:
    n_max = len(Er)
    EQ = np.empty(n_max)
    EQ[0] = 1.0
    for m in range(1, n_max):
        # E(Q_{m+1}) from E(Q_m); Er[m-1] is E[r(L_m)(r(L_m)+1)]
        EQ[m] = (m + 2) / (m + 1) * EQ[m - 1] + Er[m - 1] / (2 * (m + 1))
    return EQ


def mean_recursion(p, n_max: int, rtol: float = 1e-9) -> MomentSeries:
    """``E(L_n)`` two ways (DP and the overshoot recursion) plus derived series.

    The recursion is ``M_n = M_{n-1}(1 + p/n) + d_{n-1}/n`` started from
    ``M_1 = 1`` (at ``L = 0`` the retention probability is 1, not ``ceil(0)``).
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    rule = p if isinstance(p, Percentile) else Percentile(p)
    p = rule.p
    M, EL2, d, Er, _ = _sweep(rule, n_max)
    rec = np.empty(n_max)
    rec[0] = 1.0
    pf = float(p)
    for m in range(2, n_max + 1):
        rec[m - 1] = rec[m - 2] * (1 + pf / m) + d[m - 2] / m
    rel = np.abs(rec - M) / np.abs(M)
    if np.any(rel > rtol):
        m = int(np.argmax(rel)) + 1
        raise ConsistencyError(f"DP and recursion disagree at n={m}: {M[m - 1]!r} vs {rec[m - 1]!r}")
    n = np.arange(1, n_max + 1)
    T = M / n**pf
    U = EL2 / n ** (2 * pf)
    return MomentSeries(p, n, M, rec, T, d, EL2, U, _eq_from(Er))


def check_ineq_41(dist: LDistribution, tol: float = 1e-12) -> tuple[bool, Optional[int]]:
    """``P(j+1) + P(j-1) - P(j) >= -tol`` for ``1 <= j <= n``.

    Returns ``(ok, first violating j)``.  Only meaningful for ``n >= 2``; at
    ``n = 1`` the left side is -1 at ``j = 1``.
    """
    P = np.concatenate([dist.probs, [0.0]])
    j = np.arange(1, dist.n + 1)
    lhs = P[j + 1] + P[j - 1] - P[j]
    bad = np.flatnonzero(lhs < -tol)
    if len(bad):
        return False, int(j[bad[0]])
    return True, None


def expected_q(rule: Rule, n_max: int, exact: bool = False):
    """``E(Q_n)`` for ``n = 1..n_max``.

    Uses ``E(Q_{n+1}) = (n+2)/(n+1) E(Q_n) + E[r(L_n)(r(L_n)+1)] / (2(n+1))``,
    whose last term needs only the law of ``L_n``.  With ``exact=True`` the
    law comes from `count_dp` and the result is a list of Fractions.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if not exact:
        _, _, _, Er, _ = _sweep(rule, n_max)
        return _eq_from(Er)
    out = [Fraction(1)]
    for m in range(1, n_max):
        law = exact_distribution(rule, m)
        er = sum(w * r_value(rule, j) * (r_value(rule, j) + 1) for j, w in enumerate(law))
        out.append(Fraction(m + 2, m + 1) * out[-1] + er / (2 * (m + 1)))
    return out


EXACT_COLUMNS = ("n", "M_n", "T_n", "d_n", "U_n", "e_n", "EQ_n", "ineq41_ok")


@dataclass
class AsymptoticReport:
    p: Fraction
    n: np.ndarray
    M: np.ndarray
    T: np.ndarray
    U: np.ndarray
    d: np.ndarray
    e: np.ndarray
    EQ: np.ndarray
    ineq41: np.ndarray
    T_bounded: bool
    d_bounded_below: bool
    e_nondecreasing: bool
    ineq41_ok: bool
    T_fluctuation: float
    U_fluctuation: float

    @property
    def epsilon(self) -> float:
        pf = float(self.p)
        return min(pf / 2, (1 - pf) / 2)

    @property
    def ok(self) -> bool:
        return self.T_bounded and self.d_bounded_below and self.e_nondecreasing and self.ineq41_ok

    def verdicts(self) -> dict:
        return {
            "T_n < 2/p": self.T_bounded,
            "d_n >= eps_p/3": self.d_bounded_below,
            "e_n nondecreasing": self.e_nondecreasing,
            "inequality (P(j+1)+P(j-1)-P(j) >= 0)": self.ineq41_ok,
            "T_n last-decade fluctuation": self.T_fluctuation,
            "U_n last-decade fluctuation": self.U_fluctuation,
        }

    def rows(self):
        for i in range(len(self.n)):
            yield (int(self.n[i]), self.M[i], self.T[i], self.d[i], self.U[i],
                   self.e[i], self.EQ[i], bool(self.ineq41[i]))

    def to_csv(self, fh=None) -> str:
        buf = fh if fh is not None else io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(EXACT_COLUMNS)
        for row in self.rows():
            w.writerow([row[0], *(format(v, ".17g") for v in row[1:7]), int(row[7])])
        return buf.getvalue() if fh is None else ""


def asymptotic_report(p, n_max: int, e_rtol: float = 1e-12) -> AsymptoticReport:
    """Series ``T_n, U_n, d_n, e_n = M_n/(n+1)^p`` with their verdicts.

    ``e_n`` is checked as nondecreasing up to a relative slack ``e_rtol`` so that
    the exactly constant ``p = 1`` case is not failed by rounding.  The
    inequality on neighbouring probabilities is checked for ``n >= 2``.
    """
    if n_max < 10:
        raise ValueError("n_max must be >= 10")
    rule = p if isinstance(p, Percentile) else Percentile(p)
    p = rule.p
    pf = float(p)
    series = mean_recursion(rule, n_max)
    _, _, _, _, ineq = _sweep(rule, n_max, with_ineq=True)
    ineq[0] = True  # n = 1 is outside the inequality's range
    n = series.n
    e = series.M / (n + 1.0) ** pf
    eps = min(pf / 2, (1 - pf) / 2)
    decade = n >= max(1, n_max // 10)
    return AsymptoticReport(
        p=p,
        n=n,
        M=series.M,
        T=series.T,
        U=series.U,
        d=series.d,
        e=e,
        EQ=series.EQ,
        ineq41=ineq,
        T_bounded=bool(np.all(series.T < 2 / pf)),
        d_bounded_below=bool(np.all(series.d >= eps / 3)),
        e_nondecreasing=bool(np.all(np.diff(e) >= -e_rtol * e[1:])),
        ineq41_ok=bool(np.all(ineq)),
        T_fluctuation=float(np.ptp(series.T[decade])),
        U_fluctuation=float(np.ptp(series.U[decade])),
    )


def tail_probabilities(rule: Rule, n_max: int, k: int) -> np.ndarray:
    """``P(L_n < k)`` for ``n = 1..n_max``."""
    out = np.empty(n_max)
    for i, dist in enumerate(distributions(rule, n_max)):
        out[i] = dist.probs[: min(k, dist.n + 1)].sum()
    return out


@dataclass(frozen=True)
class RankSumMoments:
    """Exact ``E(Q_n)``, ``E(A_n)``, ``E(V_n)`` for ``n = 1..n_max`` (index ``n - 1``)."""

    n: np.ndarray
    EQ: np.ndarray
    EA: np.ndarray
    EV: np.ndarray


def rank_sum_moments(rule: Rule, n_max: int, exact: bool = False):
    """Expected rank sum, mean rank and ``Q/L^2`` by a joint forward recursion.

    Given ``L_n = l`` the one-step conditional mean of ``Q_{n+1}`` is affine in
    ``Q_n``, so ``W_n(l) = E(Q_n; L_n = l)`` evolves linearly alongside
    ``P(L_n = l)``::

        W'(l+1) += (W(l) + (l+1) P(l)) r/m
        W'(l)   += W(l) (m-r)/m + (W(l) - P(l) (r(r+1)/2 + r(l-r))) / m

    with ``m = n + 1`` and ``r = r(l)``.  ``E(A_n) = sum W(l)/l`` and
    ``E(V_n) = sum W(l)/l^2``.  With ``exact=True`` the recursion runs in
    Fractions and returns a list of ``(EQ, EA, EV)`` tuples.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    if exact:
        return _rank_sum_exact(rule, n_max)
    r = r_array(rule, n_max).astype(float)
    P = np.array([0.0, 1.0])
    W = np.array([0.0, 1.0])
    EQ, EA, EV = (np.empty(n_max) for _ in range(3))
    EQ[0] = EA[0] = EV[0] = 1.0
    for n in range(1, n_max):
        m = n + 1
        l = np.arange(n + 1, dtype=float)
        rr = r[: n + 1]
        keep = np.minimum(rr / m, 1.0)
        bump = np.where(rr <= l, (W - P * (rr * (rr + 1) / 2 + rr * (l - rr))) / m, 0.0)
        P2 = np.zeros(m + 1)
        W2 = np.zeros(m + 1)
        P2[1:] += keep * P
        P2[:-1] += (1.0 - keep) * P
        W2[1:] += (W + (l + 1) * P) * keep
        W2[:-1] += W * (1.0 - keep) + bump
        P, W = P2, W2
        inv = 1.0 / np.arange(1, m + 1)
        EQ[n] = W.sum()
        EA[n] = W[1:] @ inv
        EV[n] = W[1:] @ (inv * inv)
    return RankSumMoments(np.arange(1, n_max + 1), EQ, EA, EV)


def _rank_sum_exact(rule: Rule, n_max: int) -> list:
    P = [Fraction(0), Fraction(1)]
    W = [Fraction(0), Fraction(1)]
    out = [(Fraction(1), Fraction(1), Fraction(1))]
    for n in range(1, n_max):
        m = n + 1
        P2 = [Fraction(0)] * (m + 1)
        W2 = [Fraction(0)] * (m + 1)
        for l in range(n + 1):
            rr = r_value(rule, l)
            keep = Fraction(min(rr, m), m)
            P2[l + 1] += keep * P[l]
            P2[l] += (1 - keep) * P[l]
            W2[l + 1] += (W[l] + (l + 1) * P[l]) * keep
            W2[l] += W[l] * (1 - keep)
            if rr <= l:
                W2[l] += (W[l] - P[l] * (Fraction(rr * (rr + 1), 2) + rr * (l - rr))) / m
        P, W = P2, W2
        out.append((sum(W), sum(W[l] / l for l in range(1, m + 1)),
                    sum(W[l] / (l * l) for l in range(1, m + 1))))
    return out


def harmonic(n: int) -> float:
    return math.fsum(1.0 / i for i in range(1, n + 1))
