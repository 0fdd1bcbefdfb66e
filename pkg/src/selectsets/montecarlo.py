"""Seeded, replicated simulation of LsD rules.

Every replication ``i`` draws from its own PCG64 stream seeded by
``SeedSequence(master_seed, spawn_key=(i,))``, so results do not depend on the
order in which replications run or on the number of worker processes.
Aggregates use :func:`math.fsum`, which is exactly rounded and therefore
independent of summation order.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np
from scipy import stats as sps

from .engine import STATUS_STOP, STATUS_TIE, KernelState, StreamState, TieError, advance
from .exact import harmonic
from .rules import KRecord, Percentile, Rule, as_fraction, r_array

__all__ = [
    "REFERENCE_L",
    "REFERENCE_A",
    "REFERENCE_SE",
    "replication_rng",
    "default_grid",
    "a_n_normalizer",
    "q_limit",
    "TrajectoryRecord",
    "run_trajectory",
    "InverseMode",
    "ExperimentConfig",
    "SummaryRow",
    "SummaryTable",
    "run_experiment",
    "VLimitReport",
    "v_limit_report",
    "InverseReport",
    "inverse_sampling",
    "KRecordReport",
    "krecord_report",
    "Table1Row",
    "table1",
    "ks_uniform",
    "SUMMARY_COLUMNS",
    "resolve_workers",
]

# Published finite-n (n = 10,000) estimates for p = 1/10, ..., 10/10.
REFERENCE_L = {Fraction(i, 10): v for i, v in zip(range(1, 11), (
    4.178, 2.674, 2.111, 1.653, 1.181, 1.198, 1.045, 0.841, 0.693, 0.500))}
REFERENCE_A = {Fraction(i, 10): v for i, v in zip(range(1, 11), (
    0.238, 0.401, 0.578, 0.967, 0.214, 0.978, 0.634, 0.449, 0.351, 0.250))}
REFERENCE_SE = 0.002

SUMMARY_COLUMNS = ("n", "stat", "mean", "se", "reps", "seed")
_UNSET = 2**62  # stop_L that never triggers


def replication_rng(master_seed: int, rep: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(master_seed % 2**64, spawn_key=(rep,))))


def default_grid(n_horizon: int) -> tuple:
    grid = []
    g = 2
    while g < n_horizon:
        grid.append(g)
        g *= 2
    grid.append(n_horizon)
    return tuple(grid)


def a_n_normalizer(p, n) -> float:
    """Growth rate of the mean rank: ``n^(1-p)``, ``sqrt(n) log n`` or ``n^p``."""
    p = as_fraction(p)
    if np.any(np.asarray(n) < 2):
        raise ValueError("n must be >= 2")
    n = np.asarray(n, dtype=float)
    if p < Fraction(1, 2):
        out = n ** (1 - float(p))
    elif p == Fraction(1, 2):
        out = np.sqrt(n) * np.log(n)
    else:
        out = n ** float(p)
    return float(out) if out.ndim == 0 else out


def q_limit(p) -> float:
    """Limit of ``Q_n / L_n^2`` for ``p > 1/2``: ``p^2 / (2 (2p - 1))``."""
    p = as_fraction(p)
    if p <= Fraction(1, 2):
        raise ValueError("q_p is defined for p > 1/2")
    return float(p * p / (2 * (2 * p - 1)))


@dataclass(frozen=True)
class TrajectoryRecord:
    grid: np.ndarray
    L: np.ndarray
    Q: np.ndarray

    @property
    def A(self) -> np.ndarray:
        return self.Q / self.L

    @property
    def V(self) -> np.ndarray:
        return self.Q / self.L.astype(float) ** 2


def _check_grid(grid, n_horizon) -> np.ndarray:
    g = np.asarray(grid, dtype=np.int64)
    if g.ndim != 1 or np.any(np.diff(g) <= 0) or (len(g) and (g[0] < 1 or g[-1] > n_horizon)):
        raise ValueError("grid must be strictly increasing within 1..n_horizon")
    return g


def _simulate(rule: Rule, n_horizon: int, grid: np.ndarray, rng: np.random.Generator,
              r_tab: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    xs = rng.random(n_horizon)
    state = KernelState(min(n_horizon, 1024))
    snap_L = np.zeros(len(grid), dtype=np.int64)
    snap_Q = np.zeros(len(grid), dtype=np.int64)
    gpos = np.zeros(1, dtype=np.int64)
    i = 0
    while True:
        status, i = advance(state, xs, i, r_tab, _UNSET, grid, gpos, snap_L, snap_Q)
        if status != STATUS_TIE:
            break
        xs[i] = rng.random()
    return snap_L, snap_Q


def _simulate_python(rule, n_horizon, grid, rng, audit=False):
    xs = rng.random(n_horizon)
    state = StreamState(rule, audit=audit)
    snap_L = np.zeros(len(grid), dtype=np.int64)
    snap_Q = np.zeros(len(grid), dtype=np.int64)
    g = 0
    for i in range(n_horizon):
        while True:
            try:
                state.step(float(xs[i]))
                break
            except TieError:
                xs[i] = rng.random()
        while g < len(grid) and grid[g] == state.n:
            snap_L[g], snap_Q[g] = state.L, state.Q
            g += 1
    return snap_L, snap_Q, state


def run_trajectory(rule: Rule, n_horizon: int, grid=None, rng=None, engine: str = "kernel") -> TrajectoryRecord:
    """One trajectory of i.i.d. uniforms, snapshotting ``(L, Q)`` on ``grid``.

    ``engine="python"`` drives :class:`StreamState` on the same uniforms; both
    engines redraw a tied observation from the same stream and agree exactly.
    """
    if n_horizon < 1:
        raise ValueError("n_horizon must be >= 1")
    grid = _check_grid(default_grid(n_horizon) if grid is None and n_horizon > 1 else (grid or (n_horizon,)), n_horizon)
    if rng is None:
        rng = np.random.default_rng()
    if engine == "kernel":
        L, Q = _simulate(rule, n_horizon, grid, rng, r_array(rule, n_horizon))
    elif engine == "python":
        L, Q, _ = _simulate_python(rule, n_horizon, grid, rng)
    else:
        raise ValueError(f"unknown engine {engine!r}")
    return TrajectoryRecord(grid, L, Q)


@dataclass(frozen=True)
class InverseMode:
    m_target: int
    cap: int = 10**6


@dataclass(frozen=True)
class ExperimentConfig:
    rule: Rule
    n_horizon: int
    reps: int
    master_seed: int = 0
    grid: Optional[tuple] = None
    mode: Union[str, InverseMode] = "forward"

    def __post_init__(self):
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if self.n_horizon < 2:
            raise ValueError("n_horizon must be >= 2")
        grid = default_grid(self.n_horizon) if self.grid is None else tuple(int(g) for g in self.grid)
        g = _check_grid(grid, self.n_horizon)
        if g[0] < 2:
            raise ValueError("grid points must be >= 2 (log and normalisers need n >= 2)")
        object.__setattr__(self, "grid", grid)


@dataclass(frozen=True)
class SummaryRow:
    n: int
    stat: str
    mean: float
    se: float
    reps: int
    seed: int


def _mean_se(x: np.ndarray) -> tuple[float, float]:
    x = [float(v) for v in x]
    m = math.fsum(x) / len(x)
    if len(x) < 2:
        return m, 0.0
    var = math.fsum((v - m) ** 2 for v in x) / (len(x) - 1)
    return m, math.sqrt(var / len(x))


@dataclass
class SummaryTable:
    """Replication means and standard errors per grid point and statistic.

    ``samples`` maps each statistic to its per-replication values at the
    horizon; ``histogram`` is ``(bin_lo, bin_hi, mass)`` for the first
    statistic (``L_n / n^p`` for percentile rules) at the horizon.
    """

    config: ExperimentConfig
    rows: list
    histogram: list
    samples: dict = field(repr=False, default_factory=dict)
    raw: Optional[tuple] = field(repr=False, default=None)

    def get(self, stat: str, n: Optional[int] = None) -> SummaryRow:
        n = self.config.n_horizon if n is None else n
        for row in self.rows:
            if row.stat == stat and row.n == n:
                return row
        raise KeyError((stat, n))

    @property
    def stats(self) -> list:
        return list(dict.fromkeys(r.stat for r in self.rows))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for r in self.rows:
            w.writerow([r.n, r.stat, format(r.mean, ".17g"), format(r.se, ".17g"), r.reps, r.seed])
        return buf.getvalue()

    def histogram_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("bin_lo", "bin_hi", "mass"))
        for lo, hi, mass in self.histogram:
            w.writerow([format(lo, ".17g"), format(hi, ".17g"), format(mass, ".17g")])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps({
            "rows": [dict(zip(SUMMARY_COLUMNS, (r.n, r.stat, r.mean, r.se, r.reps, r.seed))) for r in self.rows],
            "histogram": [{"bin_lo": lo, "bin_hi": hi, "mass": m} for lo, hi, m in self.histogram],
        }, indent=2)


def _statistics(rule: Rule, grid: np.ndarray, L: np.ndarray, Q: np.ndarray) -> dict:
    n = grid.astype(float)
    Lf = L.astype(float)
    Qf = Q.astype(float)
    A = Qf / Lf
    V = Qf / Lf**2
    if isinstance(rule, Percentile):
        pf = float(rule.p)
        out = {"L_norm": Lf / n**pf, "A_norm": A / a_n_normalizer(rule.p, grid), "V": V}
        if rule.p == Fraction(1, 2):
            out["V_log"] = V / np.log(n)
        return out
    return {"L": Lf, "L_log": Lf / np.log(n), "Q_norm": Qf / (n + 1), "A": A, "V": V}


def _histogram(x: np.ndarray, bins: int = 40) -> list:
    hi = float(np.max(x)) if len(x) else 1.0
    hi = max(hi, 1e-12)
    counts, edges = np.histogram(x, bins=bins, range=(0.0, hi))
    mass = counts / counts.sum()
    return [(float(edges[i]), float(edges[i + 1]), float(mass[i])) for i in range(bins)]


def _block(rule: Rule, n_horizon: int, grid: tuple, seed: int, lo: int, hi: int):
    g = np.asarray(grid, dtype=np.int64)
    r_tab = r_array(rule, n_horizon)
    L = np.empty((hi - lo, len(g)), dtype=np.int64)
    Q = np.empty_like(L)
    for i, rep in enumerate(range(lo, hi)):
        L[i], Q[i] = _simulate(rule, n_horizon, g, replication_rng(seed, rep), r_tab)
    return L, Q


def resolve_workers(workers: Optional[int]) -> int:
    if workers is None:
        env = os.environ.get("SELECTSETS_WORKERS")
        workers = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(workers))


def _run_blocks(rule, n_horizon, grid, seed, reps, workers):
    workers = resolve_workers(workers)
    if workers == 1 or reps < 2:
        return _block(rule, n_horizon, grid, seed, 0, reps)
    edges = np.linspace(0, reps, min(workers * 4, reps) + 1).astype(int)
    with ProcessPoolExecutor(max_workers=workers) as ex:
        parts = list(ex.map(_block, *zip(*[(rule, n_horizon, grid, seed, int(a), int(b))
                                             for a, b in zip(edges[:-1], edges[1:]) if b > a])))
    return np.vstack([p[0] for p in parts]), np.vstack([p[1] for p in parts])


def run_experiment(config: ExperimentConfig, workers: Optional[int] = 1):
    """Run ``config.reps`` replications and summarise them.

    Forward mode returns a :class:`SummaryTable`; inverse mode returns an
    :class:`InverseReport` from :func:`inverse_sampling`.
    """
    if isinstance(config.mode, InverseMode):
        return inverse_sampling(config.rule, config.mode.m_target, config.mode.cap,
                                config.reps, config.master_seed)
    if config.mode != "forward":
        raise ValueError(f"unknown mode {config.mode!r}")
    grid = np.asarray(config.grid, dtype=np.int64)
    L, Q = _run_blocks(config.rule, config.n_horizon, config.grid, config.master_seed, config.reps, workers)
    stats = _statistics(config.rule, grid, L, Q)
    rows = []
    for gi, n in enumerate(grid):
        for name, values in stats.items():
            m, se = _mean_se(values[:, gi])
            rows.append(SummaryRow(int(n), name, m, se, config.reps, config.master_seed))
    samples = {name: values[:, -1].copy() for name, values in stats.items()}
    first = next(iter(stats))
    return SummaryTable(config, rows, _histogram(samples[first]), samples, (L, Q))


@dataclass
class VLimitReport:
    p: Fraction
    target: Optional[float]
    stat: str
    rows: list  # (n, mean, se, gap)
    converging: Optional[bool]
    histogram: Optional[list] = None

    @property
    def supported(self) -> bool:
        return self.target is not None


def v_limit_report(p, grid: Sequence[int], reps: int, seed: int = 0, workers: Optional[int] = 1) -> VLimitReport:
    """``E(V_n)`` against ``q_p`` for ``p > 1/2``; ``E(V_n / log n)`` against 1/8 at ``p = 1/2``.

    For ``p > 1/2`` ``converging`` means the absolute gap shrinks along the
    grid; at ``p = 1/2`` it means the estimates decrease along the grid.  For
    ``p < 1/2`` the limit is random, so the report carries no target and only
    a histogram of ``A_n / n^(1-p)`` at the last grid point.
    """
    p = as_fraction(p)
    grid = tuple(int(g) for g in grid)
    cfg = ExperimentConfig(Percentile(p), max(grid), reps, seed, grid)
    table = run_experiment(cfg, workers)
    if p < Fraction(1, 2):
        return VLimitReport(p, None, "A_norm", [], None, _histogram(table.samples["A_norm"]))
    stat, target = ("V_log", 1 / 8) if p == Fraction(1, 2) else ("V", q_limit(p))
    rows = []
    for n in grid:
        r = table.get(stat, n)
        rows.append((n, r.mean, r.se, r.mean - target))
    if stat == "V_log":
        converging = all(b[1] < a[1] for a, b in zip(rows, rows[1:]))
    else:
        converging = all(abs(b[3]) <= abs(a[3]) for a, b in zip(rows, rows[1:]))
    return VLimitReport(p, target, stat, rows, converging)


@dataclass
class InverseReport:
    """Observations ``N_m`` needed to retain ``m_target`` items, censored at ``cap``."""

    rule: Rule
    m_target: int
    cap: int
    N: np.ndarray
    censored: np.ndarray
    seed: int

    @property
    def reps(self) -> int:
        return len(self.N)

    @property
    def censor_rate(self) -> float:
        return float(self.censored.mean())

    def survival(self, n: int) -> tuple[float, float]:
        """Empirical ``P(N_m > n)`` and its binomial standard error (``n < cap``)."""
        if n >= self.cap:
            raise ValueError("survival beyond the cap is not observable")
        s = float(np.mean(self.N > n))
        return s, math.sqrt(s * (1 - s) / self.reps)

    def quantiles(self, qs=(0.1, 0.25, 0.5, 0.75, 0.9, 0.99)) -> dict:
        # censored values sit at cap, so quantiles below 1 - censor_rate are exact
        return {q: float(np.quantile(self.N, q, method="inverted_cdf")) for q in qs}

    def mean(self) -> float:
        """Mean of the (censored) ``N_m``; ``E(N_m)`` itself is infinite for ``m >= 2``."""
        if self.m_target >= 2:
            warnings.warn("N_m has infinite mean for m >= 2; this is a censored mean", RuntimeWarning, stacklevel=2)
        return math.fsum(float(v) for v in self.N) / self.reps

    def growth(self) -> Optional[tuple[float, float]]:
        """Mean and SE of ``m / N_m^p`` over uncensored replications (percentile rules)."""
        if not isinstance(self.rule, Percentile):
            return None
        ok = ~self.censored
        if not ok.any():
            return None
        return _mean_se(self.m_target / self.N[ok].astype(float) ** float(self.rule.p))

    def rows(self, checkpoints=(10, 100)) -> list:
        out = []
        for n in checkpoints:
            if n < self.cap:
                s, se = self.survival(n)
                out.append(SummaryRow(n, "survival", s, se, self.reps, self.seed))
        out.append(SummaryRow(self.cap, "censor_rate", self.censor_rate,
                              math.sqrt(self.censor_rate * (1 - self.censor_rate) / self.reps), self.reps, self.seed))
        for q, v in self.quantiles().items():
            out.append(SummaryRow(self.m_target, f"N_q{q:g}", v, float("nan"), self.reps, self.seed))
        g = self.growth()
        if g is not None:
            out.append(SummaryRow(self.m_target, "m_over_N_pow_p", g[0], g[1], self.reps, self.seed))
        return out


def _inverse_one(rule: Rule, m_target: int, cap: int, rng, r_tab) -> tuple[int, bool]:
    state = KernelState(m_target + 1)
    empty = np.zeros(0, dtype=np.int64)
    gpos = np.zeros(1, dtype=np.int64)
    block = 64
    while state.n < cap:
        xs = rng.random(min(block, cap - state.n))
        i = 0
        while True:
            status, i = advance(state, xs, i, r_tab, m_target, empty, gpos, empty, empty)
            if status != STATUS_TIE:
                break
            xs[i] = rng.random()
        if status == STATUS_STOP:
            return state.n, True
        block *= 2
    return state.n, False


def inverse_sampling(rule: Rule, m_target: int, cap: int = 10**6, reps: int = 1000, seed: int = 0) -> InverseReport:
    """Run each replication until ``m_target`` items are retained or ``cap`` observations are made."""
    if m_target < 1 or cap < m_target:
        raise ValueError("need 1 <= m_target <= cap")
    r_tab = r_array(rule, m_target)
    N = np.empty(reps, dtype=np.int64)
    done = np.empty(reps, dtype=bool)
    for rep in range(reps):
        rng = replication_rng(seed, rep)
        N[rep], done[rep] = _inverse_one(rule, m_target, cap, rng, r_tab)
    return InverseReport(rule, m_target, cap, N, ~done, seed)


@dataclass
class KRecordReport:
    k: int
    rows: list  # (n, E(L)/log n, se, E(Q)/(n+1), se, E(L), se, H_n or None)
    table: SummaryTable = field(repr=False)

    def harmonic_z(self, n: int) -> Optional[float]:
        for row in self.rows:
            if row[0] == n and row[7] is not None:
                return (row[5] - row[7]) / row[6] if row[6] > 0 else float("inf")
        return None


def krecord_report(k: int, grid: Sequence[int], reps: int, seed: int = 0, workers: Optional[int] = 1) -> KRecordReport:
    """``E(L_n)/log n`` (limit ``k``) and ``E(Q_n)/(n+1)`` (limit ``k``) along ``grid``."""
    grid = tuple(int(g) for g in grid)
    table = run_experiment(ExperimentConfig(KRecord(k), max(grid), reps, seed, grid), workers)
    rows = []
    for n in grid:
        ll, qn, lraw = table.get("L_log", n), table.get("Q_norm", n), table.get("L", n)
        rows.append((n, ll.mean, ll.se, qn.mean, qn.se, lraw.mean, lraw.se, harmonic(n) if k == 1 else None))
    return KRecordReport(k, rows, table)


@dataclass(frozen=True)
class Table1Row:
    p: Fraction
    stat: str
    mean: float
    se: float
    reference: float
    tolerance: float

    @property
    def ok(self) -> bool:
        return abs(self.mean - self.reference) <= self.tolerance


def table1(n: int = 10_000, reps: int = 2000, seed: int = 0, workers: Optional[int] = 1,
           ps: Sequence = tuple(Fraction(i, 10) for i in range(1, 11))) -> list:
    """Simulated ``E(L_n/n^p)`` and ``E(A_n/a_n(p))`` next to the published estimates.

    Tolerance is ``max(3 * sqrt(se^2 + 0.002^2), 0.05)``.
    """
    out = []
    for p in ps:
        p = as_fraction(p)
        table = run_experiment(ExperimentConfig(Percentile(p), n, reps, seed, (n,)), workers)
        for stat, ref in (("L_norm", REFERENCE_L), ("A_norm", REFERENCE_A)):
            row = table.get(stat, n)
            tol = max(3 * math.hypot(row.se, REFERENCE_SE), 0.05)
            out.append(Table1Row(p, stat, row.mean, row.se, ref.get(p, float("nan")), tol))
    return out


def ks_uniform(sample: np.ndarray) -> float:
    """Kolmogorov-Smirnov distance between ``sample`` and U(0, 1)."""
    return float(sps.kstest(np.asarray(sample, dtype=float), "uniform").statistic)
