"""Single-pass streaming application of an LsD rule.

Smaller values are better.  The retention test uses the threshold form: ``x``
is kept iff it beats the ``r(L)``-th smallest *retained* value.  Because every
LsD rule keeps the ``r(L)`` best observations seen so far, this agrees with the
rank form ``rank(x) <= r(L)``; audit mode checks that agreement on every step.

Two implementations share the same semantics:

* :class:`StreamState` -- one trajectory, a sorted container, optional audit log.
* :func:`advance` -- a compiled kernel over a block of observations, used by the
  Monte Carlo driver.  It is tested step-for-step against :class:`StreamState`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from sortedcontainers import SortedList

from .rules import Rule, r_value

__all__ = [
    "TieError",
    "UnsupportedModeError",
    "UndefinedStatisticsError",
    "Statistics",
    "StreamState",
    "init",
    "advance",
    "KernelState",
    "STATUS_DONE",
    "STATUS_TIE",
    "STATUS_STOP",
]


class TieError(ValueError):
    """An observation equals a value already held; continuity is assumed."""


class UnsupportedModeError(RuntimeError):
    """The operation needs audit mode."""


class UndefinedStatisticsError(ValueError):
    """A/V are undefined while nothing is retained."""


@dataclass(frozen=True)
class Statistics:
    L: int
    Q: int
    A: float
    V: float


class StreamState:
    """Live state of one trajectory.

    Attributes
    ----------
    n : int
        Observations seen.
    L : int
        Number retained.
    Q : int
        Sum of the ranks (among all ``n`` observations) of the retained items.
    retained : SortedList
        Retained values, ascending.
    """

    def __init__(self, rule: Rule, audit: bool = False):
        self.rule = rule
        self.audit = audit
        self.n = 0
        self.L = 0
        self.Q = 0
        self.retained = SortedList()
        if audit:
            self.observed = SortedList()
            self.history: list[tuple[float, bool]] = []
            self.rank_mismatches = 0
        else:
            self.observed = None
            self.history = None

    def __repr__(self) -> str:
        return f"StreamState(rule={self.rule}, n={self.n}, L={self.L}, Q={self.Q}, audit={self.audit})"

    @property
    def threshold_index(self) -> int:
        """``j = r(L)``, the cutoff rank for the next observation."""
        return r_value(self.rule, self.L)

    def step(self, x: float) -> bool:
        """Observe ``x``; return whether it was retained."""
        L = self.L
        j = r_value(self.rule, L)
        pos = self.retained.bisect_left(x)
        if pos < L and self.retained[pos] == x:
            raise TieError(f"observation {x!r} ties a retained value")
        if self.audit:
            opos = self.observed.bisect_left(x)
            if opos < self.n and self.observed[opos] == x:
                raise TieError(f"observation {x!r} ties an observed value")
            rank_keep = opos + 1 <= j
        # pos = number of retained values better than x
        keep = pos < j
        if keep:
            self.retained.add(x)
            self.Q += L + 1
            self.L = L + 1
        else:
            self.Q += L - pos
        self.n += 1
        if self.audit:
            if rank_keep != keep:
                self.rank_mismatches += 1
            self.observed.add(x)
            self.history.append((x, keep))
        return keep

    def feed(self, xs) -> int:
        """Step through ``xs``; return how many were retained."""
        return sum(self.step(float(x)) for x in xs)

    def _need_audit(self, what: str):
        if not self.audit:
            raise UnsupportedModeError(f"{what} requires audit mode")

    def rank_of_new(self, x: float) -> int:
        """Rank ``x`` would take among the ``n + 1`` observations."""
        self._need_audit("rank_of_new")
        return self.observed.bisect_left(x) + 1

    def recompute_q(self) -> int:
        """Sum of the retained values' ranks, from scratch."""
        self._need_audit("recompute_q")
        return sum(self.observed.index(v) + 1 for v in self.retained)

    def statistics(self) -> Statistics:
        if self.L == 0:
            raise UndefinedStatisticsError("no retained items yet")
        return Statistics(self.L, self.Q, self.Q / self.L, self.Q / self.L**2)

    def check_theorem21(self) -> bool:
        """True iff the ``r(L)`` best observations so far are all retained.

        Since retained values are a subset of observed ones, this holds iff the
        ``m``-th smallest retained value equals the ``m``-th smallest observed
        value, ``m = min(r(L), n)``.
        """
        self._need_audit("check_theorem21")
        m = min(r_value(self.rule, self.L), self.n)
        if m == 0:
            return True
        if m > self.L:
            return False
        return self.retained[m - 1] == self.observed[m - 1]

    def q_bounds_ok(self) -> bool:
        L, n, Q = self.L, self.n, self.Q
        return L <= n and L * (L + 1) // 2 <= Q <= n * L - L * (L - 1) // 2


def init(rule: Rule, audit: bool = False) -> StreamState:
    return StreamState(rule, audit)


# ---------------------------------------------------------------------------
# compiled batch kernel

STATUS_DONE = 0
STATUS_TIE = 1
STATUS_STOP = 2


class KernelState:
    """Mutable buffers for :func:`advance`: sorted retained values and counters.

    ``counters`` holds ``[n, L, Q]`` as int64.
    """

    __slots__ = ("values", "counters")

    def __init__(self, capacity: int):
        self.values = np.empty(max(capacity, 1), dtype=np.float64)
        self.counters = np.zeros(3, dtype=np.int64)

    @property
    def n(self) -> int:
        return int(self.counters[0])

    @property
    def L(self) -> int:
        return int(self.counters[1])

    @property
    def Q(self) -> int:
        return int(self.counters[2])

    def retained(self) -> np.ndarray:
        return self.values[: self.L].copy()

    def ensure_capacity(self, size: int):
        if size > len(self.values):
            grown = np.empty(max(size, 2 * len(self.values)), dtype=np.float64)
            grown[: self.L] = self.values[: self.L]
            self.values = grown


@numba.njit(cache=True, nogil=True)
def _advance(xs, start, values, counters, r_tab, stop_L, grid, grid_pos, snap_L, snap_Q):
    n = counters[0]
    L = counters[1]
    Q = counters[2]
    g = grid_pos[0]
    n_grid = grid.shape[0]
    status = 0
    i = start
    while i < xs.shape[0]:
        x = xs[i]
        pos = np.searchsorted(values[:L], x)
        if pos < L and values[pos] == x:
            status = 1
            break
        if L < r_tab.shape[0]:
            j = r_tab[L]
        else:
            j = r_tab[r_tab.shape[0] - 1]
        if pos < j:
            # shift worse values right by one and insert
            k = L
            while k > pos:
                values[k] = values[k - 1]
                k -= 1
            values[pos] = x
            Q += L + 1
            L += 1
        else:
            Q += L - pos
        n += 1
        i += 1
        while g < n_grid and grid[g] == n:
            snap_L[g] = L
            snap_Q[g] = Q
            g += 1
        if L >= stop_L:
            status = 2
            break
    counters[0] = n
    counters[1] = L
    counters[2] = Q
    grid_pos[0] = g
    return status, i


def advance(state: KernelState, xs: np.ndarray, start: int, r_tab: np.ndarray,
            stop_L: int, grid: np.ndarray, grid_pos: np.ndarray,
            snap_L: np.ndarray, snap_Q: np.ndarray) -> tuple[int, int]:
    """Feed ``xs[start:]`` through the kernel.

    Stops at the end of ``xs`` (STATUS_DONE), on a tie with a retained value
    (STATUS_TIE, returned index is the offending observation, not consumed), or
    once ``L`` reaches ``stop_L`` (STATUS_STOP).  ``r_tab[a]`` must hold
    ``r(a)``; ``a`` beyond the table uses its last entry.  Snapshots of ``(L, Q)``
    are written whenever ``n`` hits the next entry of the ascending ``grid``.
    """
    state.ensure_capacity(min(state.L + (len(xs) - start), stop_L) + 1)
    status, i = _advance(xs, start, state.values, state.counters, r_tab, stop_L,
                         grid, grid_pos, snap_L, snap_Q)
    return int(status), int(i)
