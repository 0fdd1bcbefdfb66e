"""How fast does V_n / log n settle for the median rule?

The exact expectation comes from the joint recursion over (L_n, Q_n) and is
compared with a replicated simulation. Convergence is logarithmic and the
exact values still rise at n = 1e5, while 2000-rep simulated means are too
noisy to show the direction.
"""
import math

from fractions import Fraction

from selectsets import exact
from selectsets import montecarlo as mc
from selectsets.rules import median

grid = (100, 1000, 10_000)
mom = exact.rank_sum_moments(median(), max(grid))
rep = mc.v_limit_report(Fraction(1, 2), grid, 2000, seed=7)
print(f"{'n':>6} {'exact':>8} {'sim':>8} {'se':>7}   E(A)/E(L) / log n")
for (n, m, se, _) in rep.rows:
    ev = mom.EV[n - 1] / math.log(n)
    ratio = mom.EA[n - 1] / exact.distribution(median(), n).mean / math.log(n)
    print(f"{n:>6} {ev:8.4f} {m:8.4f} {se:7.4f}   {ratio:.4f}")
