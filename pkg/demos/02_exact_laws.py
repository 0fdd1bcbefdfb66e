"""Exact law of the number retained, three ways."""
from fractions import Fraction

from selectsets import exact, oracle
from selectsets.rules import KRecord, median

# Brute force over all 3! orderings, in exact rationals.
res = oracle.enumerate_exact(median(), 3)
print("oracle  ", [str(f) for f in res.dist_L[1:]], "E(Q) =", res.E_Q)

# Integer counts out of n! and the floating-point DP agree with it.
print("counts  ", exact.count_dp(median(), 3))
print("float DP", exact.distribution(median(), 3).probs[1:])

# The DP goes much further. Mean growth for the median rule:
rep = exact.asymptotic_report(Fraction(1, 2), 10_000)
for n in (10, 100, 1000, 10_000):
    print(f"n={n:>6}  M_n={rep.M[n-1]:9.4f}  M_n/sqrt(n)={rep.T[n-1]:.4f}  d_n={rep.d[n-1]:.4f}")
print(rep.verdicts())

# One retention per new minimum: the mean is the harmonic number.
m = exact.distribution(KRecord(1), 10_000).mean
print("k=1:", m, exact.harmonic(10_000))

# Expected rank sum, mean rank and V_n = Q_n/L_n^2, exactly.
mom = exact.rank_sum_moments(median(), 6, exact=True)
for n, (eq, ea, ev) in enumerate(mom, start=1):
    print(n, eq, ea, ev)

# The conditional-mean identities hold on every short prefix.
print("conditional failures:", len(oracle.conditional_sweep(median(), 6)))
print("A* snapshots / failures:", *oracle.a_star_sweep(median(), 6))
