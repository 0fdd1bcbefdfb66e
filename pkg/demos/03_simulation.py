"""Replicated simulation: limit constants, V_n and inverse sampling."""
from fractions import Fraction

from selectsets import montecarlo as mc
from selectsets.rules import Percentile, median

cfg = mc.ExperimentConfig(median(), n_horizon=10_000, reps=500, master_seed=1)
table = mc.run_experiment(cfg)
print(table.to_csv())

# A few rows of the published limit table (n = 1e4, small rep count for speed).
for row in mc.table1(n=10_000, reps=300, seed=2, ps=(Fraction(1, 5), Fraction(4, 5))):
    print(f"p={row.p}  {row.stat:6}  {row.mean:.3f} ± {row.se:.3f}  ref {row.reference}  ok={row.ok}")

# Above p = 1/2, V_n settles near q_p.
rep = mc.v_limit_report(Fraction(4, 5), (100, 1000, 10_000), 500, seed=3)
print("q_p =", rep.target, rep.rows)

# At p = 1 the retained fraction is asymptotically uniform.
t = mc.run_experiment(mc.ExperimentConfig(Percentile(1), 2000, 2000, 4, (2000,)))
print("KS to U(0,1):", mc.ks_uniform(t.samples["L_norm"]))

# Waiting for the second retained item has an infinite mean; look at quantiles.
inv = mc.inverse_sampling(median(), 2, cap=10**5, reps=5000, seed=5)
print("P(N_2 > 10) =", inv.survival(10), " quantiles:", inv.quantiles())
