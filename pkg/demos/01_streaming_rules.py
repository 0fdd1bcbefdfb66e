"""Feeding a stream through a selection rule, one observation at a time."""
from fractions import Fraction

import numpy as np

from selectsets import StreamState, median, parse_rule, validate_lsd
from selectsets.rules import KRecord, Table

# Rules are written as strings or built directly. p must be an exact fraction.
rule = parse_rule("percentile:1/2")
print(rule, [rule.r(a) for a in range(8)])

# A stream of small-is-good values. Retained items stay sorted.
s = StreamState(median(), audit=True)
for x in (0.4, 0.7, 0.2, 0.9, 0.05):
    kept = s.step(x)
    print(f"x={x:<5} kept={kept!s:<5} L={s.L} Q={s.Q} retained={list(s.retained)}")

# Audit mode can recompute ranks from scratch and check the top-block property.
print("Q recomputed:", s.recompute_q(), " top block ok:", s.check_theorem21())

# The statistics once the stream is long.
rng = np.random.default_rng(1)
s = StreamState(parse_rule("percentile:3/4"))
for x in rng.random(20_000):
    s.step(float(x))
print(s.statistics())

# Not every table is admissible.
for r in (Table((1, 1, 3)), KRecord(4), parse_rule(f"percentile:{Fraction(2, 7)}")):
    rep = validate_lsd(r, 50)
    print(r, "ok" if rep.ok else rep.violations)
