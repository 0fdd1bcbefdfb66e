import itertools
import math
from collections import Counter
from fractions import Fraction

import pytest

from selectsets.engine import StreamState
from selectsets.rules import KRecord, Percentile

# rule families used across the suite
PERCENTILES = [Percentile(Fraction(k, 4)) for k in (1, 2, 3, 4)]
KRECORDS = [KRecord(k) for k in (1, 2, 3)]
SMALL_RULES = PERCENTILES + KRECORDS
BUILTIN_RULES = [Percentile(Fraction(i, 10)) for i in (1, 5, 9, 10)] + [KRecord(1), KRecord(5)] + SMALL_RULES


def rule_id(rule):
    return str(rule)


def permutation_law(rule, n):
    """L_n and Q_n over all n! orderings, by replaying the engine on literal permutations.

    Independent of the oracle's relative-rank enumeration.
    """
    L_counts = Counter()
    Q_total = 0
    Qs = []
    for perm in itertools.permutations(range(n)):
        s = StreamState(rule)
        for v in perm:
            s.step(float(v))
        L_counts[s.L] += 1
        Q_total += s.Q
        Qs.append(s.Q)
    total = math.factorial(n)
    dist = [Fraction(L_counts.get(j, 0), total) for j in range(n + 1)]
    return dist, Fraction(Q_total, total), sorted(Qs)


@pytest.fixture
def brute_law():
    return permutation_law
