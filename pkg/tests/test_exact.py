import math
from fractions import Fraction

import numpy as np
import pytest

from conftest import SMALL_RULES, rule_id
from selectsets import exact
from selectsets.rules import KRecord, Percentile, Table, median

HALF = Fraction(1, 2)


def test_median_n3_matches_permutation_brute_force(brute_law):
    dist, EQ, Qs = brute_law(median(), 3)
    # frozen from enumerating the 6 orderings: L-counts 2, 3, 1
    assert dist == [0, Fraction(1, 3), Fraction(1, 2), Fraction(1, 6)]
    assert Qs == [1, 1, 3, 3, 4, 6]
    assert EQ == 3
    probs = exact.distribution(median(), 3).probs
    assert probs == pytest.approx([0, 1 / 3, 1 / 2, 1 / 6], abs=1e-15)
    assert exact.exact_distribution(median(), 3) == dist


def test_p_one_n3_is_uniform(brute_law):
    dist, _, _ = brute_law(Percentile(1), 3)
    assert dist[1:] == [Fraction(1, 3)] * 3
    assert exact.distribution(Percentile(1), 3).probs[1:] == pytest.approx([1 / 3] * 3)


@pytest.mark.parametrize("rule", SMALL_RULES, ids=rule_id)
def test_first_step_always_retains(rule):
    d = exact.distribution(rule, 1)
    assert d.probs.tolist() == [0.0, 1.0]


@pytest.mark.parametrize("rule", SMALL_RULES + [Table((1, 1, 2, 2, 3))], ids=rule_id)
@pytest.mark.parametrize("n", range(1, 8))
def test_count_dp_equals_brute_force(rule, n, brute_law):
    dist, _, _ = brute_law(rule, n)
    assert exact.exact_distribution(rule, n) == dist
    assert exact.distribution(rule, n).probs == pytest.approx([float(f) for f in dist], abs=1e-12)


@pytest.mark.parametrize("rule", [median(), Percentile(Fraction(1, 10)), KRecord(2), Percentile(1)], ids=rule_id)
def test_probability_conservation(rule):
    for d in exact.distributions(rule, 10_000):
        if d.n % 500 == 0 or d.n < 20:
            assert abs(d.probs.sum() - 1) < 1e-12
            assert d.probs[0] == 0.0
            assert np.all((d.probs >= 0) & (d.probs <= 1))


def test_d_value_examples():
    assert exact.d_value(exact.distribution(median(), 3)) == pytest.approx(0.25, abs=1e-15)
    assert exact.d_value(exact.distribution(median(), 1)) == 0.5
    for n in (1, 5, 40):
        assert exact.d_value(exact.distribution(Percentile(1), n)) == 0.0


def test_d_value_for_median_is_half_odd_probability():
    for d in exact.distributions(median(), 200):
        assert exact.d_value(d) == pytest.approx(d.probs[1::2].sum() / 2, abs=1e-14)


def test_d_value_rejects_other_rules():
    with pytest.raises(exact.UnsupportedRuleError):
        exact.d_value(exact.distribution(KRecord(2), 4))


def test_overshoot_exact():
    p = Fraction(1, 4)
    assert exact.overshoot(p, np.arange(8)).tolist() == [0, 0.75, 0.5, 0.25, 0, 0.75, 0.5, 0.25]


def test_mean_recursion_examples():
    s = exact.mean_recursion(Percentile(1), 9)
    assert s.M[8] == pytest.approx(5.0, rel=1e-14)
    s = exact.mean_recursion(HALF, 3)
    assert s.M[2] == pytest.approx(11 / 6, rel=1e-14)
    assert s.M[0] == 1.0


@pytest.mark.parametrize("p", [Fraction(1, 10), Fraction(1, 4), HALF, Fraction(2, 3), Fraction(9, 10), Fraction(1)])
def test_two_path_mean_agreement(p):
    s = exact.mean_recursion(p, 10_000)
    assert np.max(np.abs(s.M - s.M_recursion) / s.M) < 1e-9


def test_mean_recursion_detects_disagreement(monkeypatch):
    real = exact.overshoot
    monkeypatch.setattr(exact, "overshoot", lambda p, j: real(p, j) + 0.01)
    with pytest.raises(exact.ConsistencyError):
        exact.mean_recursion(HALF, 50)


def test_neighbour_inequality_n2():
    d = exact.distribution(Percentile(Fraction(1, 3)), 2)
    assert d.probs.tolist() == [0.0, 0.5, 0.5]
    assert exact.check_ineq_41(d) == (True, None)


def test_neighbour_inequality_reports_violation():
    bad = exact.LDistribution(median(), 3, np.array([0.0, 0.1, 0.8, 0.1]))
    assert exact.check_ineq_41(bad) == (False, 2)
    # n = 1 sits outside the range where the inequality holds
    assert exact.check_ineq_41(exact.distribution(median(), 1)) == (False, 1)


@pytest.mark.parametrize("p", [Fraction(1, 4), HALF, Fraction(3, 4)])
def test_neighbour_inequality_sweep(p):
    for d in exact.distributions(Percentile(p), 2000):
        if d.n >= 2:
            assert exact.check_ineq_41(d)[0], d.n


def test_expected_q_examples(brute_law):
    assert exact.expected_q(median(), 3).tolist() == pytest.approx([1, 2, 3])
    assert exact.expected_q(median(), 3, exact=True) == [1, 2, 3]
    assert exact.expected_q(Percentile(1), 2, exact=True)[1] == 2
    assert brute_law(Percentile(1), 2)[1] == 2
    for rule in SMALL_RULES:
        assert exact.expected_q(rule, 1, exact=True) == [1]


@pytest.mark.parametrize("rule", SMALL_RULES, ids=rule_id)
def test_expected_q_matches_brute_force(rule, brute_law):
    eq = exact.expected_q(rule, 7, exact=True)
    eqf = exact.expected_q(rule, 7)
    for n in range(1, 8):
        assert eq[n - 1] == brute_law(rule, n)[1]
        assert eqf[n - 1] == pytest.approx(float(eq[n - 1]), rel=1e-13)


def test_krecord1_mean_is_harmonic():
    M = np.array([d.mean for d in exact.distributions(KRecord(1), 10_000)])
    H = np.cumsum(1.0 / np.arange(1, 10_001))
    assert np.max(np.abs(M - H) / H) < 1e-9
    assert exact.harmonic(10_000) == pytest.approx(9.787606036044348, rel=1e-15)


def test_p_one_mean_exact_integer_dp():
    for n in (1, 2, 3, 10, 57):
        counts = exact.count_dp(Percentile(1), n)
        assert 2 * sum(j * c for j, c in enumerate(counts)) == (n + 1) * math.factorial(n)
        assert counts[1:] == [math.factorial(n - 1)] * n


def test_asymptotic_report_p_one():
    rep = exact.asymptotic_report(Percentile(1), 200)
    assert rep.T == pytest.approx((rep.n + 1) / (2 * rep.n), rel=1e-12)
    assert rep.T_bounded and rep.e_nondecreasing and rep.ineq41_ok
    assert rep.d_bounded_below  # epsilon is 0 at p = 1


def test_asymptotic_report_median_to_1e4():
    rep = exact.asymptotic_report(HALF, 10_000)
    assert abs(rep.T[-1] - 1.181) < 0.02
    assert rep.ok
    assert np.all(rep.d >= 1 / 12)
    assert rep.T_fluctuation < 0.02


def test_asymptotic_report_csv_round_trip():
    import csv
    import io
    rep = exact.asymptotic_report(Fraction(3, 10), 30)
    rows = list(csv.reader(io.StringIO(rep.to_csv())))
    assert tuple(rows[0]) == exact.EXACT_COLUMNS
    assert len(rows) == 31
    assert all(len(r) == 8 for r in rows)
    assert float(rows[3][1]) == rep.M[2]


def test_asymptotic_report_requires_n10():
    with pytest.raises(ValueError):
        exact.asymptotic_report(HALF, 9)


def test_tail_decreases_like_power_law():
    for k in range(2, 6):
        tail = exact.tail_probabilities(median(), 10_000, k)
        n = np.arange(1, 10_001)
        assert np.all(np.diff(tail[k:]) <= 1e-15)
        scaled = tail * np.sqrt(n)
        assert scaled[-1] <= scaled[100:].max() and scaled.max() < 10


def test_tail_single_retention_is_one_over_n():
    tail = exact.tail_probabilities(median(), 500, 2)
    assert tail == pytest.approx(1 / np.arange(1, 501), rel=1e-12)


@pytest.mark.parametrize("rule", SMALL_RULES + [Table((1, 1, 1, 3))], ids=rule_id)
def test_rank_sum_moments_float_vs_exact(rule):
    ex = exact.rank_sum_moments(rule, 8, exact=True)
    fl = exact.rank_sum_moments(rule, 8)
    for n in range(1, 9):
        EQ, EA, EV = ex[n - 1]
        assert (fl.EQ[n - 1], fl.EA[n - 1], fl.EV[n - 1]) == pytest.approx((float(EQ), float(EA), float(EV)), rel=1e-12)


def test_rank_sum_eq_matches_q_recursion():
    for rule in (median(), Percentile(Fraction(4, 5)), KRecord(3)):
        assert exact.rank_sum_moments(rule, 3000).EQ == pytest.approx(exact.expected_q(rule, 3000), rel=1e-11)


def test_rank_sum_p_one_closed_form():
    # Q = L(L+1)/2 and L_n uniform on 1..n, so E(V_n) = mean of (l+1)/(2l)
    m = exact.rank_sum_moments(Percentile(1), 500)
    for n in (1, 7, 500):
        l = np.arange(1, n + 1)
        assert m.EV[n - 1] == pytest.approx(np.mean((l + 1) / (2 * l)), rel=1e-12)
