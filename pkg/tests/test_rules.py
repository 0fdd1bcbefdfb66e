import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from selectsets.rules import (
    KRecord,
    Percentile,
    Table,
    ceil_mul,
    parse_rule,
    r_array,
    r_value,
    validate_lsd,
)

fractions_p = st.builds(
    lambda den, num: Fraction(min(num, den), den),
    st.integers(1, 10**6),
    st.integers(1, 10**6),
)


def test_ceil_mul_examples():
    assert ceil_mul(Fraction(1, 2), 3) == 2
    assert ceil_mul(Fraction(1, 2), 0) == 1
    assert ceil_mul(Fraction(3, 4), 5) == 4


def test_ceil_mul_boundary_where_floats_fail():
    # (9/11) * 77 == 63.00000000000001 in binary floating point
    assert math.ceil(9 / 11 * 77) == 64
    assert ceil_mul(Fraction(9, 11), 77) == 63
    assert ceil_mul(Fraction(1, 10), 10) == 1


@settings(max_examples=300)
@given(fractions_p, st.integers(1, 10**6))
def test_ceil_mul_matches_extended_precision(p, k):
    got = ceil_mul(p, k)
    with mpmath.workdps(60):
        want = int(mpmath.ceil(mpmath.mpf(p.numerator) * k / p.denominator))
    assert got == want
    assert p * k <= got < p * k + 1


def test_ceil_mul_overflow():
    with pytest.raises(OverflowError):
        ceil_mul(Fraction(2**40 - 1, 2**40), 2**40)


def test_ceil_mul_rejects_negative():
    with pytest.raises(ValueError):
        ceil_mul(Fraction(1, 2), -1)


def test_percentile_rejects_float_and_out_of_range():
    with pytest.raises(TypeError):
        Percentile(0.5)
    with pytest.raises(ValueError):
        Percentile(Fraction(3, 2))
    with pytest.raises(ValueError):
        Percentile(0)
    assert Percentile(Fraction(2, 4)).p == Fraction(1, 2)


@pytest.mark.parametrize(
    "rule, a, expected",
    [
        (KRecord(3), 5, 3),
        (KRecord(3), 0, 1),
        (KRecord(3), 1, 2),
        (Percentile(1), 7, 7),
        (Table((1, 1, 2, 2)), 9, 2),
        (Table((1, 1, 2, 2)), 3, 2),
        (Table((5, 1)), 0, 1),
    ],
)
def test_r_value(rule, a, expected):
    assert r_value(rule, a) == expected


def test_median_pattern():
    m = Percentile(Fraction(1, 2))
    for j in range(1, 50):
        assert m.r(2 * j - 1) == m.r(2 * j) == j


@pytest.mark.parametrize(
    "rule", [Percentile(Fraction(3, 7)), KRecord(4), Table((1, 1, 2, 3, 3))], ids=str
)
def test_r_array_matches_scalar(rule):
    arr = r_array(rule, 200)
    assert arr.dtype == np.int64
    assert [rule.r(a) for a in range(201)] == arr.tolist()


def test_validate_percentile_large_range():
    report = validate_lsd(Percentile(Fraction(2, 5)), 10**6)
    assert report.ok and not report.violations


def test_validate_krecord_matches_exhaustive_check():
    rep = validate_lsd(KRecord(4), 10**4)
    r = [min(a + 1, 4) for a in range(10**4 + 1)]
    assert r[0] == 1
    assert all(0 <= r[a + 1] - r[a] <= 1 for a in range(10**4))
    assert rep.ok


def test_validate_reports_subdiagonal_violation():
    rep = validate_lsd(Table((1, 1, 3)), 3)
    assert not rep.ok
    assert [(v.axiom, v.a) for v in rep.violations] == [("subdiagonal", 1)]


def test_validate_reports_every_violation():
    rep = validate_lsd(Table((2, 1, 4, 3, 6)), 6)
    kinds = {(v.axiom, v.a) for v in rep.violations}
    assert kinds == {("r0", 0), ("subdiagonal", 1), ("monotone", 2), ("subdiagonal", 3)}


def test_validate_needs_positive_amax():
    with pytest.raises(ValueError):
        validate_lsd(KRecord(1), 0)


@pytest.mark.parametrize("rule", [Percentile(Fraction(i, 10)) for i in range(1, 11)] + [KRecord(k) for k in (1, 2, 5, 50)], ids=str)
def test_builtin_rules_are_lsd(rule):
    assert validate_lsd(rule, 10**6).ok


@pytest.mark.parametrize(
    "text, rule",
    [
        ("percentile:1/2", Percentile(Fraction(1, 2))),
        ("percentile:1", Percentile(1)),
        ("percentile:3/6", Percentile(Fraction(1, 2))),
        ("krecord:3", KRecord(3)),
        ("table:1,1,2,2", Table((1, 1, 2, 2))),
        (" PERCENTILE : 2/5 ", Percentile(Fraction(2, 5))),
    ],
)
def test_parse_rule(text, rule):
    assert parse_rule(text) == rule
    assert parse_rule(str(rule)) == rule


@pytest.mark.parametrize(
    "text",
    ["percentile:0.5", "percentile:1/0", "percentile:3/2", "krecord:0", "krecord:-1",
     "table:", "table:1,x", "table:0,1", "median", "percentile:1e-1"],
)
def test_parse_rule_rejects(text):
    with pytest.raises((ValueError, TypeError)):
        parse_rule(text)


@given(st.integers(0, 10**5))
def test_r_value_is_pure(a):
    rule = Percentile(Fraction(7, 9))
    assert r_value(rule, a) == r_value(rule, a)
