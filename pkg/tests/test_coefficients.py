import math
from fractions import Fraction

import gmpy2
import pytest
from hypothesis import given, settings, strategies as st

from illiquid_fp import ModelParams, Truncation, build_full, build_truncated, residual_check
from illiquid_fp._mp import precision
from illiquid_fp.coefficients import CoefficientTable, normalization_constant

from conftest import full, truncated


def test_normalization_constant():
    assert float(normalization_constant(ModelParams(1.0))) == pytest.approx(1 / math.sqrt(2 * math.pi), rel=1e-15)
    assert float(normalization_constant(ModelParams(0.1))) == pytest.approx(3.989422804014327, rel=1e-15)


def test_first_row_only_a12():
    tb = full(0.1, 0.005, 0.3, 4)
    assert float(tb[1, 2]) == pytest.approx(-199.47114020071634, rel=1e-15)
    assert tb[1, 0] == 0 and tb[1, 1] == 0
    with precision(256):
        assert tb[1, 2] == -tb.a00 / (2 * gmpy2.mpfr("0.01"))


def test_gaussian_diagonal_exact():
    tb = build_full(ModelParams(1.0, 0.0, 0.0), Truncation(12))
    for n in range(1, 13):
        want = Fraction(-1, 2) ** n / math.factorial(n)
        assert float(tb[n, 2 * n] / tb.a00) == pytest.approx(float(want), rel=1e-30)
    assert float(tb[2, 4] / tb.a00) == 0.125
    assert float(tb[3, 6] / tb.a00) == pytest.approx(-1 / 48, rel=1e-15)


def test_gaussian_closure_sigma_01():
    tb = full(0.1, 0.0, 0.0, 30)
    with precision(256):
        for n in range(1, 31):
            v = tb[n, 2 * n] * (2 * gmpy2.mpfr("0.01")) ** n * math.factorial(n) / tb.a00
            assert abs(v - (-1) ** n) < gmpy2.mpfr(2) ** -200


def test_k1_is_gaussian_table():
    a = truncated(0.1, 0.005, 0.0, 20, 1)
    for n, m, v in a.entries():
        if m != 2 * n:
            assert v == 0
    with precision(256):
        for n in range(1, 21):
            want = a.a00 * (-1 / (2 * gmpy2.mpfr("0.01"))) ** n / math.factorial(n)
            assert abs(a[n, 2 * n] - want) <= abs(want) * gmpy2.mpfr(2) ** -240


def test_k2_adds_one_diagonal():
    a = truncated(0.1, 0.005, 0.0, 15, 2)
    for n in range(2, 16):
        assert a[n, 2 * n - 2] != 0
        for m in range(0, 2 * n - 2):
            assert a[n, m] == 0


@pytest.mark.parametrize("K", [1, 2, 3, 5])
def test_epsilon_zero_any_k_equals_k1(K):
    a = truncated(0.1, 0.0, 0.0, 20, K)
    b = truncated(0.1, 0.0, 0.0, 20, 1)
    assert [v for *_, v in a.entries()] == [v for *_, v in b.entries()]


@pytest.mark.parametrize("builder", ["full", "truncated"])
def test_odd_entries_vanish_without_imbalance(builder):
    tb = full(0.1, 0.005, 0.0, 25) if builder == "full" else truncated(0.1, 0.005, 0.0, 25, 4)
    assert all(v == 0 for n, m, v in tb.entries() if m % 2)


def test_odd_entries_present_with_imbalance():
    tb = full(0.1, 0.005, 0.5, 6)
    assert any(v != 0 for n, m, v in tb.entries() if m % 2)


@pytest.mark.parametrize("K", [1, 2, 3, 4, 6])
def test_band_property(K):
    tb = truncated(0.1, 0.005, 0.0, 40, K)
    for n in range(1, 41):
        lo = max(2 * (n - K + 1), 2)
        for m in range(0, 2 * n + 1):
            if m < lo or m % 2:
                assert tb[n, m] == 0, (n, m)
            else:
                assert tb[n, m] != 0, (n, m)


@pytest.mark.parametrize("K", [1, 3, 5])
def test_truncated_is_full_on_band(K):
    a = truncated(0.1, 0.005, 0.0, 40, K)
    b = full(0.1, 0.005, 0.0, 40)
    for n, m, v in a.entries():
        if m >= 2 * (n - K + 1):
            assert v == b[n, m]


def test_diagonal_decay_ratio():
    tb = full(0.1, 0.005, 0.0, 60)
    for n in (20, 40, 59):
        r = abs(float(tb[n + 1, 2 * n + 2] / tb[n, 2 * n]))
        assert r == pytest.approx(1 / (2 * 0.01 * (n + 1)), rel=1e-12)


def test_residual_gaussian_is_zero():
    assert residual_check(full(0.1, 0.0, 0.0, 30)) < gmpy2.mpfr(2) ** -240


@pytest.mark.parametrize("eta", [0.0, 0.4, -0.7])
def test_residual_fresh_tables(eta):
    for tb in (full(0.1, 0.005, eta, 30), truncated(0.1, 0.005, eta, 30, 3)):
        assert residual_check(tb) <= gmpy2.mpfr(2) ** -128


def test_residual_at_cli_settings():
    assert residual_check(truncated(0.1, 0.005, 0.0, 100, 4)) <= 1e-30


def test_residual_detects_perturbation():
    tb = full(0.1, 0.005, 0.0, 10)
    rows = [list(r) for r in tb.rows]
    # the residual is scaled by the row maximum, so perturb the dominant entry
    m = max(range(len(rows[5])), key=lambda i: abs(rows[5][i]))
    with precision(256):
        rows[5][m] *= 1 + gmpy2.mpfr("1e-3")
    bad = CoefficientTable(tb.params, tb.trunc, tb.kind, tuple(tuple(r) for r in rows))
    assert residual_check(bad) > 1e-4


def test_doubling_precision_is_stable():
    a = build_truncated(ModelParams(0.1, 0.005), Truncation(40, 4, 128))
    b = truncated(0.1, 0.005, 0.0, 40, 4, 256)
    for (_, _, u), (_, _, w) in zip(a.entries(), b.entries()):
        if w:
            assert abs(float((u - w) / w)) <= 2.0 ** -64


def test_json_round_trip_is_exact():
    tb = truncated(0.1, 0.005, 0.3, 20, 3)
    back = CoefficientTable.from_json(tb.to_json())
    assert back.kind == tb.kind and back.params == tb.params and back.trunc == tb.trunc
    assert back.a00 == tb.a00
    assert list(back.entries()) == list(tb.entries())
    assert back.to_json() == tb.to_json()


def test_with_rows_matches_fresh_build():
    a = truncated(0.1, 0.005, 0.0, 40, 3).with_rows(20)
    b = truncated(0.1, 0.005, 0.0, 20, 3)
    assert list(a.entries()) == list(b.entries())


def test_out_of_range_lookup_is_zero():
    tb = full(0.1, 0.005, 0.0, 4)
    assert tb[9, 2] == 0 and tb[2, 9] == 0 and tb[0, 0] == tb.a00


@pytest.mark.parametrize("kw", [dict(N=0), dict(N=5, K=0), dict(N=3, K=4), dict(N=5, precision_bits=32)])
def test_truncation_validation(kw):
    with pytest.raises(ValueError):
        Truncation(**kw)


@pytest.mark.parametrize("args", [(0.0,), (-0.1,), (0.1, -0.01), (0.1, 0.01, 1.5), (float("nan"),)])
def test_params_validation(args):
    with pytest.raises(ValueError):
        ModelParams(*args)


@settings(max_examples=25, deadline=None)
@given(sigma=st.floats(0.02, 2.0), eps=st.floats(0.0, 0.05), K=st.integers(1, 5))
def test_property_band_and_residual(sigma, eps, K):
    tb = build_truncated(ModelParams(sigma, eps), Truncation(12, K, 128))
    for n, m, v in tb.entries():
        if m % 2 or m < 2 * (n - K + 1):
            assert v == 0
    assert residual_check(tb) <= gmpy2.mpfr(2) ** -64
