import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from illiquid_fp import ModelParams, eval_grid
from illiquid_fp.analytics import symmetric_grid
from illiquid_fp.oracle import (
    CoverageError,
    RegimeError,
    compare_series_to_oracle,
    gaussian_density,
    lattice_cumulants,
    lattice_pmf,
    lattice_ratio,
    oracle_cumulants,
    simulate_jump_process,
    symbol,
    symbol_csv,
    symbol_params,
    symbol_taylor_check,
)

from conftest import truncated

P = ModelParams(0.1, 0.005, 0.0)


def test_symbol_at_zero():
    assert symbol(P, 0.0) == 0
    assert symbol(ModelParams(0.1, 0.005, 0.6), 0.0) == 0


def test_symbol_periodic_real_part():
    assert abs(symbol(P, 2 * math.pi / 0.005).real) < 1e-9


def test_symbol_gaussian_case():
    z = symbol(ModelParams(0.1), 3.0)
    assert z.imag == 0 and z.real == pytest.approx(-0.045, rel=1e-15)


@pytest.mark.parametrize("eta", [-0.5, 0.0, 0.5])
def test_symbol_second_order_coefficient(eta):
    p = ModelParams(0.1, 0.005, eta)
    c = mpmath.taylor(lambda w: complex(symbol(p, float(w))), 0, 2, method="step", h=1e-3)
    assert float(mpmath.re(c[2])) == pytest.approx(-0.005, rel=1e-4)


@settings(max_examples=60, deadline=None)
@given(w=st.floats(-5e3, 5e3), eta=st.floats(-1, 1), eps=st.floats(1e-4, 0.05))
def test_symbol_hermitian_and_contractive(w, eta, eps):
    p = ModelParams(0.1, eps, eta)
    a, b = symbol(p, w), symbol(p, -w)
    assert a.real == pytest.approx(b.real, abs=1e-12 * (1 + abs(a.real)))
    assert a.imag == pytest.approx(-b.imag, abs=1e-12 * (1 + abs(a.imag)))
    assert a.real <= 0


@pytest.mark.parametrize("sigma", [0.05, 0.1, 0.2])
@pytest.mark.parametrize("eps", [0.002, 0.005, 0.01])
@pytest.mark.parametrize("eta", [-0.5, 0.0, 0.5])
def test_symbol_taylor_sweep(sigma, eps, eta):
    assert symbol_taylor_check(ModelParams(sigma, eps, eta), 8) <= 1e-12


def test_symbol_taylor_k5_example():
    assert symbol_taylor_check(P, 5) <= 1e-12


def test_odd_taylor_coefficients():
    def coeffs(eta):
        p = ModelParams(0.1, 0.005, eta)
        with mpmath.workdps(30):
            from illiquid_fp.oracle import _symbol_mp
            return mpmath.taylor(lambda w: _symbol_mp(p, w), 0, 5, method="quad", radius=100)
    zero, plus, minus = coeffs(0.0), coeffs(0.5), coeffs(-0.5)
    for m in (3, 5):
        assert abs(zero[m]) < 1e-20
        assert abs(plus[m] + minus[m]) < 1e-20 * (1 + abs(plus[m]))
        assert abs(plus[m]) > 0


def test_jump_rates():
    sp = symbol_params(ModelParams(0.1, 0.005, 0.3))
    assert sp.lambda_plus + sp.lambda_minus == pytest.approx(400.0)
    assert sp.lambda_plus - sp.lambda_minus == pytest.approx(120.0)
    assert sp.drift == pytest.approx(-0.3 * 0.01 / 0.005)


def test_skellam_p0_bessel():
    p, t = ModelParams(0.1, 0.005, 0.0), 0.05
    lam = 0.01 / 0.005 ** 2
    dist = lattice_pmf(p, t)
    want = float(mpmath.exp(-lam * t) * mpmath.besseli(0, lam * t))
    assert dist.masses[dist.js.index(0)] == pytest.approx(want, rel=1e-13)


@pytest.mark.parametrize("eta", [0.0, 0.4])
def test_lattice_mass_and_cumulants(eta):
    p = ModelParams(0.1, 0.005, eta)
    dist = lattice_pmf(p, 0.08)
    assert abs(dist.total_mass - 1) <= 1e-12
    got = lattice_cumulants(dist)
    want = oracle_cumulants(p, 0.08)
    assert abs(got[0]) < 1e-15
    for g, w in zip(got[1:], want[1:]):
        if w:
            assert g == pytest.approx(w, rel=1e-9)
        else:
            assert abs(g) < 1e-18


def test_lattice_symmetric_without_imbalance():
    dist = lattice_pmf(P, 0.01)
    m = dict(zip(dist.js, dist.masses))
    assert all(m[j] == pytest.approx(m[-j], rel=1e-14) for j in dist.js if -j in m)


def test_lattice_rejects_zero_spread():
    with pytest.raises(ValueError):
        lattice_pmf(ModelParams(0.1), 0.01)
    with pytest.raises(ValueError):
        lattice_pmf(P, 0.0)


def test_third_cumulant_sign_monte_carlo():
    p = ModelParams(0.1, 0.005, 0.5)
    t = 0.004
    x = simulate_jump_process(p, t, 10 ** 6, seed=20240531)
    k3 = np.mean((x - x.mean()) ** 3)
    want = oracle_cumulants(p, t)[2]
    assert want > 0
    assert k3 == pytest.approx(want, rel=0.15)
    flipped = simulate_jump_process(ModelParams(0.1, 0.005, -0.5), t, 10 ** 6, seed=20240531)
    assert np.mean((flipped - flipped.mean()) ** 3) < 0


def test_cumulants_closed_form():
    k = oracle_cumulants(ModelParams(0.1, 0.005, 0.5), 0.004)
    assert k == pytest.approx((0.0, 4e-5, 0.01 * 0.5 * 0.005 * 0.004, 0.01 * 0.005 ** 2 * 0.004))
    assert oracle_cumulants(P, 0.004)[2] == 0


def test_regime_error_day():
    grid = eval_grid(truncated(0.1, 0.005, 0.0, 40, 2), symmetric_grid(0.1, 0.004, 5, 21), 0.004)
    assert lattice_ratio(P, 0.004) == pytest.approx(1.6)
    with pytest.raises(RegimeError):
        compare_series_to_oracle(grid, lattice_pmf(P, 0.004))


def test_coverage_error():
    p = ModelParams(0.1, 0.002, 0.0)
    grid = eval_grid(truncated(0.1, 0.002, 0.0, 40, 2), symmetric_grid(0.1, 0.08, 1.0, 21), 0.08)
    with pytest.raises(CoverageError):
        compare_series_to_oracle(grid, lattice_pmf(p, 0.08))


def test_gaussian_proxy_matches_k1_series():
    xs = symmetric_grid(0.1, 0.004, 6, 121)
    got = eval_grid(truncated(0.1, 0.005, 0.0, 100, 1), xs, 0.004).values
    want = gaussian_density(xs, 4e-5)
    assert np.max(np.abs(got - want)) <= 1e-6 * want.max()


def test_csv_schemas():
    dist = lattice_pmf(P, 0.001)
    lines = dist.to_csv().splitlines()
    assert lines[0] == "j,x,mass" and len(lines) == len(dist.js) + 1
    s = symbol_csv(P, [0.0, 1.0]).splitlines()
    assert s[0] == "omega,re,im" and len(s) == 3
