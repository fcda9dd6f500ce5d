"""Exact solution of the full equation through its Fourier symbol.

With the characteristic-function convention phi(w) = E[exp(i w X)], every
derivative d^k/dx^k becomes (-i w)^k and the two infinite derivative families
sum in closed form:

    psi(w) = (s2 / eps^2) * (cos(eps w) - 1 + i eta (sin(eps w) - eps w))

This is the log characteristic function (per unit time) of a compound of
up-jumps and down-jumps of size eps plus a deterministic drift:

    lambda_plus + lambda_minus = s2 / eps^2
    lambda_plus - lambda_minus = eta s2 / eps^2
    drift = -eta s2 / eps

so the fundamental solution is an eps-lattice Skellam law shifted by drift*t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath
import numpy as np

from .coefficients import ModelParams
from .series import DensityGrid, std_dev

MIN_LATTICE_RATIO = 25.0


class RegimeError(ValueError):
    """A precondition on the parameter regime does not hold."""


class CoverageError(ValueError):
    """The evaluation grid does not cover the requested region."""


@dataclass(frozen=True)
class SymbolParams:
    lambda_plus: float
    lambda_minus: float
    drift: float
    epsilon: float


@dataclass(frozen=True)
class LatticeDistribution:
    t: float
    js: tuple
    support: tuple
    masses: tuple

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    def to_csv(self) -> str:
        lines = ["j,x,mass"]
        for j, x, p in zip(self.js, self.support, self.masses):
            lines.append(f"{j},{x!r},{p!r}")
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ErrorReport:
    max_rel_error: float
    mean_rel_error: float
    n_points: int
    lattice_ratio: float


def symbol_params(params: ModelParams) -> SymbolParams:
    if params.epsilon <= 0:
        raise ValueError("the jump representation needs epsilon > 0")
    s2, e, eta = params.sigma ** 2, params.epsilon, params.eta
    total = s2 / e ** 2
    return SymbolParams(
        lambda_plus=0.5 * total * (1 + eta),
        lambda_minus=0.5 * total * (1 - eta),
        drift=-eta * s2 / e,
        epsilon=e,
    )


def symbol(params: ModelParams, omega: float) -> complex:
    """psi(omega) with d/dt phi = psi * phi for phi(w) = E[exp(i w X)]."""
    s2, e, eta = params.sigma ** 2, params.epsilon, params.eta
    if e == 0:
        return complex(-0.5 * s2 * omega * omega, 0.0)
    u = e * omega
    return complex(s2 / e ** 2 * (math.cos(u) - 1), s2 / e ** 2 * eta * (math.sin(u) - u))


def _symbol_mp(params: ModelParams, omega):
    s2 = mpmath.mpf(params.sigma) ** 2
    e = mpmath.mpf(params.epsilon)
    u = e * omega
    return s2 / e ** 2 * (mpmath.cos(u) - 1 + 1j * params.eta * (mpmath.sin(u) - u))


def pde_coefficient(params: ModelParams, m: int):
    """Coefficient of d^m p / dx^m on the right-hand side of the equation."""
    s2 = mpmath.mpf(params.sigma) ** 2
    e = mpmath.mpf(params.epsilon)
    if m < 2:
        return mpmath.mpf(0)
    if m % 2 == 0:
        return s2 * e ** (m - 2) / mpmath.factorial(m)
    return s2 * params.eta * (-e) ** (m - 2) / mpmath.factorial(m)


def symbol_taylor_check(params: ModelParams, K: int, dps: int = 40) -> float:
    """Max relative mismatch between the Taylor coefficients of psi at 0 and
    the equation's coefficients under d/dx -> -i w, for orders 0..2K.

    The Taylor coefficients come from Cauchy-integral differentiation of the
    closed form, not from re-expanding the sums. The contour runs in the
    scaled variable u = eps w, where all coefficients are O(1); the factor
    eps^m is applied afterwards.
    """
    if params.epsilon <= 0:
        raise ValueError("symbol_taylor_check needs epsilon > 0")
    with mpmath.workdps(dps):
        e = mpmath.mpf(params.epsilon)
        got = mpmath.taylor(lambda u: _symbol_mp(params, u / e), 0, 2 * K,
                            method="quad", radius=1)
        worst = mpmath.mpf(0)
        for m in range(2 * K + 1):
            want = pde_coefficient(params, m) * (-1j) ** m
            # scale for orders whose expected value is zero
            ref = mpmath.mpf(params.sigma) ** 2 * e ** max(m - 2, 0) / mpmath.factorial(max(m, 2))
            denom = abs(want) if want != 0 else ref
            worst = max(worst, abs(got[m] * e ** m - want) / denom)
        return float(worst)


def _poisson(k: int, lam):
    if k < 0:
        return mpmath.mpf(0)
    return mpmath.exp(-lam + k * mpmath.log(lam) - mpmath.loggamma(k + 1))


def _skellam_mass(j: int, a, b):
    """P(N1 - N2 = j) for independent Poisson N1 ~ a, N2 ~ b, by the double sum."""
    if b == 0:
        return _poisson(j, a)
    if a == 0:
        return _poisson(-j, b)
    k = max(0, -j)
    log_term = (j + k) * mpmath.log(a) + k * mpmath.log(b) \
        - mpmath.loggamma(j + k + 1) - mpmath.loggamma(k + 1)
    term = mpmath.exp(log_term - a - b)
    total = term
    ab = a * b
    while True:
        k += 1
        term *= ab / ((j + k) * k)
        total += term
        if k > ab ** 0.5 and term < total * mpmath.mpf(10) ** (-mpmath.mp.dps):
            break
    return total


def lattice_pmf(params: ModelParams, t: float, mass_tolerance: float = 1e-15,
                dps: int = 40) -> LatticeDistribution:
    """Exact law at time t started from a point mass at the origin."""
    if params.epsilon <= 0:
        raise ValueError("lattice_pmf needs epsilon > 0; use the Gaussian density for epsilon = 0")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    sp = symbol_params(params)
    with mpmath.workdps(dps):
        a = mpmath.mpf(sp.lambda_plus) * t
        b = mpmath.mpf(sp.lambda_minus) * t
        centre = int(round(float(a - b)))
        width = int(math.ceil(12 * math.sqrt(float(a + b)))) + 20
        cache = {}
        while True:
            js = range(centre - width, centre + width + 1)
            for j in js:
                if j not in cache:
                    cache[j] = _skellam_mass(j, a, b)
            if 1 - mpmath.fsum(cache[j] for j in js) < mass_tolerance:
                break
            width *= 2
        js = list(js)
        masses = tuple(float(cache[j]) for j in js)
    shift = sp.drift * t
    support = tuple(j * params.epsilon + shift for j in js)
    return LatticeDistribution(t, tuple(js), support, masses)


def oracle_cumulants(params: ModelParams, t: float) -> tuple[float, float, float, float]:
    """Cumulants of the exact law from the Taylor coefficients of psi.

    kappa_{2k} = s2 eps^(2k-2) t and kappa_{2k+1} = s2 eta eps^(2k-1) t (k >= 1).
    """
    s2, e, eta = params.sigma ** 2, params.epsilon, params.eta
    return (0.0, s2 * t, s2 * eta * e * t, s2 * e * e * t)


def lattice_cumulants(dist: LatticeDistribution) -> tuple[float, float, float, float]:
    """First four cumulants computed directly from the lattice masses."""
    x = np.asarray(dist.support)
    p = np.asarray(dist.masses)
    mass = math.fsum(p)
    mean = math.fsum(p * x) / mass
    d = x - mean
    m2 = math.fsum(p * d ** 2) / mass
    m3 = math.fsum(p * d ** 3) / mass
    m4 = math.fsum(p * d ** 4) / mass
    return (mean, m2, m3, m4 - 3 * m2 * m2)


def lattice_ratio(params: ModelParams, t: float) -> float:
    """sigma^2 t / eps^2: the expected number of jumps by time t."""
    if params.epsilon == 0:
        return math.inf
    return params.sigma ** 2 * t / params.epsilon ** 2


def compare_series_to_oracle(grid: DensityGrid, lattice: LatticeDistribution,
                             bulk: float = 3.0) -> ErrorReport:
    """Relative error of the series density against mass/eps at lattice points
    with |x| <= bulk reference standard deviations."""
    params = grid.table.params
    ratio = lattice_ratio(params, grid.t)
    if ratio < MIN_LATTICE_RATIO:
        raise RegimeError(
            f"sigma^2 t / eps^2 = {ratio:.4g} < {MIN_LATTICE_RATIO:g}: "
            "the lattice law is too discrete to compare with a density")
    sd = std_dev(params.sigma, grid.t)
    xs = grid.x_array
    xj = np.asarray(lattice.support)
    keep = np.abs(xj) <= bulk * sd
    if xj[keep].min() < xs[0] or xj[keep].max() > xs[-1]:
        raise CoverageError("grid does not cover the bulk of the lattice law")
    series = np.interp(xj[keep], xs, grid.values)
    exact = np.asarray(lattice.masses)[keep] / params.epsilon
    rel = np.abs(series - exact) / exact
    return ErrorReport(float(rel.max()), float(rel.mean()), int(keep.sum()), ratio)


def gaussian_density(x, variance: float):
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x / variance) / math.sqrt(2 * math.pi * variance)


def simulate_jump_process(params: ModelParams, t: float, n_paths: int, seed: int = 0) -> np.ndarray:
    """Samples of X_t = eps (N+ - N-) + drift t."""
    sp = symbol_params(params)
    rng = np.random.default_rng(seed)
    up = rng.poisson(sp.lambda_plus * t, n_paths)
    down = rng.poisson(sp.lambda_minus * t, n_paths)
    return params.epsilon * (up - down) + sp.drift * t


def symbol_csv(params: ModelParams, omegas) -> str:
    lines = ["omega,re,im"]
    for w in omegas:
        z = symbol(params, float(w))
        lines.append(f"{float(w)!r},{z.real!r},{z.imag!r}")
    return "\n".join(lines) + "\n"
