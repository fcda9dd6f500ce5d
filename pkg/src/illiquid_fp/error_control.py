"""Ratio estimates between successive diagonal sub-series and the cutoff times they imply."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from gmpy2 import mpfr

from ._mp import precision
from .coefficients import CoefficientTable
from .series import eval_density, phi_term, std_dev


class DegenerateRatioError(ZeroDivisionError):
    """A denominator coefficient or sub-series vanished."""


@dataclass(frozen=True)
class RatioEstimate:
    """phi_j / phi_{j-1} ~ c1 y + c2 x^2 y^2 for small y = 1/t."""

    j: int
    c1: mpfr
    c2: mpfr


def ratio_coefficients(table: CoefficientTable, j: int) -> RatioEstimate:
    """c1 = a_{j,2} / a_{j-1,2};  c2 = (a_{j+1,4} - c1 a_{j,4}) / a_{j-1,2}.

    Use a full-recurrence table: a K=j truncated table has no a_{j+1,4}.
    """
    if j < 2:
        raise ValueError(f"j must be >= 2, got {j}")
    if table.N < j + 1:
        raise ValueError(f"table needs rows up to n={j + 1}, has N={table.N}")
    with precision(table.trunc.precision_bits):
        den = table[j - 1, 2]
        if not den:
            raise DegenerateRatioError(f"a_({j - 1},2) is zero")
        c1 = table[j, 2] / den
        c2 = (table[j + 1, 4] - c1 * table[j, 4]) / den
    return RatioEstimate(j, c1, c2)


def min_time(est: RatioEstimate, x: float, tolerance: float) -> float:
    """Smallest t with |c1 y + c2 x^2 y^2| < tolerance on all of (0, 1/t].

    The bound is taken at its first crossing in y, which is the conservative
    choice when c1 > 0 > c2 and the quadratic turns back under the tolerance.
    Returns math.inf when there is no constraint at all.
    """
    if not 0 < tolerance < 1:
        raise ValueError(f"tolerance must be in (0, 1), got {tolerance}")
    c1 = float(est.c1)
    q = float(est.c2) * x * x
    roots = []
    for level in (tolerance, -tolerance):
        if q == 0:
            if c1 != 0:
                roots.append(level / c1)
        else:
            disc = c1 * c1 + 4 * q * level
            if disc >= 0:
                r = math.sqrt(disc)
                roots += [(-c1 + r) / (2 * q), (-c1 - r) / (2 * q)]
    positive = [r for r in roots if r > 0]
    if not positive:
        return math.inf
    return 1.0 / min(positive)


def ratio_family(table: CoefficientTable, k_max: int) -> list[RatioEstimate]:
    """Estimates for j = 2..k_max + 1, i.e. for truncation orders K = 1..k_max."""
    return [ratio_coefficients(table, j) for j in range(2, k_max + 2)]


def max_safe_k(estimates: Sequence[RatioEstimate], t: float, x: float, tolerance: float) -> int:
    """Largest K whose successor ratios j = 2..K+1 all have min_time <= t.

    ``estimates`` must be ordered by j starting at 2. A relative slack of
    1e-12 absorbs rounding when t sits exactly on a cutoff.
    """
    safe = 0
    for est in estimates:
        if min_time(est, x, tolerance) <= t * (1 + 1e-12):
            safe = est.j - 1
        else:
            break
    return safe


def empirical_term_ratio(table: CoefficientTable, j: int, x, t) -> mpfr:
    """phi_j(x, 1/t) / phi_{j-1}(x, 1/t) computed from the sub-series themselves."""
    if j < 2:
        raise ValueError(f"j must be >= 2, got {j}")
    num = phi_term(table, j, x, t)
    den = phi_term(table, j - 1, x, t)
    if not den:
        raise DegenerateRatioError(f"phi_{j - 1} vanishes at x={x}, t={t}")
    with precision(table.trunc.precision_bits):
        return num / den


def mid_tail_grid(sigma: float, t: float, points: int = 81) -> np.ndarray:
    """Both mid tails, 3 to 5 reference standard deviations from the origin."""
    sd = std_dev(sigma, t)
    right = np.linspace(3 * sd, 5 * sd, points)
    return np.concatenate([-right[::-1], right])


def divergence_scan(tables: Sequence[CoefficientTable], xs, t) -> list[float]:
    """d_K = sup_x |p_{K+1}(x,t) - p_K(x,t)| for consecutive tables in the family."""
    values = []
    for tb in tables:
        with precision(tb.trunc.precision_bits):
            values.append([eval_density(tb, x, t).value for x in xs])
    out = []
    for lo, hi in zip(values, values[1:]):
        out.append(max(float(abs(b - a)) for a, b in zip(lo, hi)))
    return out

