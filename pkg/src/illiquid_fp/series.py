"""Evaluation of the truncated series p_{N,K}(x, t) with cancellation diagnostics."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import gmpy2
import numpy as np
from gmpy2 import mpfr

from ._mp import precision, to_decimal_string, to_mpfr
from .coefficients import CoefficientTable

NOT_STABILIZED = None


@dataclass(frozen=True)
class DensityPoint:
    x: float
    t: float
    value: mpfr
    max_monomial: mpfr
    final_over_max: mpfr
    n_monomials: int = 0


@dataclass(frozen=True)
class DensityGrid:
    t: float
    xs: tuple
    points: tuple
    table: CoefficientTable

    def __len__(self):
        return len(self.xs)

    @property
    def x_array(self) -> np.ndarray:
        return np.asarray(self.xs, dtype=float)

    @property
    def values(self) -> np.ndarray:
        return np.array([float(p.value) for p in self.points], dtype=float)

    def to_csv(self, digits: int = 30) -> str:
        lines = ["x,density,max_monomial,final_over_max"]
        for x, p in zip(self.xs, self.points):
            lines.append(",".join([
                repr(float(x)),
                to_decimal_string(p.value, digits),
                to_decimal_string(p.max_monomial, digits),
                to_decimal_string(p.final_over_max, digits),
            ]))
        return "\n".join(lines) + "\n"


def std_dev(sigma: float, t: float) -> float:
    """Reference standard deviation sigma * sqrt(t) used for every 'k sd' position."""
    return sigma * math.sqrt(t)


def _check_t(t):
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")


def eval_density(table: CoefficientTable, x, t, n_max: int | None = None) -> DensityPoint:
    """Sum every monomial a_nm x^m / t^(n+1/2) of the table's band.

    The monomials are added with an exactly rounded sum (mpfr_sum), so the
    order in which they arrive does not matter even under heavy cancellation.
    """
    _check_t(t)
    N = table.N if n_max is None else min(n_max, table.N)
    with precision(table.trunc.precision_bits):
        xm = to_mpfr(x)
        tm = to_mpfr(t)
        inv_t = 1 / tm
        root_t = gmpy2.sqrt(tm)
        xpow = [mpfr(1)]
        for _ in range(2 * N):
            xpow.append(xpow[-1] * xm)

        terms = [table.a00]
        biggest = abs(table.a00)
        tpow = mpfr(1)
        for n in range(1, N + 1):
            tpow *= inv_t
            row = table.rows[n]
            for m in table.band(n):
                c = row[m]
                if not c:
                    continue
                term = c * xpow[m] * tpow
                terms.append(term)
                a = abs(term)
                if a > biggest:
                    biggest = a
        value = gmpy2.fsum(terms) / root_t
        biggest = biggest / root_t
        ratio = value / biggest if biggest else mpfr(0)
    return DensityPoint(x, t, value, biggest, ratio, len(terms))


def _eval_chunk(args):
    table, xs, t, n_max = args
    return [eval_density(table, x, t, n_max) for x in xs]


def eval_grid(table: CoefficientTable, xs: Sequence[float], t, workers: int = 1,
              n_max: int | None = None) -> DensityGrid:
    """Pointwise evaluation on a strictly increasing grid.

    With ``workers > 1`` the points are split into contiguous chunks and
    evaluated in worker processes; chunks are reassembled in input order.
    """
    _check_t(t)
    xs = tuple(xs)
    if any(b <= a for a, b in zip(xs, xs[1:])):
        raise ValueError("xs must be strictly increasing")
    workers = max(1, int(workers or 1))
    if workers == 1 or len(xs) < 4 * workers:
        points = [eval_density(table, x, t, n_max) for x in xs]
    else:
        size = math.ceil(len(xs) / workers)
        chunks = [(table, xs[i:i + size], t, n_max) for i in range(0, len(xs), size)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            points = [p for part in pool.map(_eval_chunk, chunks) for p in part]
    return DensityGrid(t, xs, tuple(points), table)


def default_workers() -> int:
    return os.cpu_count() or 1


def phi_term(table: CoefficientTable, j: int, x, t, n_max: int | None = None) -> mpfr:
    """The j-th diagonal sub-series sum_{n>=j} a_{n,2n-2j+2} x^(2n-2j+2) y^(n+1/2), y = 1/t."""
    if table.params.eta != 0:
        raise ValueError("phi_term is only defined for eta = 0 tables")
    if j < 1:
        raise ValueError(f"j must be >= 1, got {j}")
    _check_t(t)
    if table.K is not None and j > table.K:
        return mpfr(0)  # diagonal outside the band
    N = table.N if n_max is None else min(n_max, table.N)
    with precision(table.trunc.precision_bits):
        xm = to_mpfr(x)
        y = 1 / to_mpfr(t)
        terms = []
        for n in range(j, N + 1):
            m = 2 * n - 2 * j + 2
            terms.append(table.rows[n][m] * xm ** m * y ** n)
        return gmpy2.fsum(terms) * gmpy2.sqrt(y)


def convergence_in_n(tables: Sequence[CoefficientTable], x, t, tol: float):
    """Smallest N in the family from which every later evaluation agrees with
    its predecessor to ``tol`` relative. Returns (N0 or None, values)."""
    if len(tables) < 2:
        raise ValueError("need at least two tables")
    values = [eval_density(tb, x, t).value for tb in tables]
    with precision(tables[0].trunc.precision_bits):
        stable_from = None
        for i in range(len(values) - 1, 0, -1):
            cur, prev = values[i], values[i - 1]
            if abs(cur - prev) <= tol * abs(cur):
                stable_from = i - 1
            else:
                break
    if stable_from is None:
        return NOT_STABILIZED, values
    return tables[stable_from].N, values


def family_over_n(table: CoefficientTable, Ns: Sequence[int]) -> list[CoefficientTable]:
    return [table.with_rows(N) for N in Ns]
