"""Series coefficients a_nm of the power-series solution.

The trial solution is

    p(x, t) = a00 / sqrt(t) + sum_{n>=1} sum_{m=2}^{2n} a_nm x^m / t^(n + 1/2)

and substituting it into the infinite-order Fokker-Planck equation gives, for
every n >= 1 and 0 <= m <= 2n - 2,

    (1/2 - n) a_{n-1,m} = s2 * sum_{l>=1} C(m+2l, 2l) eps^(2l-2) a_{n,m+2l}
                        - s2 * eta * sum_{l>=2} C(m+2l-1, 2l-1) eps^(2l-3) a_{n,m+2l-1}

with s2 = sigma^2. Rows are solved in increasing n. Inside a row, m runs
down from 2n - 2 so that a_{n,m+2} is the only unknown of each equation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator

import gmpy2
from gmpy2 import mpfr

from ._mp import DEFAULT_PRECISION, digits_for, precision, to_decimal_string, to_mpfr

FULL = "full"
TRUNCATED = "truncated"


@dataclass(frozen=True)
class ModelParams:
    """Market parameters: volatility, bid-offer spread width and imbalance."""

    sigma: float
    epsilon: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        for name in ("sigma", "epsilon", "eta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.sigma <= 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be non-negative, got {self.epsilon}")
        if not -1.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [-1, 1], got {self.eta}")

    def to_dict(self) -> dict:
        return {"sigma": self.sigma, "epsilon": self.epsilon, "eta": self.eta}


@dataclass(frozen=True)
class Truncation:
    """Series cutoff N, PDE truncation order K and mantissa width in bits."""

    N: int
    K: int = 1
    precision_bits: int = DEFAULT_PRECISION

    def __post_init__(self):
        if self.N < 1:
            raise ValueError(f"N must be >= 1, got {self.N}")
        if self.K < 1:
            raise ValueError(f"K must be >= 1, got {self.K}")
        if self.K > self.N:
            raise ValueError(f"K={self.K} exceeds N={self.N}")
        if self.precision_bits < 64:
            raise ValueError(f"precision_bits must be >= 64, got {self.precision_bits}")

    def to_dict(self) -> dict:
        return {"N": self.N, "K": self.K, "precision_bits": self.precision_bits}


@dataclass(frozen=True)
class CoefficientTable:
    """Immutable table of a_nm, stored densely row by row.

    ``rows[0]`` holds only a00; ``rows[n]`` has 2n + 1 entries for m = 0..2n.
    """

    params: ModelParams
    trunc: Truncation
    kind: str
    rows: tuple = field(repr=False)

    @property
    def a00(self) -> mpfr:
        return self.rows[0][0]

    @property
    def N(self) -> int:
        return len(self.rows) - 1

    @property
    def K(self) -> int | None:
        """Truncation order, or None for a full-recurrence table."""
        return self.trunc.K if self.kind == TRUNCATED else None

    def __getitem__(self, nm) -> mpfr:
        n, m = nm
        if n < 0 or n > self.N or m < 0 or m > 2 * n:
            return mpfr(0)
        return self.rows[n][m]

    def band_low(self, n: int) -> int:
        """Smallest m kept in row n when the series is summed."""
        if self.kind == TRUNCATED:
            return max(2, 2 * (n - self.trunc.K + 1))
        return 2

    def band(self, n: int) -> range:
        return range(self.band_low(n), 2 * n + 1)

    def entries(self) -> Iterator[tuple[int, int, mpfr]]:
        for n in range(1, self.N + 1):
            for m, v in enumerate(self.rows[n]):
                yield n, m, v

    def with_rows(self, N: int) -> "CoefficientTable":
        """The same table cut back to rows 0..N.

        Row n never depends on rows above it, so this is exactly the table a
        fresh build with this N would produce.
        """
        if not 1 <= N <= self.N:
            raise ValueError(f"N must be in [1, {self.N}], got {N}")
        trunc = Truncation(N, min(self.trunc.K, N), self.trunc.precision_bits)
        return CoefficientTable(self.params, trunc, self.kind, self.rows[: N + 1])

    def to_dict(self) -> dict:
        nd = digits_for(self.trunc.precision_bits)
        return {
            "params": self.params.to_dict(),
            "trunc": self.trunc.to_dict(),
            "kind": self.kind,
            "a00": to_decimal_string(self.a00, nd),
            "entries": [[n, m, to_decimal_string(v, nd)] for n, m, v in self.entries()],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=None, separators=(",", ":"))

    @classmethod
    def from_dict(cls, doc: dict) -> "CoefficientTable":
        params = ModelParams(**doc["params"])
        trunc = Truncation(**doc["trunc"])
        with precision(trunc.precision_bits):
            rows = [[mpfr(doc["a00"])]]
            rows += [[mpfr(0)] * (2 * n + 1) for n in range(1, trunc.N + 1)]
            for n, m, s in doc["entries"]:
                rows[n][m] = mpfr(s)
        return cls(params, trunc, doc.get("kind", TRUNCATED), tuple(tuple(r) for r in rows))

    @classmethod
    def from_json(cls, text: str) -> "CoefficientTable":
        return cls.from_dict(json.loads(text))


def normalization_constant(params: ModelParams, precision_bits: int = DEFAULT_PRECISION) -> mpfr:
    """a00 = 1 / (sigma sqrt(2 pi)), so the eps = 0 series is a unit-mass Gaussian."""
    with precision(precision_bits):
        return 1 / (to_mpfr(params.sigma) * gmpy2.sqrt(2 * gmpy2.const_pi()))


@lru_cache(maxsize=None)
def _binom(a: int, b: int) -> int:
    return math.comb(a, b)


def _check(trunc: Truncation):
    if trunc.N < 1:
        raise ValueError("N must be >= 1")
    if trunc.precision_bits < 64:
        raise ValueError("precision_bits must be >= 64")


def _solve(params: ModelParams, trunc: Truncation, cap: int | None) -> tuple:
    N = trunc.N
    with precision(trunc.precision_bits):
        s2 = to_mpfr(params.sigma) ** 2
        eps = to_mpfr(params.epsilon)
        eta = to_mpfr(params.eta)
        epow = [mpfr(1)]
        for _ in range(2 * N + 2):
            epow.append(epow[-1] * eps)
        even_only = params.eta == 0
        use_eps = params.epsilon != 0
        half = mpfr("0.5")

        rows = [[normalization_constant(params, trunc.precision_bits)]]
        for n in range(1, N + 1):
            prev = rows[n - 1]
            row = [mpfr(0)] * (2 * n + 1)
            lo = 2 if cap is None else max(2, 2 * (n - cap + 1))
            for m in range(2 * n - 2, lo - 3, -1):
                if even_only and m % 2:
                    continue
                rhs = (half - n) * prev[m]
                if use_eps:
                    lmax = (2 * n - m) // 2
                    if cap is not None:
                        lmax = min(lmax, cap)
                    for l in range(2, lmax + 1):
                        rhs -= s2 * _binom(m + 2 * l, 2 * l) * epow[2 * l - 2] * row[m + 2 * l]
                    if not even_only:
                        lmax = (2 * n + 1 - m) // 2
                        if cap is not None:
                            lmax = min(lmax, cap)
                        for l in range(2, lmax + 1):
                            rhs += (s2 * eta * _binom(m + 2 * l - 1, 2 * l - 1)
                                    * epow[2 * l - 3] * row[m + 2 * l - 1])
                row[m + 2] = rhs / (s2 * _binom(m + 2, 2))
            rows.append(row)
    return tuple(tuple(r) for r in rows)


def build_full(params: ModelParams, trunc: Truncation) -> CoefficientTable:
    """Coefficients of the full (infinite-order) equation up to row N; K is ignored."""
    _check(trunc)
    return CoefficientTable(params, trunc, FULL, _solve(params, trunc, None))


def build_truncated(params: ModelParams, trunc: Truncation) -> CoefficientTable:
    """Coefficients of the K-truncated equation on the band m >= 2(n - K + 1).

    Both derivative families are capped at l <= K. Only the band entries are
    solved for; everything below the band is held at zero.
    """
    _check(trunc)
    return CoefficientTable(params, trunc, TRUNCATED, _solve(params, trunc, trunc.K))


def residual_check(table: CoefficientTable) -> mpfr:
    """Largest recurrence residual, each scaled by the largest |a_nm| of its row.

    Every equation that determines a stored coefficient is re-evaluated,
    including those whose unknown is structurally zero (odd m when eta = 0).
    For truncated tables the equations below the band are not part of the
    truncated system and are skipped.
    """
    p = table.params
    cap = table.K
    worst = mpfr(0)
    with precision(table.trunc.precision_bits):
        s2 = to_mpfr(p.sigma) ** 2
        eps = to_mpfr(p.epsilon)
        eta = to_mpfr(p.eta)
        half = mpfr("0.5")
        for n in range(1, table.N + 1):
            scale = max(abs(v) for v in table.rows[n])
            if scale == 0:
                continue
            lo = table.band_low(n)
            for m in range(max(lo - 2, 0), 2 * n):
                lhs = (half - n) * table[n - 1, m]
                lmax = (2 * n - m) // 2
                if cap is not None:
                    lmax = min(lmax, cap)
                rhs = gmpy2.fsum(
                    s2 * _binom(m + 2 * l, 2 * l) * eps ** (2 * l - 2) * table[n, m + 2 * l]
                    for l in range(1, lmax + 1)
                )
                lmax = (2 * n + 1 - m) // 2
                if cap is not None:
                    lmax = min(lmax, cap)
                rhs -= gmpy2.fsum(
                    s2 * eta * _binom(m + 2 * l - 1, 2 * l - 1) * eps ** (2 * l - 3)
                    * table[n, m + 2 * l - 1]
                    for l in range(2, lmax + 1)
                )
                r = abs(lhs - rhs) / scale
                if r > worst:
                    worst = r
    return worst
