"""Polynomial evaluation by two independent routes.

Route 1 (`meixner_eval`): the terminating matrix sum over n-by-n nonnegative
integer matrices.  A matrix contributes zero unless its column sums stay
within m and its row sums within x, because a shifted factorial with a
nonpositive-integer base vanishes; the iterator enumerates column
compositions bounded by m and prunes rows at x, so only surviving terms are
visited.

Route 2 (`genfun_eval`): expansion of the generating function

    G(x; t) = (1 - |t|)^(-beta-|x|) * prod_i (1 - sum_j b_ij t_j)^(x_i)

as a truncated multivariate power series in t; the coefficient of t^m is
(beta)_{|m|} / m! times the polynomial.  The two routes share no code and
serve as each other's oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import DegreeCapExceeded
from .model import (
    ModelParams,
    MultiIndex,
    compositions_upto,
    enumerate_lattice,
    shifted_factorial,
)
from .spectral import SpectralData

# Default total-degree cap for generating-function expansions.
DEFAULT_SERIES_CAP = 8


# ---------------------------------------------------------------------------
# Route 1: terminating matrix sum
# ---------------------------------------------------------------------------

def coefficient_matrices(
    m: MultiIndex, x_bounds: MultiIndex | None = None
) -> Iterator[tuple[tuple[int, ...], ...]]:
    """Yield the n-by-n matrices (row-major) with column sums <= m_j and,
    when x_bounds is given, row sums <= x_i.

    Columns are enumerated outermost (their bounds depend only on m, so the
    per-column composition lists are shared across evaluation points); row
    bounds prune the search as soon as a partial row sum overshoots.
    """
    n = len(m)
    col_options = [compositions_upto(mj, n) for mj in m]

    def rec(j: int, rows: tuple[int, ...], cols: tuple[MultiIndex, ...]):
        if j == n:
            yield tuple(tuple(col[i] for col in cols) for i in range(n))
            return
        for col in col_options[j]:
            new_rows = tuple(r + c for r, c in zip(rows, col))
            if x_bounds is not None and any(
                r > xb for r, xb in zip(new_rows, x_bounds)
            ):
                continue
            yield from rec(j + 1, new_rows, cols + (col,))

    yield from rec(0, (0,) * n, ())


@lru_cache(maxsize=4096)
def _column_factors(
    u_cols: tuple[tuple[float, ...], ...], m: MultiIndex
) -> tuple[tuple[tuple[MultiIndex, float], ...], ...]:
    """Per column j: [(column composition, its x-independent factor)].

    The factor bundles (-m_j)_{sum(col)} * prod_i u_ij^{col_i} / prod_i col_i!.
    """
    n = len(m)
    out = []
    for j in range(n):
        opts = []
        for col in compositions_upto(m[j], n):
            s = sum(col)
            fac = shifted_factorial(-m[j], s)
            for i in range(n):
                fac *= u_cols[j][i] ** col[i] / math.factorial(col[i])
            opts.append((col, fac))
        out.append(tuple(opts))
    return tuple(out)


def _u_columns(sd: SpectralData) -> tuple[tuple[float, ...], ...]:
    n = sd.n
    return tuple(tuple(sd.u[i][j] for i in range(n)) for j in range(n))


def meixner_eval(
    p: ModelParams, sd: SpectralData, m: MultiIndex, x: MultiIndex
) -> float:
    """P_m(x) by the terminating matrix sum, Kahan-compensated.

    Terms alternate in sign through the (-x_i) and (-m_j) shifted factorials,
    so compensation matters once |m| and |x| grow.
    """
    n = p.n
    if len(m) != n or len(x) != n:
        raise ValueError(f"m and x must have length {n}")
    factors = _column_factors(_u_columns(sd), tuple(m))
    total_deg = sum(m)
    beta_poch = [shifted_factorial(p.beta, T) for T in range(total_deg + 1)]
    # (-x_i)_k for the row-sum factors
    xfac = [
        [shifted_factorial(-xi, k) for k in range(min(xi, total_deg) + 1)]
        for xi in x
    ]

    total = 0.0
    comp = 0.0

    def rec(j: int, rows: tuple[int, ...], fac: float):
        nonlocal total, comp
        if j == n:
            term = fac / beta_poch[sum(rows)]
            for i in range(n):
                term *= xfac[i][rows[i]]
            y = term - comp
            t = total + y
            comp = (t - total) - y
            total = t
            return
        for col, cfac in factors[j]:
            if cfac == 0.0:
                continue
            new_rows = tuple(r + c for r, c in zip(rows, col))
            if any(r > xi for r, xi in zip(new_rows, x)):
                continue
            rec(j + 1, new_rows, fac * cfac)

    rec(0, (0,) * n, 1.0)
    return total


@lru_cache(maxsize=4096)
def _row_sum_coeffs(
    beta: float, u_cols: tuple[tuple[float, ...], ...], m: MultiIndex
) -> tuple[tuple[MultiIndex, float], ...]:
    """Collapse the matrix sum over fixed row-sum vectors r:

        P_m(x) = sum_r coeff_r * prod_i (-x_i)_{r_i}.

    coeff_r absorbs every x-independent factor (the per-column bundles and
    1/(beta)_{|r|}), so a whole table row costs O(#r) per lattice point.
    """
    n = len(m)
    factors = _column_factors(u_cols, m)
    buckets: dict[MultiIndex, list[float]] = {}

    def rec(j: int, rows: tuple[int, ...], fac: float):
        if j == n:
            buckets.setdefault(rows, []).append(fac)
            return
        for col, cfac in factors[j]:
            if cfac == 0.0:
                continue
            rec(j + 1, tuple(r + c for r, c in zip(rows, col)), fac * cfac)

    rec(0, (0,) * n, 1.0)
    items = []
    for r in sorted(buckets, key=lambda t: (sum(t), tuple(-v for v in t))):
        items.append((r, math.fsum(buckets[r]) / shifted_factorial(beta, sum(r))))
    return tuple(items)


def pochhammer_table(kmax: int, vmax: int) -> np.ndarray:
    """T[k, v] = (-v)_k for 0 <= k <= kmax, 0 <= v <= vmax."""
    T = np.ones((kmax + 1, vmax + 1))
    v = np.arange(vmax + 1, dtype=float)
    for k in range(kmax):
        T[k + 1] = T[k] * (k - v)
    return T


def poly_values(
    p: ModelParams, sd: SpectralData, m: MultiIndex, X: np.ndarray
) -> np.ndarray:
    """P_m at every row of X (shape (npoints, n)), vectorized over points."""
    coeffs = _row_sum_coeffs(p.beta, _u_columns(sd), tuple(m))
    kmax = sum(m)
    vmax = int(X.max()) if X.size else 0
    T = pochhammer_table(kmax, vmax)
    out = np.zeros(X.shape[0])
    for r, coef in coeffs:
        term = np.full(X.shape[0], coef)
        for i, ri in enumerate(r):
            if ri:
                term *= T[ri, X[:, i]]
        out += term
    return out


# ---------------------------------------------------------------------------
# Route 2: generating-function expansion
# ---------------------------------------------------------------------------

class TruncatedSeries:
    """Multivariate power series truncated at a total-degree cap.

    coeffs maps exponent tuples to floats; absent means zero.  All arithmetic
    stays below the cap, which keeps every coefficient up to the cap exact:
    discarded higher-order terms cannot feed back into lower degrees.
    """

    __slots__ = ("n_vars", "cap", "coeffs")

    def __init__(self, n_vars: int, cap: int, coeffs: dict[MultiIndex, float] | None = None):
        self.n_vars = n_vars
        self.cap = cap
        self.coeffs = coeffs if coeffs is not None else {}

    @classmethod
    def constant(cls, value: float, n_vars: int, cap: int) -> "TruncatedSeries":
        zero = (0,) * n_vars
        return cls(n_vars, cap, {zero: value} if value else {})

    @classmethod
    def geometric_power(cls, gamma: float, n_vars: int, cap: int) -> "TruncatedSeries":
        """(1 - t_1 - ... - t_n)^(-gamma): coefficient of t^k is (gamma)_{|k|}/k!."""
        coeffs = {}
        for k in compositions_upto(cap, n_vars):
            c = shifted_factorial(gamma, sum(k))
            for ki in k:
                c /= math.factorial(ki)
            coeffs[k] = c
        return cls(n_vars, cap, coeffs)

    @classmethod
    def affine_power(
        cls, b_row: Sequence[float], exponent: int, n_vars: int, cap: int
    ) -> "TruncatedSeries":
        """(1 - sum_j b_j t_j)^exponent for integer exponent >= 0 (finite binomial)."""
        if exponent < 0:
            raise ValueError("affine_power needs a nonnegative integer exponent")
        coeffs: dict[MultiIndex, float] = {}
        for k in compositions_upto(min(exponent, cap), n_vars):
            s = sum(k)
            c = math.comb(exponent, s) * (-1.0) ** s * math.factorial(s)
            for bj, kj in zip(b_row, k):
                c *= bj**kj / math.factorial(kj)
            if c:
                coeffs[k] = c
        return cls(n_vars, cap, coeffs)

    def __add__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if (self.n_vars, self.cap) != (other.n_vars, other.cap):
            raise ValueError("series shape mismatch")
        coeffs = dict(self.coeffs)
        for k, v in other.coeffs.items():
            coeffs[k] = coeffs.get(k, 0.0) + v
        return TruncatedSeries(self.n_vars, self.cap, coeffs)

    def scale(self, factor: float) -> "TruncatedSeries":
        return TruncatedSeries(
            self.n_vars, self.cap, {k: v * factor for k, v in self.coeffs.items()}
        )

    def __mul__(self, other: "TruncatedSeries") -> "TruncatedSeries":
        if (self.n_vars, self.cap) != (other.n_vars, other.cap):
            raise ValueError("series shape mismatch")
        out: dict[MultiIndex, float] = {}
        for ka, va in self.coeffs.items():
            da = sum(ka)
            for kb, vb in other.coeffs.items():
                if da + sum(kb) > self.cap:
                    continue
                k = tuple(a + b for a, b in zip(ka, kb))
                out[k] = out.get(k, 0.0) + va * vb
        return TruncatedSeries(self.n_vars, self.cap, out)

    def coefficient(self, m: MultiIndex) -> float:
        if sum(m) > self.cap:
            raise DegreeCapExceeded(f"degree {sum(m)} beyond cap {self.cap}")
        return self.coeffs.get(tuple(m), 0.0)


def genfun_series(
    p: ModelParams, sd: SpectralData, x: MultiIndex, cap: int
) -> TruncatedSeries:
    """Expansion of G(x; t) around t = 0 up to total degree `cap`."""
    n = p.n
    series = TruncatedSeries.geometric_power(p.beta + sum(x), n, cap)
    b = sd.b
    for i in range(n):
        if x[i]:
            series = series * TruncatedSeries.affine_power(b[i], x[i], n, cap)
    return series


def genfun_eval(
    p: ModelParams,
    sd: SpectralData,
    m: MultiIndex,
    x: MultiIndex,
    cap: int = DEFAULT_SERIES_CAP,
) -> float:
    """P_m(x) read off the generating function: coefficient of t^m divided by
    (beta)_{|m|}/m!.  Expands only to total degree |m|; the truncation is
    exact for every extracted coefficient."""
    deg = sum(m)
    if deg > cap:
        raise DegreeCapExceeded(f"|m| = {deg} exceeds the configured cap {cap}")
    series = genfun_series(p, sd, x, deg)
    norm = shifted_factorial(p.beta, deg)
    for mi in m:
        norm /= math.factorial(mi)
    return series.coefficient(tuple(m)) / norm


def genfun_all(
    p: ModelParams, sd: SpectralData, x: MultiIndex, max_deg: int
) -> dict[MultiIndex, float]:
    """All P_m(x) for |m| <= max_deg from a single expansion at x."""
    series = genfun_series(p, sd, x, max_deg)
    out = {}
    for m in compositions_upto(max_deg, p.n):
        norm = shifted_factorial(p.beta, sum(m))
        for mi in m:
            norm /= math.factorial(mi)
        out[m] = series.coefficient(m) / norm
    return out


# ---------------------------------------------------------------------------
# single-variable base case and tables
# ---------------------------------------------------------------------------

def meixner_1d(beta: float, c: float, m: int, x: int) -> float:
    """Single-variable polynomial: the terminating 2F1 sum at argument 1 - 1/c.

    Terms alternate in sign (the argument is negative for 0 < c < 1), so the
    exactly-rounded fsum keeps cancellation from inflating the result.
    """
    z = 1.0 - 1.0 / c
    terms = [
        shifted_factorial(-m, k)
        * shifted_factorial(-x, k)
        / shifted_factorial(beta, k)
        * z**k
        / math.factorial(k)
        for k in range(min(m, x) + 1)
    ]
    return math.fsum(terms)


@dataclass(frozen=True)
class PolyTable:
    """Dense table of P_m(x), graded-lex on both axes."""

    m_list: tuple[MultiIndex, ...]
    x_list: tuple[MultiIndex, ...]
    values: np.ndarray  # shape (len(m_list), len(x_list))

    def row(self, m: MultiIndex) -> np.ndarray:
        return self.values[self.m_list.index(tuple(m))]

    def write_csv(self, path: str | Path) -> None:
        """Header row of x indices, first column of m indices, cells with 17
        significant digits (round-trip exact for doubles)."""
        lines = ["m\\x," + ",".join(_fmt_midx(x) for x in self.x_list)]
        for m, row in zip(self.m_list, self.values):
            lines.append(_fmt_midx(m) + "," + ",".join(f"{v:.17g}" for v in row))
        Path(path).write_text("\n".join(lines) + "\n")


def _fmt_midx(m: MultiIndex) -> str:
    return ":".join(str(v) for v in m)


def poly_table(
    p: ModelParams, sd: SpectralData, max_deg: int, S: int
) -> PolyTable:
    """P_m(x) for all |m| <= max_deg, |x| <= S."""
    m_list = tuple(compositions_upto(max_deg, p.n))
    x_list = tuple(enumerate_lattice(p.n, S))
    X = np.array(x_list, dtype=int)
    values = np.empty((len(m_list), len(x_list)))
    for a, m in enumerate(m_list):
        values[a] = poly_values(p, sd, m, X)
    return PolyTable(m_list=m_list, x_list=x_list, values=values)
