"""Lattice difference operators: L_BD, H, H-tilde, and their identities.

All three act on functions over the truncated lattice {|x| <= S} in
graded-lex order.  Matrix couplings that would leave the truncation are
dropped (soft truncation), so identities are asserted at interior points
only; the infinite lattice has no boundary and we refuse to invent one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .errors import SingularGenfun, TruncationBoundary
from .model import (
    ModelParams,
    MultiIndex,
    enumerate_lattice,
    unit_shift,
    weight_vector,
)
from .polynomials import poly_values
from .spectral import SpectralData

_SINGULAR_EPS = 1e-12


def birth_rate(p: ModelParams, x: MultiIndex) -> float:
    """B_j(x) = beta + |x|, identical for every direction j."""
    return p.beta + sum(x)


def death_rate(p: ModelParams, x: MultiIndex, j: int) -> float:
    """D_j(x) = x_j / c_j; vanishes at x_j = 0, which is the boundary condition."""
    return x[j] / p.c[j]


@dataclass
class LatticeFunction:
    """Function values on {|x| <= S}, the domain shifts read from."""

    S: int
    values: dict[MultiIndex, float]

    @classmethod
    def from_callable(
        cls, n: int, S: int, fn: Callable[[MultiIndex], float]
    ) -> "LatticeFunction":
        return cls(S=S, values={x: fn(x) for x in enumerate_lattice(n, S)})

    def __getitem__(self, x: MultiIndex) -> float:
        return self.values[x]


def poly_lattice_function(
    p: ModelParams, sd: SpectralData, m: MultiIndex, S: int
) -> LatticeFunction:
    """P_m tabulated on {|x| <= S}."""
    lat = enumerate_lattice(p.n, S)
    vals = poly_values(p, sd, m, np.array(lat, dtype=int))
    return LatticeFunction(S=S, values=dict(zip(lat, vals.tolist())))


def apply_Htilde(p: ModelParams, f: LatticeFunction, x: MultiIndex) -> float:
    """(H-tilde f)(x) = (beta+|x|) sum_j (f(x) - f(x+e_j))
                       + sum_j (x_j/c_j) (f(x) - f(x-e_j)).

    Needs every x+e_j inside the truncation; the x_j = 0 death term
    contributes nothing, so the lattice boundary at zero is automatic.
    """
    if sum(x) + 1 > f.S:
        raise TruncationBoundary(
            f"x={x} has |x|+1 > S={f.S}; apply at interior points only"
        )
    fx = f[x]
    b = birth_rate(p, x)
    out = 0.0
    for j in range(p.n):
        out += b * (fx - f[unit_shift(x, j, +1)])
        if x[j]:
            out += (x[j] / p.c[j]) * (fx - f[unit_shift(x, j, -1)])
    return out


def eigen_check(
    p: ModelParams,
    sd: SpectralData,
    m: MultiIndex,
    sample: Iterable[MultiIndex],
) -> float:
    """max over sample of |H-tilde P_m - E(m) P_m| / (1 + |P_m|), E(m) = sum m_j lam_j."""
    sample = list(sample)
    if not sample:
        return 0.0
    S = max(sum(x) for x in sample) + 1
    f = poly_lattice_function(p, sd, m, S)
    energy = sd.energy(m)
    worst = 0.0
    for x in sample:
        fx = f[x]
        res = abs(apply_Htilde(p, f, x) - energy * fx) / (1.0 + abs(fx))
        worst = max(worst, res)
    return worst


# ---------------------------------------------------------------------------
# matrix realizations on the truncated lattice
# ---------------------------------------------------------------------------

def build_H(p: ModelParams, S: int) -> sp.csr_matrix:
    """Symmetric H on {|x| <= S}: diagonal sum_j (B_j + D_j), off-diagonal
    -sqrt(B_j(x) D_j(x+e_j)) at x <-> x+e_j.  Both triangle entries are
    written from the same float, so the result is bitwise symmetric."""
    lat = enumerate_lattice(p.n, S)
    idx = {x: i for i, x in enumerate(lat)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, x in enumerate(lat):
        diag = math.fsum(
            birth_rate(p, x) + death_rate(p, x, j) for j in range(p.n)
        )
        rows.append(i)
        cols.append(i)
        vals.append(diag)
        if sum(x) + 1 <= S:
            for j in range(p.n):
                y = unit_shift(x, j, +1)
                v = -math.sqrt(birth_rate(p, x) * death_rate(p, y, j))
                k = idx[y]
                rows.extend((i, k))
                cols.extend((k, i))
                vals.extend((v, v))
    size = len(lat)
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def build_A(p: ModelParams, S: int, j: int) -> sp.csr_matrix:
    """Factor A_j on {|x| <= S}: A_j[x, x] = sqrt(B_j(x)),
    A_j[x, x+e_j] = -sqrt(D_j(x+e_j))."""
    lat = enumerate_lattice(p.n, S)
    idx = {x: i for i, x in enumerate(lat)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, x in enumerate(lat):
        rows.append(i)
        cols.append(i)
        vals.append(math.sqrt(birth_rate(p, x)))
        if sum(x) + 1 <= S:
            y = unit_shift(x, j, +1)
            rows.append(i)
            cols.append(idx[y])
            vals.append(-math.sqrt(death_rate(p, y, j)))
    size = len(lat)
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def build_LBD(p: ModelParams, S: int) -> sp.csr_matrix:
    """Generator acting on distributions: (L P)(x) = -sum_j (B_j + D_j)(x) P(x)
    + sum_j B_j(x-e_j) P(x-e_j) + sum_j D_j(x+e_j) P(x+e_j), soft-truncated."""
    lat = enumerate_lattice(p.n, S)
    idx = {x: i for i, x in enumerate(lat)}
    rows: list[int] = []
    cols: list[int] = []
    vals: list[float] = []
    for i, x in enumerate(lat):
        rows.append(i)
        cols.append(i)
        vals.append(
            -math.fsum(birth_rate(p, x) + death_rate(p, x, j) for j in range(p.n))
        )
        for j in range(p.n):
            if x[j]:
                y = unit_shift(x, j, -1)
                rows.append(i)
                cols.append(idx[y])
                vals.append(birth_rate(p, y))
            if sum(x) + 1 <= S:
                y = unit_shift(x, j, +1)
                rows.append(i)
                cols.append(idx[y])
                vals.append(death_rate(p, y, j))
    size = len(lat)
    return sp.coo_matrix((vals, (rows, cols)), shape=(size, size)).tocsr()


def interior_mask(n: int, S: int) -> np.ndarray:
    """True where |x| <= S-1, i.e. every x+e_j coupling stayed inside."""
    return np.array([sum(x) + 1 <= S for x in enumerate_lattice(n, S)])


def factorization_check(p: ModelParams, S: int) -> float:
    """max |H - sum_j A_j^T A_j| over interior rows.

    H multiplies the rates under one square root, the A route takes two;
    agreement is therefore a rounding-level check of the factorization, not
    a tautology.
    """
    H = build_H(p, S)
    acc = sum(
        (build_A(p, S, j).T @ build_A(p, S, j) for j in range(p.n)),
        start=sp.csr_matrix(H.shape),
    )
    diff = (H - acc).toarray()
    return float(np.abs(diff[interior_mask(p.n, S)]).max())


def operator_algebra_report(p: ModelParams, S: int) -> dict[str, float]:
    """All the H-level checks in one pass:

    - symmetry_defect: max |H - H^T| (must be exactly 0 by construction)
    - factorization: max |H - sum A^T A| on interior rows
    - H_sqrtW: max |H sqrt(W)| on interior rows, relative to ||sqrt(W)||
    - A_sqrtW: max over j of |A_j sqrt(W)| on interior rows
    - min_interior_eigenvalue: smallest eigenvalue of the interior principal
      submatrix (positive semi-definiteness of the truncated operator)
    """
    H = build_H(p, S)
    lat = enumerate_lattice(p.n, S)
    inner = interior_mask(p.n, S)
    sqrt_w = np.sqrt(weight_vector(p, lat))

    sym = float(np.abs((H - H.T).toarray()).max())
    fac = factorization_check(p, S)
    h_w = float(np.abs((H @ sqrt_w)[inner]).max()) / float(
        np.linalg.norm(sqrt_w)
    )
    a_w = max(
        float(np.abs((build_A(p, S, j) @ sqrt_w)[inner]).max())
        for j in range(p.n)
    )
    sub = H.toarray()[np.ix_(inner, inner)]
    min_eig = float(np.linalg.eigvalsh(sub)[0])
    return {
        "symmetry_defect": sym,
        "factorization": fac,
        "H_sqrtW": h_w,
        "A_sqrtW": a_w,
        "min_interior_eigenvalue": min_eig,
    }


# ---------------------------------------------------------------------------
# generating-function eigen identity
# ---------------------------------------------------------------------------

def genfun_value(
    p: ModelParams, sd: SpectralData, x: MultiIndex, t: Sequence[float]
) -> float:
    """Closed-form G(x; t) = (1-|t|)^(-beta-|x|) prod_i (1 - sum_j b_ij t_j)^(x_i)."""
    tmass = math.fsum(t)
    base = 1.0 - tmass
    if base < _SINGULAR_EPS:
        raise SingularGenfun(f"1 - |t| = {base:.3e} at t={tuple(t)}")
    value = base ** (-(p.beta + sum(x)))
    b = sd.b
    for i in range(p.n):
        fac = 1.0 - math.fsum(b[i][j] * t[j] for j in range(p.n))
        if x[i] and abs(fac) < _SINGULAR_EPS:
            raise SingularGenfun(f"factor {i} of G vanishes at t={tuple(t)}")
        value *= fac ** x[i]
    return value


def _htilde_on_genfun(
    p: ModelParams, sd: SpectralData, x: MultiIndex, t: Sequence[float]
) -> float:
    gx = genfun_value(p, sd, x, t)
    b = p.beta + sum(x)
    out = 0.0
    for j in range(p.n):
        out += b * (gx - genfun_value(p, sd, unit_shift(x, j, +1), t))
        if x[j]:
            out += (x[j] / p.c[j]) * (
                gx - genfun_value(p, sd, unit_shift(x, j, -1), t)
            )
    return out


def _scaling_deriv_fd(
    p: ModelParams, sd: SpectralData, x: MultiIndex, t: Sequence[float], h: float
) -> float:
    """sum_k lam_k t_k dG/dt_k by central differences with step h."""
    out = 0.0
    for k in range(p.n):
        if t[k] == 0.0:
            continue
        tp = list(t)
        tm = list(t)
        tp[k] += h
        tm[k] -= h
        deriv = (genfun_value(p, sd, x, tp) - genfun_value(p, sd, x, tm)) / (2 * h)
        out += sd.lam[k] * t[k] * deriv
    return out


def genfun_identity_check(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    t: Sequence[float],
    h: float = 1e-5,
) -> dict[str, float]:
    """Residual of (H-tilde G)(x; t) = sum_k lam_k t_k dG/dt_k at one point.

    The left side applies the difference operator in x to the closed form;
    the right side is a finite-difference derivative in t, so the residual
    is O(h^2) when the identity holds.
    """
    lhs = _htilde_on_genfun(p, sd, x, t)
    rhs = _scaling_deriv_fd(p, sd, x, t, h)
    return {"lhs": lhs, "rhs": rhs, "residual": abs(lhs - rhs)}


def genfun_identity_richardson(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    t: Sequence[float],
    h: float = 1e-5,
) -> dict[str, float]:
    """genfun_identity_check at h and h/2 plus the Richardson-extrapolated
    derivative; residual_h / residual_h2 near 4 confirms the O(h^2) scaling."""
    lhs = _htilde_on_genfun(p, sd, x, t)
    rhs_h = _scaling_deriv_fd(p, sd, x, t, h)
    rhs_h2 = _scaling_deriv_fd(p, sd, x, t, h / 2)
    rich = (4.0 * rhs_h2 - rhs_h) / 3.0
    return {
        "lhs": lhs,
        "residual_h": abs(lhs - rhs_h),
        "residual_h2": abs(lhs - rhs_h2),
        "residual": abs(lhs - rich),
    }
