"""Probabilistic layer: weights, orthogonality, spectral transition
probabilities, Chapman-Kolmogorov, and an exact-jump stochastic simulator.

The spectral route expresses the transition probability through the
orthonormal vectors phi_m = sqrt(W) P_m sqrt(Wbar); the simulator runs the
continuous-time chain itself.  The two never share code, so their agreement
cross-validates the whole construction.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import chi2 as chi2_dist

from .errors import NegativeTime, TailTooLarge
from .model import (
    ModelParams,
    MultiIndex,
    compositions,
    compositions_upto,
    enumerate_lattice,
    log_shifted_factorial,
    shifted_factorial,
    tail_bound,
    weight,
    weight_vector,
)
from .polynomials import meixner_eval, poly_table
from .spectral import SpectralData

# Simulator limits and comparison hygiene.
MAX_EVENTS_PER_TRAJECTORY = 1_000_000
POOL_EXPECTED_COUNT = 5.0
RNG_NAME = "philox"


# ---------------------------------------------------------------------------
# dual weight
# ---------------------------------------------------------------------------

def wbar(p: ModelParams, sd: SpectralData, m: MultiIndex) -> float:
    """Wbar(m) = (beta)_{|m|} cbar^m / m!."""
    out = shifted_factorial(p.beta, sum(m))
    for mj, cj in zip(m, sd.cbar):
        out *= cj**mj / math.factorial(mj)
    return out


def wbar_vector(
    p: ModelParams, sd: SpectralData, m_list: Sequence[MultiIndex]
) -> np.ndarray:
    return np.array([wbar(p, sd, m) for m in m_list])


def wbar_total(p: ModelParams, sd: SpectralData) -> float:
    """sum_m Wbar(m) = (1 - |cbar|)^(-beta); finite because |cbar| < 1."""
    mass = math.fsum(sd.cbar)
    if not mass < 1.0:
        raise TailTooLarge(f"|cbar| = {mass} >= 1; dual weight not summable")
    return (1.0 - mass) ** (-p.beta)


def phi_hat(
    p: ModelParams, sd: SpectralData, m: MultiIndex, x: MultiIndex
) -> float:
    """Orthonormal vector entry sqrt(W(x)) P_m(x) sqrt(Wbar(m))."""
    return math.sqrt(weight(p, x)) * meixner_eval(p, sd, m, x) * math.sqrt(
        wbar(p, sd, m)
    )


def phi_matrix(
    p: ModelParams,
    sd: SpectralData,
    m_list: Sequence[MultiIndex],
    lattice: Sequence[MultiIndex],
) -> np.ndarray:
    """phi entries, shape (len(m_list), len(lattice))."""
    table = poly_table(p, sd, max(sum(m) for m in m_list), max(sum(x) for x in lattice))
    rows = [table.m_list.index(tuple(m)) for m in m_list]
    cols = [table.x_list.index(tuple(x)) for x in lattice]
    P = table.values[np.ix_(rows, cols)]
    sw = np.sqrt(weight_vector(p, lattice))
    swb = np.sqrt(wbar_vector(p, sd, m_list))
    return swb[:, None] * P * sw[None, :]


def completeness_residual(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    y: MultiIndex,
    M: int,
) -> float:
    """|sum_{|m| <= M} phi_m(x) phi_m(y) - delta_xy|; decreasing in M."""
    total = math.fsum(
        phi_hat(p, sd, m, x) * phi_hat(p, sd, m, y)
        for m in compositions_upto(M, p.n)
    )
    return abs(total - (1.0 if tuple(x) == tuple(y) else 0.0))


# ---------------------------------------------------------------------------
# orthogonality and moments
# ---------------------------------------------------------------------------

@dataclass
class OrthogonalityReport:
    m_list: tuple[MultiIndex, ...]
    gram: np.ndarray       # sum_x W P_m P_m'
    residuals: np.ndarray  # |gram| off-diagonal, |gram * Wbar - 1| on diagonal
    S: int
    tail_term: float       # tail_bound(S) * max |P|^2

    @property
    def max_offdiag(self) -> float:
        off = self.residuals.copy()
        np.fill_diagonal(off, 0.0)
        return float(off.max()) if off.size else 0.0

    @property
    def max_diag(self) -> float:
        return float(np.diag(self.residuals).max())


def orthogonality_check(
    p: ModelParams,
    sd: SpectralData,
    max_deg: int,
    S: int,
    tail_eps: float = 1e-8,
) -> OrthogonalityReport:
    """Gram matrix of {P_m : |m| <= max_deg} under W on {|x| <= S} against
    the exact norms delta_mm' / Wbar(m).

    Raises TailTooLarge when tail_bound(S) * max|P|^2 exceeds tail_eps: the
    omitted lattice mass could then swamp the requested resolution.
    """
    table = poly_table(p, sd, max_deg, S)
    w = weight_vector(p, table.x_list)
    max_p = float(np.abs(table.values).max())
    tail_term = tail_bound(p, S) * max_p**2
    if tail_term > tail_eps:
        raise TailTooLarge(
            f"tail_bound(S={S}) * max|P|^2 = {tail_term:.3e} > {tail_eps:.1e}; "
            "increase S"
        )
    gram = (table.values * w[None, :]) @ table.values.T
    wb = wbar_vector(p, sd, table.m_list)
    residuals = np.abs(gram)
    diag = np.abs(np.diag(gram) * wb - 1.0)
    np.fill_diagonal(residuals, diag)
    return OrthogonalityReport(
        m_list=table.m_list, gram=gram, residuals=residuals, S=S, tail_term=tail_term
    )


def choose_orthogonality_S(
    p: ModelParams,
    sd: SpectralData,
    max_deg: int,
    tail_eps: float = 1e-8,
    start: int = 20,
    step: int = 10,
    max_S: int = 400,
) -> int:
    """Smallest tried S with tail_bound(S) * max|P|^2 <= tail_eps."""
    S = start
    while S <= max_S:
        table = poly_table(p, sd, max_deg, S)
        max_p = float(np.abs(table.values).max())
        if tail_bound(p, S) * max_p**2 <= tail_eps:
            return S
        S += step
    raise TailTooLarge(f"no S <= {max_S} reaches tail target {tail_eps:.1e}")


def tail_moment_bound(p: ModelParams, S: int, power: int) -> float:
    """sum_{s > S} s^power * (beta)_s |c|^s / s! * (1-|c|)^beta."""
    q = p.c_mass
    s = S + 1
    log_term = (
        log_shifted_factorial(p.beta, s)
        + s * math.log(q)
        - math.lgamma(s + 1)
        + p.beta * math.log1p(-q)
    )
    term = math.exp(log_term)
    total = 0.0
    for _ in range(200_000):
        total += term * s**power
        term *= (p.beta + s) * q / (s + 1)
        s += 1
        if term * s**power <= total * 1e-17 or term < 5e-324:
            break
    return total


def moment_check(p: ModelParams, S: int | None = None) -> dict[str, float]:
    """First and second moments of W by direct lattice summation against the
    closed forms c_j beta/(1-|c|) and beta(beta+1)c_j c_k/(1-|c|)^2 (+ the
    diagonal correction)."""
    if S is None:
        S = 20
        while tail_moment_bound(p, S, 2) > 1e-13 and S < 400:
            S += 20
    lat = enumerate_lattice(p.n, S)
    w = weight_vector(p, lat)
    X = np.array(lat, dtype=float)
    q = p.c_mass
    c = np.asarray(p.c)

    mean = w @ X
    mean_exact = c * p.beta / (1.0 - q)
    second = (X.T * w[None, :]) @ X
    second_exact = (
        p.beta * (p.beta + 1.0) * np.outer(c, c) / (1.0 - q) ** 2
        + np.diag(p.beta * c / (1.0 - q))
    )
    return {
        "mean": float(np.abs(mean - mean_exact).max()),
        "second": float(np.abs(second - second_exact).max()),
        "S": float(S),
    }


# ---------------------------------------------------------------------------
# spectral transition probability
# ---------------------------------------------------------------------------

@dataclass
class TransitionReport:
    """One (x, y, t) spectral evaluation; simulated fields filled by the
    simulator comparison when available."""

    x: MultiIndex
    y: MultiIndex
    t: float
    M_cutoff: int
    spectral_value: float
    reduced_value: float
    forms_gap: float
    nonnegative: bool
    simulated_value: float | None = None
    simulated_stderr: float | None = None


def choose_spectral_cutoff(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    y: MultiIndex,
    t: float,
    eps: float = 1e-10,
    max_M: int = 200,
) -> int:
    """Smallest degree cutoff whose next shell is provably below eps.

    Shell |m| = M contributes at most sqrt(W(x)/W(y)) * exp(-lam_min M t) by
    orthonormality (shell sums of phi products are bounded by 1), so the
    bound is t-dependent: short times need far more shells.
    """
    if t <= 0:
        raise NegativeTime(f"adaptive cutoff needs t > 0, got {t}")
    prefactor = math.exp(0.5 * (math.log(weight(p, x)) - math.log(weight(p, y))))
    M = 1
    while M < max_M and prefactor * math.exp(-sd.lam[0] * M * t) >= eps:
        M += 1
    return M


def transition_prob(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    y: MultiIndex,
    t: float,
    M: int | None = None,
) -> TransitionReport:
    """T(x, y; t) truncated at |m| <= M, computed twice:

    - phi form: phi_0(x)/phi_0(y) * sum_m exp(-E(m) t) phi_m(x) phi_m(y)
    - reduced:  W(x) * sum_m Wbar(m) exp(-E(m) t) P_m(x) P_m(y)

    The two are algebraically identical; their gap is reported and must sit
    at rounding level.

    Index convention: x is the state occupied at time t, y the start.
    Conservation therefore sums over the first argument,
    sum_x T(x, y; t) = 1, which is also what the t -> infinity limit
    T -> W(x) requires.

    With M=None the cutoff is chosen adaptively via choose_spectral_cutoff
    (t must then be positive).
    """
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    if M is None:
        M = choose_spectral_cutoff(p, sd, x, y, t)
    wx = weight(p, x)
    wy = weight(p, y)
    phi_sum = 0.0
    reduced = 0.0
    for m in compositions_upto(M, p.n):
        decay = math.exp(-sd.energy(m) * t)
        wb = wbar(p, sd, m)
        px = meixner_eval(p, sd, m, x)
        py = meixner_eval(p, sd, m, y)
        phi_sum += decay * (math.sqrt(wx) * px * math.sqrt(wb)) * (
            math.sqrt(wy) * py * math.sqrt(wb)
        )
        reduced += wb * decay * px * py
    value = math.sqrt(wx) / math.sqrt(wy) * phi_sum
    reduced *= wx
    gap = abs(value - reduced)
    return TransitionReport(
        x=tuple(x),
        y=tuple(y),
        t=t,
        M_cutoff=M,
        spectral_value=value,
        reduced_value=reduced,
        forms_gap=gap,
        nonnegative=value >= -1e-9,
    )


def transition_matrix(
    p: ModelParams, sd: SpectralData, t: float, M: int, S: int
) -> np.ndarray:
    """T(x, y; t) for all |x|, |y| <= S (graded-lex), reduced form.

    Columns are indexed by the start y: each column is a probability
    distribution over the first index, accurate where the state stays well
    inside the truncation.
    """
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    table = poly_table(p, sd, M, S)
    w = weight_vector(p, table.x_list)
    decay = wbar_vector(p, sd, table.m_list) * np.exp(
        -np.array([sd.energy(m) for m in table.m_list]) * t
    )
    return w[:, None] * (table.values.T @ (decay[:, None] * table.values))


def conservation_defect(
    p: ModelParams, sd: SpectralData, y: MultiIndex, t: float, M: int, S: int
) -> float:
    """|1 - sum_{|x| <= S} T(x, y; t)|: escaped mass plus spectral truncation."""
    lat = enumerate_lattice(p.n, S)
    idx = {v: i for i, v in enumerate(lat)}
    T = transition_matrix(p, sd, t, M, S)
    return abs(1.0 - float(T[:, idx[tuple(y)]].sum()))


def chapman_kolmogorov_check(
    p: ModelParams,
    sd: SpectralData,
    x: MultiIndex,
    y: MultiIndex,
    t: float,
    t_prime: float,
    S: int,
    M: int,
) -> dict[str, float]:
    """|T(x,y; t+t') - sum_{|z| <= S} T(x,z; t) T(z,y; t')| with an estimate
    of what the z- and m-truncations can contribute."""
    lat = enumerate_lattice(p.n, S)
    idx = {v: i for i, v in enumerate(lat)}
    ix, iy = idx[tuple(x)], idx[tuple(y)]
    Tt = transition_matrix(p, sd, t, M, S)
    Tp = transition_matrix(p, sd, t_prime, M, S)
    direct = transition_matrix(p, sd, t + t_prime, M, S)
    composed = Tt[ix] @ Tp[:, iy]
    residual = abs(direct[ix, iy] - composed)

    # the z-sum misses sum_{|z|>S} T(x,z;t) T(z,y;t'); the second factor's
    # escaped column mass times the largest first-leg kernel value bounds it
    escaped = abs(1.0 - float(Tp[:, iy].sum()))
    z_escape = escaped * float(np.abs(Tt[ix]).max())
    shell = _top_shell_contribution(p, sd, x, y, t + t_prime, M)
    return {
        "residual": float(residual),
        "direct": float(direct[ix, iy]),
        "composed": float(composed),
        "start_column_defect": escaped,
        "z_escape_estimate": z_escape,
        "top_shell_contribution": shell,
    }


def _top_shell_contribution(
    p: ModelParams, sd: SpectralData, x, y, t: float, M: int
) -> float:
    total = 0.0
    for m in compositions(M, p.n):
        total += abs(
            wbar(p, sd, m)
            * math.exp(-sd.energy(m) * t)
            * meixner_eval(p, sd, m, x)
            * meixner_eval(p, sd, m, y)
        )
    return weight(p, x) * total


# ---------------------------------------------------------------------------
# exact-jump simulation
# ---------------------------------------------------------------------------

@dataclass
class SimulationResult:
    x0: MultiIndex
    t: float
    seed: int
    n_traj: int
    counts: Counter = field(repr=False)
    cap_hits: int = 0
    bit_generator: str = RNG_NAME


def _run_trajectory(
    p: ModelParams, x0: MultiIndex, t_end: float, rng, max_events: int
) -> tuple[MultiIndex, bool]:
    n = p.n
    c = p.c
    beta = p.beta
    x = list(x0)
    sx = sum(x)
    t = 0.0
    events = 0
    buf = rng.random(512)
    pos = 0
    while True:
        if events >= max_events:
            return tuple(x), True
        per_birth = beta + sx
        total = n * per_birth
        for j in range(n):
            total += x[j] / c[j]
        if pos + 2 > buf.size:
            buf = rng.random(512)
            pos = 0
        u_wait = buf[pos]
        u_pick = buf[pos + 1]
        pos += 2
        t += -math.log1p(-u_wait) / total
        if t > t_end:
            return tuple(x), False
        events += 1
        pick = u_pick * total
        if pick < n * per_birth:
            j = min(int(pick / per_birth), n - 1)
            x[j] += 1
            sx += 1
        else:
            pick -= n * per_birth
            target = None
            for j in range(n):
                if x[j]:
                    target = j
                    pick -= x[j] / c[j]
                    if pick < 0.0:
                        break
            x[target] -= 1
            sx -= 1


def simulate(
    p: ModelParams,
    x0: MultiIndex,
    t: float,
    seed: int,
    n_traj: int,
    max_events: int = MAX_EVENTS_PER_TRAJECTORY,
) -> SimulationResult:
    """n_traj independent exact-jump trajectories of the chain with rates
    B_j = beta+|x|, D_j = x_j/c_j, each run to time t.

    Trajectory i draws from Philox keyed by (seed, i), so results do not
    depend on execution order; trajectories hitting the event cap are
    counted in cap_hits and contribute their state at the cap.
    """
    if t < 0:
        raise NegativeTime(f"t must be >= 0, got {t}")
    counts: Counter = Counter()
    cap_hits = 0
    for i in range(n_traj):
        rng = np.random.Generator(np.random.Philox(key=[seed, i]))
        state, capped = _run_trajectory(p, x0, t, rng, max_events)
        counts[state] += 1
        cap_hits += capped
    return SimulationResult(
        x0=tuple(x0), t=t, seed=seed, n_traj=n_traj, counts=counts, cap_hits=cap_hits
    )


# ---------------------------------------------------------------------------
# simulated vs spectral comparison
# ---------------------------------------------------------------------------

@dataclass
class StateRow:
    state: MultiIndex
    count: int
    frequency: float
    stderr: float
    spectral: float
    z: float | None  # None when the expected count is below the pooling floor


@dataclass
class ComparisonReport:
    rows: list[StateRow]
    chi2: float
    dof: int
    p_value: float
    max_abs_z: float
    pooled_rest_expected: float
    sim: SimulationResult


def compare_sim_spectral(
    p: ModelParams,
    sd: SpectralData,
    sim: SimulationResult,
    M: int,
    pool_expected: float = POOL_EXPECTED_COUNT,
) -> ComparisonReport:
    """Per-state z-scores against the spectral row T(x0, .; t), plus a
    chi-square over the states whose expected count reaches pool_expected
    (everything below pools into one remainder cell)."""
    N = sim.n_traj
    S = max(max((sum(s) for s in sim.counts), default=0), sum(sim.x0)) + 5
    probs, lat = _spectral_column(p, sd, sim.x0, sim.t, M, S)

    idx = {s: i for i, s in enumerate(lat)}
    rows: list[StateRow] = []
    cells: list[tuple[float, int]] = []
    covered_p = 0.0
    covered_n = 0
    max_abs_z = 0.0
    for s in lat:
        prob = max(float(probs[idx[s]]), 0.0)
        count = sim.counts.get(s, 0)
        if count == 0 and N * prob < pool_expected:
            continue
        freq = count / N
        stderr = math.sqrt(max(freq * (1.0 - freq), 0.0) / N)
        if N * prob >= pool_expected:
            z = (freq - prob) / math.sqrt(prob * (1.0 - prob) / N)
            cells.append((prob, count))
            covered_p += prob
            covered_n += count
            max_abs_z = max(max_abs_z, abs(z))
        else:
            z = None
        rows.append(
            StateRow(
                state=s, count=count, frequency=freq, stderr=stderr,
                spectral=prob, z=z,
            )
        )
    rest_p = max(1.0 - covered_p, 0.0)
    rest_n = N - covered_n
    if rest_p * N > 1e-9:
        cells.append((rest_p, rest_n))
    stat = math.fsum((n_obs - N * pr) ** 2 / (N * pr) for pr, n_obs in cells)
    dof = max(len(cells) - 1, 1)
    p_value = float(chi2_dist.sf(stat, dof))
    return ComparisonReport(
        rows=rows,
        chi2=stat,
        dof=dof,
        p_value=p_value,
        max_abs_z=max_abs_z,
        pooled_rest_expected=rest_p * N,
        sim=sim,
    )


def _spectral_column(
    p: ModelParams,
    sd: SpectralData,
    x0: MultiIndex,
    t: float,
    M: int,
    S: int,
    mass_tol: float = 1e-8,
) -> tuple[np.ndarray, list[MultiIndex]]:
    """Distribution T(., x0; t) over {|x| <= S}, growing S until the mass closes."""
    while True:
        lat = enumerate_lattice(p.n, S)
        idx = {v: i for i, v in enumerate(lat)}
        T = transition_matrix(p, sd, t, M, S)
        col = T[:, idx[tuple(x0)]]
        if abs(1.0 - float(col.sum())) <= mass_tol or S >= 120:
            return col, lat
        S += 10
