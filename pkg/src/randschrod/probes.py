"""Resolvent-decay, gap-probability and scale-recursion probes.

Everything here is either a deterministic linear-algebra check on an
assembled box operator or a seeded Monte Carlo estimate; reductions are
plain ordered sums so results do not depend on worker scheduling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .hamiltonian import AssembledHamiltonian, BoundaryCondition, GridSpec
from .hscalc import smoothstep
from .model import AndersonModel

__all__ = [
    "ResolventDecayProfile",
    "GapProbabilityEstimate",
    "ThetaAverageReport",
    "FixedThetaReport",
    "MsaSchedule",
    "RegularityTestResult",
    "wilson_interval",
    "combes_thomas_profile",
    "gap_probability",
    "theta_average_check",
    "fixed_theta_check",
    "msa_schedule",
    "ring_cutoff",
    "core_indicator",
    "laplacian_commutator",
    "m_regularity_test",
    "alpha_n_feasible",
]

_Z95 = 1.959963984540054


def wilson_interval(hits: int, total: int, z: float = _Z95) -> tuple[float, float]:
    """Wilson score interval; well-behaved at 0 and total hits."""
    if total < 1:
        raise ValueError("need at least one trial")
    if not 0 <= hits <= total:
        raise ValueError("hit count outside [0, total]")
    phat = hits / total
    denom = 1.0 + z * z / total
    center = (phat + z * z / (2 * total)) / denom
    half = z * math.sqrt(phat * (1 - phat) / total + z * z / (4 * total * total)) / denom
    return max(0.0, center - half), min(1.0, center + half)


def _cell_flat_indices(grid: GridSpec, cell: tuple[int, ...]) -> np.ndarray:
    if len(cell) != grid.dimension:
        raise ValueError(f"cell index needs {grid.dimension} components")
    for c, total in zip(cell, grid.cells):
        if not 0 <= c < total:
            raise ValueError(f"cell {cell} outside the {grid.cells} box")
    p = grid.points_per_cell
    axes = [np.arange(c * p, (c + 1) * p) for c in cell]
    if grid.dimension == 1:
        return axes[0]
    return (axes[0][:, None] * grid.shape[1] + axes[1][None, :]).ravel()


@dataclass(frozen=True)
class ResolventDecayProfile:
    """Cell-block resolvent norms away from an anchor cell, with a log-linear fit."""

    probe: complex
    anchor: tuple[int, ...]
    distances: tuple[int, ...]
    norms: tuple[float, ...]
    rate: float
    prefactor: float
    r_squared: float
    dist_to_spectrum: float
    fitted_points: int

    @property
    def rate_per_dist(self) -> float:
        """Fitted model constant c in rate ~ c * dist(z, spectrum)."""
        return self.rate / self.dist_to_spectrum

    def norm_at(self, distance: int) -> float:
        best = [n for d, n in zip(self.distances, self.norms) if d == distance]
        if not best:
            raise KeyError(f"no cell at distance {distance} in the profile")
        return max(best)


def combes_thomas_profile(
    h: AssembledHamiltonian,
    z: complex,
    anchor: tuple[int, ...],
    max_distance: int,
    norm_floor: float = 1e-12,
) -> ResolventDecayProfile:
    """Decay of ||chi_x (H - z)^{-1} chi_y|| in the cell distance |x - y|.

    chi blocks are unit cells (p^d points).  The rate comes from a least
    squares fit of log norm against sup-norm cell distance, ignoring
    norms that fell below ``norm_floor`` (double precision noise).
    """
    grid = h.grid
    evals = h.eigenvalues()
    dist = float(np.min(np.abs(evals - z)))
    if dist < 1e-8:
        raise ValueError(f"probe {z} sits on the spectrum (distance {dist:.2e})")

    anchor = tuple(int(c) for c in anchor)
    cols = _cell_flat_indices(grid, anchor)
    mat = sp.csc_matrix(h.matrix.astype(complex) - z * sp.identity(h.n, format="csr"))
    rhs = np.zeros((h.n, len(cols)), dtype=complex)
    rhs[cols, np.arange(len(cols))] = 1.0
    solve = splu(mat).solve
    x = solve(rhs)

    if grid.dimension == 1:
        cells = [(c,) for c in range(grid.cells[0])]
    else:
        cells = [(c1, c2) for c1 in range(grid.cells[0]) for c2 in range(grid.cells[1])]
    distances, norms = [], []
    for cell in cells:
        d = max(abs(c - a) for c, a in zip(cell, anchor))
        if d > max_distance:
            continue
        block = x[_cell_flat_indices(grid, cell), :]
        distances.append(d)
        norms.append(float(scipy.linalg.svdvals(block)[0]))

    dist_arr = np.asarray(distances, dtype=float)
    norm_arr = np.asarray(norms, dtype=float)
    keep = norm_arr > norm_floor
    if np.sum(keep) < 2:
        raise ValueError("not enough usable norms above the floor to fit a rate")
    xv, yv = dist_arr[keep], np.log(norm_arr[keep])
    design = np.stack([xv, np.ones_like(xv)], axis=1)
    coef, *_ = np.linalg.lstsq(design, yv, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    fitted = design @ coef
    ss_res = float(np.sum((yv - fitted) ** 2))
    ss_tot = float(np.sum((yv - yv.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return ResolventDecayProfile(
        probe=complex(z),
        anchor=anchor,
        distances=tuple(int(d) for d in distances),
        norms=tuple(norms),
        rate=-slope,
        prefactor=math.exp(intercept),
        r_squared=r2,
        dist_to_spectrum=dist,
        fitted_points=int(np.sum(keep)),
    )


@dataclass(frozen=True)
class GapProbabilityEstimate:
    side: int
    alpha: float
    window: float
    boundary: str
    samples: int
    hits: int
    estimate: float
    interval: tuple[float, float]

    def __post_init__(self) -> None:
        if not 0 <= self.hits <= self.samples:
            raise ValueError("hits outside [0, samples]")


def _zone_extent(side: int) -> float:
    # dual-torus extent of the (2*side+1)-periodic approximation; the
    # theta-boundary remark for the restricted cube uses the same zone
    return math.pi / (2 * side + 1)


def gap_probability(
    model: AndersonModel,
    side: int,
    alpha: float,
    realizations: int,
    theta0: tuple[float, ...] | None = None,
    base_realization: int = 0,
    check_edge: bool = True,
    edge_tolerance: float = 1e-6,
) -> GapProbabilityEstimate:
    """P{an eigenvalue of the wrapped side-l box falls in [0, l^-alpha)}.

    The box has ``side`` cells per axis with periodic boundary
    conditions, or theta-boundary conditions when ``theta0`` is given;
    theta0 components are zone points with |theta| <= pi/(2*side+1) and
    translate to a wrap phase of side * theta across the box.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in ]0,1[, got {alpha}")
    if side < 2:
        raise ValueError("side must be >= 2")
    if check_edge:
        edge = model.band_minimum()
        if abs(edge) > edge_tolerance:
            raise ValueError(
                f"lowest band sits at {edge:.3e}, not 0; shift the model first"
            )
    if theta0 is None:
        bc = BoundaryCondition.periodic()
        boundary = "periodic"
    else:
        extent = _zone_extent(side)
        for t in theta0:
            if abs(t) > extent + 1e-12:
                raise ValueError(
                    f"theta component {t} outside the reduced zone [+-{extent:.6f}]"
                )
        bc = BoundaryCondition.with_phases(tuple(side * t for t in theta0))
        boundary = "theta(" + ",".join(f"{t:.6g}" for t in theta0) + ")"

    window = float(side) ** (-alpha)
    hits = 0
    for m in range(realizations):
        h = model.anderson_box(side, bc, base_realization + m)
        evals = h.eigenvalues(upper=window)
        if np.any(evals >= 0.0):
            hits += 1
    return GapProbabilityEstimate(
        side=side,
        alpha=alpha,
        window=window,
        boundary=boundary,
        samples=realizations,
        hits=hits,
        estimate=hits / realizations,
        interval=wilson_interval(hits, realizations),
    )


def _zone_nodes(model: AndersonModel, half_width: int, resolution: int):
    from .bands import brillouin_zone

    zone = brillouin_zone(half_width, model.dimension)
    axis = zone.midpoint_axis(resolution)
    if model.dimension == 1:
        return [(t,) for t in axis]
    return [(a, b) for a in axis for b in axis]


@dataclass(frozen=True)
class ThetaAverageReport:
    half_width: int
    energy: float
    realizations: int
    theta_resolution: int
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    @property
    def passed(self) -> bool:
        return self.lhs <= self.rhs + 2.0 * math.hypot(self.lhs_stderr, self.rhs_stderr)


def theta_average_check(
    model: AndersonModel,
    half_width: int,
    energy: float,
    realizations: int,
    theta_resolution: int = 8,
    base_realization: int = 0,
) -> ThetaAverageReport:
    """Zone-averaged hit probability against the expected counting mass.

    LHS: integral over the zone of P{spectrum meets [0, E)}.  RHS:
    (2 pi)^d E[N(E) - N(0)] of the periodic approximation.  Both sides
    are estimated on one shared theta grid and sample set, for which
    count >= indicator holds pointwise, so the inequality is exact up to
    nothing; the stderrs quantify how representative the estimate is.
    """
    if energy <= 0:
        raise ValueError("energy must be positive")
    d = model.dimension
    l = half_width
    nodes = _zone_nodes(model, l, theta_resolution)
    zone_volume = (2.0 * _zone_extent(l)) ** d
    cells = 2 * l + 1
    grid = model.grid(cells)

    lhs_samples, rhs_samples = [], []
    for m in range(realizations):
        sample = model.sample_fundamental(grid, base_realization + m)
        indicator_sum = 0
        count_sum = 0
        for theta in nodes:
            evals = model.periodic_box_at(l, theta, sample=sample).eigenvalues(
                upper=energy
            )
            c = int(np.sum(evals >= 0.0))
            count_sum += c
            indicator_sum += 1 if c > 0 else 0
        t_nodes = len(nodes)
        lhs_samples.append(zone_volume * indicator_sum / t_nodes)
        rhs_samples.append((2 * math.pi) ** d * count_sum / (cells**d * t_nodes))

    lhs = float(np.mean(lhs_samples))
    rhs = float(np.mean(rhs_samples))
    lhs_se = float(np.std(lhs_samples, ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0
    rhs_se = float(np.std(rhs_samples, ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0
    return ThetaAverageReport(
        half_width=l,
        energy=energy,
        realizations=realizations,
        theta_resolution=theta_resolution,
        lhs=lhs,
        lhs_stderr=lhs_se,
        rhs=rhs,
        rhs_stderr=rhs_se,
    )


@dataclass(frozen=True)
class FixedThetaReport:
    half_width: int
    energy: float
    theta0: tuple[float, ...]
    xi: float
    c8: float
    c9: float
    enlarged_energy: float
    probability: float
    interval: tuple[float, float]
    prob_stderr: float
    bound: float
    bound_stderr: float

    @property
    def slack(self) -> float:
        return self.bound - self.probability

    @property
    def passed(self) -> bool:
        return self.probability <= self.bound + 2.0 * math.hypot(
            self.prob_stderr, self.bound_stderr
        )


def fixed_theta_check(
    model: AndersonModel,
    half_width: int,
    energy: float,
    theta0: tuple[float, ...],
    realizations: int,
    xi: float,
    theta_resolution: int = 8,
    base_realization: int = 0,
) -> FixedThetaReport:
    """Single-theta hit probability against the Lipschitz-enlarged mass.

    The window widens by C9 / l with C9 = xi * C8, where C8 is the exact
    sup-norm zone-diameter coefficient 2 pi l / (2l + 1).  With a true
    Lipschitz constant the per-sample inequality is sure; a fitted xi
    makes it statistical, hence the 2 sigma slack in ``passed``.
    """
    if not energy < 1.0:
        raise ValueError("the check assumes energy < 1")
    if energy <= 0:
        raise ValueError("energy must be positive")
    if xi < 0:
        raise ValueError("Lipschitz coefficient must be >= 0")
    d = model.dimension
    l = half_width
    theta0 = tuple(np.atleast_1d(np.asarray(theta0, dtype=float)).tolist())
    if len(theta0) != d:
        raise ValueError(f"theta0 must have {d} components")
    extent = _zone_extent(l)
    for t in theta0:
        if abs(t) > extent + 1e-12:
            raise ValueError(f"theta0 component {t} outside the reduced zone")

    c8 = 2.0 * math.pi * l / (2 * l + 1)
    c9 = xi * c8
    enlarged = energy + c9 / l
    nodes = _zone_nodes(model, l, theta_resolution)
    cells = 2 * l + 1
    grid = model.grid(cells)

    hits = 0
    bound_samples = []
    for m in range(realizations):
        sample = model.sample_fundamental(grid, base_realization + m)
        evals0 = model.periodic_box_at(l, tuple(theta0), sample=sample).eigenvalues(
            upper=energy
        )
        if np.any(evals0 >= 0.0):
            hits += 1
        count_sum = 0
        for theta in nodes:
            evals = model.periodic_box_at(l, theta, sample=sample).eigenvalues(
                upper=enlarged
            )
            count_sum += int(np.sum(evals >= 0.0))
        bound_samples.append(count_sum / len(nodes))

    prob = hits / realizations
    prob_se = math.sqrt(prob * (1 - prob) / realizations)
    bound = float(np.mean(bound_samples))
    bound_se = float(np.std(bound_samples, ddof=1) / math.sqrt(realizations)) if realizations > 1 else 0.0
    return FixedThetaReport(
        half_width=l,
        energy=energy,
        theta0=tuple(theta0),
        xi=xi,
        c8=c8,
        c9=c9,
        enlarged_energy=enlarged,
        probability=prob,
        interval=wilson_interval(hits, realizations),
        prob_stderr=prob_se,
        bound=bound,
        bound_stderr=bound_se,
    )


def _next_scale(length: int, zeta: float) -> int:
    """Greatest multiple of 3 not exceeding length^zeta."""
    if zeta == 1.5:
        floor_pow = math.isqrt(length**3)
    else:
        import mpmath

        with mpmath.workprec(160):
            floor_pow = int(mpmath.floor(mpmath.power(length, mpmath.mpf(zeta))))
    return 3 * (floor_pow // 3)


@dataclass(frozen=True)
class MsaSchedule:
    """Length, mass and probability-exponent sequences of the induction."""

    zeta: float
    dimension: int
    scales: tuple[int, ...]
    masses: tuple[float, ...]
    exponents: tuple[float, ...]
    c1: float
    c2: float
    c3: float
    xi: float

    def __post_init__(self) -> None:
        for l in self.scales:
            if l % 3 != 0:
                raise ValueError(f"scale {l} is not a multiple of 3")
        if any(b <= a for a, b in zip(self.scales, self.scales[1:])):
            raise ValueError("scales must be strictly increasing")

    @property
    def steps(self) -> int:
        return len(self.scales) - 1

    @property
    def min_mass(self) -> float:
        return min(self.masses)

    @property
    def mass_positive(self) -> bool:
        return self.min_mass > 0.0


def msa_schedule(
    l0: int,
    m0: float,
    q0: float,
    zeta: float,
    steps: int,
    c1: float = 0.0,
    c2: float = 0.0,
    c3: float = 1.0,
    xi: float = 2.0,
    dimension: int = 1,
) -> MsaSchedule:
    """Iterate the scale/mass/exponent recursions for ``steps`` steps.

    l_{j+1} is the greatest multiple of 3 <= l_j^zeta; the mass update
    takes the lower bound as the recursion,
    m_{j+1} = m_j (1 - 4 l_j / l_{j+1}) - c1/l_j - c2 log(l_{j+1})/l_{j+1},
    and the exponent solves
    l_{j+1}^{q_{j+1}} = c3 (l_{j+1}/l_j)^{2d} l_j^{2 q_j} + l_{j+1}^{-xi}/2.
    """
    if not 1.0 < zeta < 2.0:
        raise ValueError(f"scaling exponent must lie in ]1,2[, got {zeta}")
    if l0 % 3 != 0 or l0 < 6:
        raise ValueError(f"initial scale must be a multiple of 3 and >= 6, got {l0}")
    if m0 <= 0:
        raise ValueError("initial mass must be positive")
    if steps < 1:
        raise ValueError("need at least one step")
    d = dimension
    scales = [int(l0)]
    masses = [float(m0)]
    exponents = [float(q0)]
    for _ in range(steps):
        l, m, q = scales[-1], masses[-1], exponents[-1]
        l_next = _next_scale(l, zeta)
        if l_next <= l:
            raise ValueError(f"scale recursion stalls at {l} (zeta too small)")
        m_next = m * (1.0 - 4.0 * l / l_next) - c1 / l - c2 * math.log(l_next) / l_next
        q_next = math.log(
            c3 * (l_next / l) ** (2 * d) * l ** (2 * q) + 0.5 * l_next ** (-xi)
        ) / math.log(l_next)
        scales.append(l_next)
        masses.append(m_next)
        exponents.append(q_next)
    return MsaSchedule(
        zeta=zeta,
        dimension=d,
        scales=tuple(scales),
        masses=tuple(masses),
        exponents=tuple(exponents),
        c1=c1,
        c2=c2,
        c3=c3,
        xi=xi,
    )


def ring_cutoff(grid: GridSpec, inner: float, outer: float) -> np.ndarray:
    """C^2 profile: 1 inside sup-norm radius ``inner``, 0 beyond ``outer``."""
    if not 0.0 < inner < outer:
        raise ValueError("need 0 < inner < outer")
    s = np.max(np.abs(grid.points()), axis=1)
    step = smoothstep(2)
    u = np.clip((s - inner) / (outer - inner), 0.0, 1.0)
    return 1.0 - step(u)


def core_indicator(grid: GridSpec, radius: float) -> np.ndarray:
    return np.max(np.abs(grid.points()), axis=1) <= radius + 1e-12


def laplacian_commutator(h: AssembledHamiltonian, phi: np.ndarray) -> sp.csr_matrix:
    """[H, diag(phi)] = [-Laplacian, phi]; the potential part commutes away."""
    phi = np.asarray(phi, dtype=float)
    if phi.shape != (h.n,):
        raise ValueError(f"profile must have {h.n} entries")
    m = h.matrix
    return sp.csr_matrix(m.multiply(phi[None, :]) - m.multiply(phi[:, None]))


@dataclass(frozen=True)
class RegularityTestResult:
    side: float
    delta: float
    mass: float
    inner_radius: float
    outer_radius: float
    core_radius: float
    separation: float
    probes: tuple[float, ...]
    norms: tuple[float, ...]
    supremum: float
    threshold: float

    @property
    def passed(self) -> bool:
        return self.supremum <= self.threshold


def m_regularity_test(
    h_box: AssembledHamiltonian,
    energy: float,
    delta: float,
    mass: float,
    eps_probes: Sequence[float] = (1e-1, 1e-2, 1e-3, 1e-4),
) -> RegularityTestResult:
    """Commutator-resolvent-core norm against the e^{-m l} threshold.

    The ring profile ramps from 1 to 0 between sup-norm radii l/2 - 2d
    and l/2 - d (d = ``delta``); the core indicator covers radius l/6.
    The supremum over the epsilon probes is a lower bound for the true
    sup over eps != 0, so a pass is one-sided evidence.
    """
    grid = h_box.grid
    if len(set(grid.cells)) != 1 or len(set(grid.stretch)) != 1:
        raise ValueError("regularity test expects a cube with uniform stretch")
    side = grid.cells[0] * grid.stretch[0]
    if side < 12 * delta:
        raise ValueError(f"box side {side} < 12 delta = {12 * delta}; ring would "
                         "collide with the core")
    inner = side / 2 - 2 * delta
    outer = side / 2 - delta
    core_r = side / 6

    if any(e == 0 for e in eps_probes):
        gap = float(np.min(np.abs(h_box.eigenvalues() - energy)))
        if gap < 1e-9:
            raise ValueError(
                f"energy {energy} is within {gap:.2e} of the spectrum; "
                "a zero probe would be singular"
            )

    phi = ring_cutoff(grid, inner, outer)
    w = laplacian_commutator(h_box, phi)
    live_rows = np.unique(w.nonzero()[0])
    core = np.flatnonzero(core_indicator(grid, core_r))
    rhs = np.zeros((h_box.n, len(core)), dtype=complex)
    rhs[core, np.arange(len(core))] = 1.0

    norms = []
    for eps in eps_probes:
        shift = (energy + 1j * eps) * sp.identity(h_box.n, format="csr")
        lu = splu(sp.csc_matrix(h_box.matrix.astype(complex) - shift))
        block = (w @ lu.solve(rhs))[live_rows, :] if len(live_rows) else np.zeros((1, 1))
        norms.append(float(scipy.linalg.svdvals(block)[0]) if block.size else 0.0)

    return RegularityTestResult(
        side=float(side),
        delta=float(delta),
        mass=float(mass),
        inner_radius=inner,
        outer_radius=outer,
        core_radius=core_r,
        separation=inner - core_r,
        probes=tuple(float(e) for e in eps_probes),
        norms=tuple(norms),
        supremum=max(norms),
        threshold=math.exp(-mass * side),
    )


def alpha_n_feasible(
    q: float, dimension: int, alpha: float, restrict_quarter: bool = False
) -> int:
    """Smallest integer n with n (1 - alpha) > q + 3d + 1."""
    if q <= 0:
        raise ValueError("target exponent must be positive")
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in ]0,1[, got {alpha}")
    if restrict_quarter and not alpha < 0.25:
        raise ValueError(f"alpha must lie in ]0,1/4[, got {alpha}")
    threshold = q + 3 * dimension + 1
    n = math.floor(threshold / (1.0 - alpha)) + 1
    while n > 1 and (n - 1) * (1.0 - alpha) > threshold:
        n -= 1
    while n * (1.0 - alpha) <= threshold:
        n += 1
    return n
