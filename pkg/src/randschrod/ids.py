"""Integrated density of states: box counting, zone integration, tail fits.

Curves are step functions carried by their exact jump representation
(eigenvalue positions and per-eigenvalue weights), so Stieltjes
functionals against them are sums, not quadratures.  The counting
convention is strictly-below everywhere: an eigenvalue equal to a grid
energy is not counted at that energy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .disorder import DisorderSample
from .hamiltonian import AssembledHamiltonian, BoundaryCondition
from .model import AndersonModel

__all__ = [
    "IdsCurve",
    "DisorderAverage",
    "LifshitzFit",
    "BandEdgeMass",
    "DecayRow",
    "DecayTable",
    "ids_dirichlet_box",
    "ids_periodic_approx",
    "average_ids",
    "smoothed_functional",
    "ids_difference_experiment",
    "lifshitz_fit",
    "mass_window",
    "band_edge_mass",
    "write_decay_csv",
    "write_ids_csv",
]


@dataclass(frozen=True)
class IdsCurve:
    """Finite-volume IDS sampled on an energy grid.

    values[i] = (normalized count of eigenvalues strictly below
    energies[i]).  jump_positions/jump_weights hold the underlying step
    data; ``complete`` is False when only eigenvalues below a cutoff were
    computed (counts remain exact below that cutoff).
    """

    energies: np.ndarray
    values: np.ndarray
    volume: float
    points_per_cell: int
    jump_positions: np.ndarray | None = None
    jump_weights: np.ndarray | None = None
    complete: bool = True

    def __post_init__(self) -> None:
        e = np.asarray(self.energies, dtype=float)
        if e.ndim != 1 or len(e) < 1:
            raise ValueError("energies must be a nonempty 1-d array")
        if np.any(np.diff(e) < 0):
            raise ValueError("energies must be sorted ascending")
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    @staticmethod
    def from_jumps(
        positions: np.ndarray,
        weights: np.ndarray | float,
        energies: np.ndarray,
        volume: float,
        points_per_cell: int,
        complete: bool = True,
    ) -> "IdsCurve":
        positions = np.asarray(positions, dtype=float)
        if np.isscalar(weights):
            weights = np.full(len(positions), float(weights))
        order = np.argsort(positions, kind="stable")
        positions = positions[order]
        weights = np.asarray(weights, dtype=float)[order]
        cumulative = np.concatenate([[0.0], np.cumsum(weights)])
        idx = np.searchsorted(positions, np.asarray(energies, dtype=float), side="left")
        values = cumulative[idx]
        return IdsCurve(
            energies=np.asarray(energies, dtype=float),
            values=values,
            volume=volume,
            points_per_cell=points_per_cell,
            jump_positions=positions,
            jump_weights=weights,
            complete=complete,
        )

    def value_at(self, energy: float) -> float:
        if self.jump_positions is not None:
            i = np.searchsorted(self.jump_positions, energy, side="left")
            return float(np.sum(self.jump_weights[:i]))
        return float(np.interp(energy, self.energies, self.values))

    @property
    def total_mass(self) -> float:
        if not self.complete:
            raise ValueError("curve was truncated above; total mass unavailable")
        if self.jump_weights is None:
            return float(self.values[-1])
        return float(np.sum(self.jump_weights))


@dataclass(frozen=True)
class DisorderAverage:
    """Pointwise mean and standard error of IDS curves over realizations."""

    energies: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray
    realizations: int

    def mean_at(self, energy: float) -> float:
        return float(np.interp(energy, self.energies, self.mean))


def ids_dirichlet_box(
    h: AssembledHamiltonian, energies: Sequence[float], upper: float | None = None
) -> IdsCurve:
    """Per-volume eigenvalue counting N(E) = |Lambda|^{-1} #{eig < E}.

    Set ``upper`` to count only below a cutoff (cheaper banded solves);
    the curve is then marked incomplete and every requested energy must
    stay at or below the cutoff.
    """
    if h.bc.kind != "dirichlet":
        raise ValueError(f"Dirichlet box counting got {h.bc.kind} boundary conditions")
    energies = np.asarray(energies, dtype=float)
    if upper is not None and np.max(energies) > upper:
        raise ValueError("energy grid exceeds the eigenvalue cutoff")
    evals = h.eigenvalues(upper=upper)
    return IdsCurve.from_jumps(
        evals,
        1.0 / h.grid.volume,
        energies,
        volume=h.grid.volume,
        points_per_cell=h.grid.points_per_cell,
        complete=upper is None,
    )


def ids_periodic_approx(
    model: AndersonModel,
    sample: DisorderSample,
    half_width: int,
    energies: Sequence[float],
    theta_resolution: int = 8,
) -> IdsCurve:
    """Brillouin-integrated IDS of the periodic approximation.

    The zone integral uses the midpoint rule with theta_resolution^d
    nodes; every eigenvalue at every node carries the weight
    ((2l+1) * theta_resolution)^{-d}.  With one node at theta = 0 this
    reduces to per-volume counting of the Periodic box matrix.
    """
    if theta_resolution < 1:
        raise ValueError(f"theta_resolution must be >= 1, got {theta_resolution}")
    d = model.dimension
    length = 2 * half_width + 1
    if theta_resolution == 1:
        grids = [np.array([0.0])] * d
    else:
        from .bands import brillouin_zone

        zone = brillouin_zone(half_width, d)
        grids = [zone.midpoint_axis(theta_resolution)] * d

    weight = 1.0 / (length * theta_resolution) ** d
    all_evals = []
    if d == 1:
        nodes = [(t,) for t in grids[0]]
    else:
        nodes = [(t1, t2) for t1 in grids[0] for t2 in grids[1]]
    for theta in nodes:
        h = model.periodic_box_at(half_width, theta, sample=sample)
        all_evals.append(h.eigenvalues())
    positions = np.concatenate(all_evals)
    return IdsCurve.from_jumps(
        positions,
        weight,
        np.asarray(energies, dtype=float),
        volume=float(length**d),
        points_per_cell=model.points_per_cell,
    )


def average_ids(curves: Sequence[IdsCurve]) -> DisorderAverage:
    """Pointwise mean and standard error over a family of curves."""
    if not curves:
        raise ValueError("need at least one curve")
    grid = curves[0].energies
    for c in curves[1:]:
        if len(c.energies) != len(grid) or not np.allclose(c.energies, grid, atol=0.0):
            raise ValueError("curves were sampled on different energy grids")
    stack = np.stack([c.values for c in curves])
    mean = stack.mean(axis=0)
    if len(curves) > 1:
        stderr = stack.std(axis=0, ddof=1) / math.sqrt(len(curves))
    else:
        stderr = np.zeros_like(mean)
    return DisorderAverage(grid.copy(), mean, stderr, len(curves))


def smoothed_functional(g, curve: IdsCurve) -> float:
    """Stieltjes integral of g against the IDS curve, exact for step data.

    ``g`` is any callable (typically a compactly supported smooth
    function); when it exposes a ``support`` attribute the span check is
    enforced against the curve's energy grid.
    """
    support = getattr(g, "support", None)
    if support is not None:
        lo, hi = support
        if lo < curve.energies[0] - 1e-12 or hi > curve.energies[-1] + 1e-12:
            raise ValueError(
                f"support [{lo}, {hi}] escapes the curve's energy span "
                f"[{curve.energies[0]}, {curve.energies[-1]}]"
            )
        if not curve.complete and hi > np.max(curve.energies):
            raise ValueError("curve truncated below the support of g")
    if curve.jump_positions is not None:
        if len(curve.jump_positions) == 0:
            return 0.0
        vals = np.asarray(g(curve.jump_positions), dtype=float)
        return float(np.dot(vals, curve.jump_weights))
    mids = 0.5 * (curve.energies[1:] + curve.energies[:-1])
    increments = np.diff(curve.values)
    return float(np.dot(np.asarray(g(mids), dtype=float), increments))


@dataclass(frozen=True)
class DecayRow:
    half_width: int
    delta: float
    stderr: float
    mean_functional: float
    noise_floor: float


@dataclass(frozen=True)
class DecayTable:
    rows: tuple[DecayRow, ...]
    reference_value: float
    reference_stderr: float
    reference_half_width: int
    realizations: int

    def deltas(self) -> list[float]:
        return [r.delta for r in self.rows]


def _functional_periodic(model, g, half_width, theta_resolution, realization) -> float:
    grid_cells = 2 * half_width + 1
    grid = model.grid(grid_cells)
    sample = model.sample_fundamental(grid, realization)
    return _functional_periodic_sample(model, g, half_width, theta_resolution, sample)


def _functional_periodic_sample(model, g, half_width, theta_resolution, sample) -> float:
    from .bands import brillouin_zone

    d = model.dimension
    zone = brillouin_zone(half_width, d)
    axis = zone.midpoint_axis(theta_resolution)
    weight = 1.0 / ((2 * half_width + 1) * theta_resolution) ** d
    nodes = [(t,) for t in axis] if d == 1 else [(a, b) for a in axis for b in axis]
    total = 0.0
    for theta in nodes:
        evals = model.periodic_box_at(half_width, theta, sample=sample).eigenvalues()
        total += float(np.sum(np.asarray(g(evals), dtype=float)))
    return weight * total


def _functional_dirichlet(model, g, cells, realization) -> float:
    h = model.anderson_box(cells, BoundaryCondition.dirichlet(), realization)
    evals = h.eigenvalues()
    return float(np.sum(np.asarray(g(evals), dtype=float))) / h.grid.volume


def _zero_disorder(model: AndersonModel) -> AndersonModel:
    from dataclasses import replace

    return replace(model, disorder=replace(model.disorder, omega_max=0.0))


def ids_difference_experiment(
    model: AndersonModel,
    g,
    half_widths: Sequence[int],
    realizations: int,
    reference_half_width: int | None = None,
    theta_resolution: int = 8,
    map_fn: Callable | None = None,
) -> DecayTable:
    """Convergence of the periodic-approximation IDS functional in l.

    Delta(l) = | mean_m integral g dN_{omega,l} - reference | where the
    reference is the disorder-averaged Dirichlet large-box functional
    (default box half-width: 4x the largest tested l).  Realization m
    reuses one underlying coupling field across every l and the
    reference, so the comparison is between restrictions of a single
    infinite-volume disorder configuration.  The zero-disorder
    discrepancy is reported per l as the noise floor of the pipeline.
    """
    if realizations < 2:
        raise ValueError("need at least 2 realizations for a standard error")
    if reference_half_width is None:
        reference_half_width = 4 * max(half_widths)
    mapper = map_fn if map_fn is not None else (lambda f, xs: [f(x) for x in xs])
    ref_cells = 2 * reference_half_width + 1

    ref_vals = mapper(
        _DirichletFunctional(model, g, ref_cells), list(range(realizations))
    )
    ref_mean = float(np.mean(ref_vals))
    ref_se = float(np.std(ref_vals, ddof=1) / math.sqrt(len(ref_vals))) if len(ref_vals) > 1 else 0.0

    quiet = _zero_disorder(model)
    ref_floor = _functional_dirichlet(quiet, g, ref_cells, 0)

    rows = []
    for l in half_widths:
        vals = mapper(
            _PeriodicFunctional(model, g, l, theta_resolution), list(range(realizations))
        )
        mean = float(np.mean(vals))
        se = float(np.std(vals, ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else 0.0
        floor = abs(_functional_periodic(quiet, g, l, theta_resolution, 0) - ref_floor)
        rows.append(
            DecayRow(
                half_width=l,
                delta=abs(mean - ref_mean),
                stderr=math.hypot(se, ref_se),
                mean_functional=mean,
                noise_floor=floor,
            )
        )
    return DecayTable(
        rows=tuple(rows),
        reference_value=ref_mean,
        reference_stderr=ref_se,
        reference_half_width=reference_half_width,
        realizations=realizations,
    )


class _DirichletFunctional:
    """Picklable realization -> Dirichlet-box functional map."""

    def __init__(self, model, g, cells):
        self.model, self.g, self.cells = model, g, cells

    def __call__(self, realization: int) -> float:
        return _functional_dirichlet(self.model, self.g, self.cells, realization)


class _PeriodicFunctional:
    def __init__(self, model, g, half_width, theta_resolution):
        self.model, self.g = model, g
        self.half_width, self.theta_resolution = half_width, theta_resolution

    def __call__(self, realization: int) -> float:
        return _functional_periodic(
            self.model, self.g, self.half_width, self.theta_resolution, realization
        )


@dataclass(frozen=True)
class LifshitzFit:
    """Least-squares fit of log|log(N(E) - N(edge))| against log|E - edge|."""

    exponent: float
    confidence_halfwidth: float
    residual_rms: float
    window: tuple[float, float]
    n_points: int
    edge: float
    target: float | None = None
    target_tolerance: float | None = None

    @property
    def matches_target(self) -> bool | None:
        if self.target is None:
            return None
        return abs(self.exponent - self.target) <= (self.target_tolerance or 0.0)


def mass_window(
    avg: DisorderAverage,
    edge: float,
    mass_low: float = 1e-4,
    mass_high: float = 1e-1,
) -> tuple[float, float]:
    """Energy window where the IDS mass above the edge lies in [lo, hi]."""
    base = avg.mean_at(edge)
    mass = avg.mean - base
    ok = (mass >= mass_low) & (mass <= mass_high) & (avg.energies > edge)
    if not np.any(ok):
        raise ValueError("no energies carry IDS mass inside the requested band")
    es = avg.energies[ok]
    return float(es[0]), float(es[-1])


def lifshitz_fit(
    avg: DisorderAverage,
    edge: float,
    window: tuple[float, float],
    min_points: int = 4,
    target: float | None = None,
    target_tolerance: float | None = None,
) -> LifshitzFit:
    """Fit the double-log tail exponent of the averaged IDS near an edge.

    Lifshitz behaviour N(E) - N(edge) ~ exp(-c (E-edge)^{-d/2}) makes
    log|log(.)| affine in log(E-edge) with slope -d/2; the slope is the
    fitted exponent.  Points with mass <= 0 or >= 1/2 are refused.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError("empty fit window")
    base = avg.mean_at(edge)
    sel = (avg.energies >= lo) & (avg.energies <= hi) & (avg.energies > edge)
    energies = avg.energies[sel]
    mass = avg.mean[sel] - base
    if np.any(mass <= 0.0):
        raise ValueError("IDS mass must be strictly positive inside the fit window")
    if np.any(mass >= 0.5):
        raise ValueError("fit window reaches IDS mass >= 1/2; shrink it toward the edge")
    if len(energies) < min_points:
        raise ValueError(f"only {len(energies)} usable points; need >= {min_points}")

    x = np.log(energies - edge)
    y = np.log(np.abs(np.log(mass)))
    design = np.stack([x, np.ones_like(x)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    slope, intercept = float(coef[0]), float(coef[1])
    resid = y - (slope * x + intercept)
    dof = max(len(x) - 2, 1)
    s2 = float(np.sum(resid**2)) / dof
    sxx = float(np.sum((x - x.mean()) ** 2))
    half = 1.96 * math.sqrt(s2 / sxx) if sxx > 0 else math.inf
    return LifshitzFit(
        exponent=slope,
        confidence_halfwidth=half,
        residual_rms=float(np.sqrt(np.mean(resid**2))),
        window=(lo, hi),
        n_points=len(x),
        edge=edge,
        target=target,
        target_tolerance=target_tolerance,
    )


@dataclass(frozen=True)
class BandEdgeMass:
    """Expected zone-integrated mass in [0, 2 l^{-alpha}) with its bound."""

    half_width: int
    alpha: float
    energy: float
    mean: float
    stderr: float
    realizations: int
    bound: float | None = None


def band_edge_mass(
    model: AndersonModel,
    half_width: int,
    alpha: float,
    realizations: int,
    theta_resolution: int = 8,
    smoothness_order: int | None = None,
    bound_constant: float | None = None,
    map_fn: Callable | None = None,
) -> BandEdgeMass:
    """Estimate E[N_{omega,l}(2 l^{-alpha}) - N_{omega,l}(0)].

    When (smoothness_order, bound_constant) are supplied the comparison
    value bound_constant * l^{-order*(1-alpha) + 2d + 1} is reported
    alongside.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"alpha must lie in ]0,1[, got {alpha}")
    if half_width < 2:
        raise ValueError("half_width must be >= 2")
    energy = 2.0 * half_width ** (-alpha)
    mapper = map_fn if map_fn is not None else (lambda f, xs: [f(x) for x in xs])
    masses = mapper(
        _EdgeMassSample(model, half_width, energy, theta_resolution),
        list(range(realizations)),
    )
    mean = float(np.mean(masses))
    se = float(np.std(masses, ddof=1) / math.sqrt(len(masses))) if len(masses) > 1 else 0.0
    bound = None
    if smoothness_order is not None and bound_constant is not None:
        d = model.dimension
        bound = bound_constant * half_width ** (
            -smoothness_order * (1.0 - alpha) + 2 * d + 1
        )
    return BandEdgeMass(
        half_width=half_width,
        alpha=alpha,
        energy=energy,
        mean=mean,
        stderr=se,
        realizations=realizations,
        bound=bound,
    )


class _EdgeMassSample:
    def __init__(self, model, half_width, energy, theta_resolution):
        self.model, self.half_width = model, half_width
        self.energy, self.theta_resolution = energy, theta_resolution

    def __call__(self, realization: int) -> float:
        from .bands import brillouin_zone

        model, l = self.model, self.half_width
        d = model.dimension
        grid = model.grid(2 * l + 1)
        sample = model.sample_fundamental(grid, realization)
        zone = brillouin_zone(l, d)
        axis = zone.midpoint_axis(self.theta_resolution)
        nodes = [(t,) for t in axis] if d == 1 else [(a, b) for a in axis for b in axis]
        weight = 1.0 / ((2 * l + 1) * self.theta_resolution) ** d
        count = 0
        for theta in nodes:
            w = model.periodic_box_at(l, theta, sample=sample).eigenvalues()
            count += int(np.sum((w >= 0.0) & (w < self.energy)))
        return weight * count


def write_decay_csv(table: DecayTable, path: str, metadata: dict | None = None) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        fh.write(f"# reference_half_width={table.reference_half_width}\n")
        fh.write(f"# reference_value={table.reference_value!r}\n")
        fh.write(f"# realizations={table.realizations}\n")
        fh.write("l,delta,stderr,mean_functional,noise_floor\n")
        for r in table.rows:
            fh.write(
                f"{r.half_width},{r.delta!r},{r.stderr!r},"
                f"{r.mean_functional!r},{r.noise_floor!r}\n"
            )


def write_ids_csv(
    energies: np.ndarray,
    mean: np.ndarray,
    stderr: np.ndarray | None,
    path: str,
    metadata: dict | None = None,
) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        if stderr is None:
            fh.write("E,N\n")
            for e, m in zip(energies, mean):
                fh.write(f"{float(e)!r},{float(m)!r}\n")
        else:
            fh.write("E,N,stderr\n")
            for e, m, s in zip(energies, mean, stderr):
                fh.write(f"{float(e)!r},{float(m)!r},{float(s)!r}\n")
