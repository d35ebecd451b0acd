"""Floquet band structure over the reduced Brillouin zone.

Band functions E_n(theta) are the sorted eigenvalues of the box matrix
at wrap phase theta*(box side); they are evaluated on rectangular theta
grids and probed pointwise for edge geometry.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .hamiltonian import AssembledHamiltonian

__all__ = [
    "BrillouinZone",
    "BandStructure",
    "BandEdgeReport",
    "brillouin_zone",
    "compute_bands",
    "find_band_edges",
    "check_regularity",
    "estimate_lipschitz",
    "write_band_csv",
]


@dataclass(frozen=True)
class BrillouinZone:
    """Reduced zone B_l = [-pi/(2l+1), pi/(2l+1)]^d."""

    dimension: int
    half_width_l: int

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError("dimension must be 1 or 2")
        if self.half_width_l < 0:
            raise ValueError("l must be >= 0")

    @property
    def extent(self) -> float:
        return math.pi / (2 * self.half_width_l + 1)

    @property
    def volume(self) -> float:
        return (2.0 * self.extent) ** self.dimension

    def inclusive_axis(self, resolution: int) -> np.ndarray:
        """Endpoint-inclusive grid; odd resolutions contain theta = 0."""
        if resolution < 2:
            raise ValueError("resolution must be >= 2")
        return np.linspace(-self.extent, self.extent, resolution)

    def midpoint_axis(self, resolution: int) -> np.ndarray:
        """Midpoint-rule nodes used by zone integrals."""
        if resolution < 1:
            raise ValueError("resolution must be >= 1")
        step = 2.0 * self.extent / resolution
        return -self.extent + (np.arange(resolution) + 0.5) * step


def brillouin_zone(half_width_l: int, dimension: int) -> BrillouinZone:
    return BrillouinZone(dimension, half_width_l)


@dataclass
class BandStructure:
    """Sorted band energies tabulated on a rectangular theta grid.

    ``energies`` has shape grid_shape + (num_bands,).  When available,
    ``evaluator`` maps an arbitrary theta vector to the sorted eigenvalue
    list, which lets edge probes refine off-grid.
    """

    axes: list[np.ndarray]
    energies: np.ndarray
    zone: BrillouinZone
    evaluator: Callable[[Sequence[float]], np.ndarray] | None = field(default=None, repr=False)

    @property
    def dimension(self) -> int:
        return len(self.axes)

    @property
    def num_bands(self) -> int:
        return self.energies.shape[-1]

    def band_range(self, n: int) -> tuple[float, float]:
        vals = self.energies[..., n]
        return float(np.min(vals)), float(np.max(vals))

    def theta_at(self, index: tuple[int, ...]) -> np.ndarray:
        return np.array([self.axes[j][index[j]] for j in range(self.dimension)])

    def value(self, theta: Sequence[float], n: int) -> float:
        if self.evaluator is None:
            raise ValueError("band structure carries no evaluator for off-grid probes")
        return float(self.evaluator(theta)[n])

    @staticmethod
    def from_function(
        func: Callable[[np.ndarray], float | np.ndarray],
        zone: BrillouinZone,
        resolution: int,
        with_evaluator: bool = True,
    ) -> "BandStructure":
        """Synthetic single-band structure sampled from a scalar function."""
        axes = [zone.inclusive_axis(resolution) for _ in range(zone.dimension)]
        shape = tuple(len(a) for a in axes)
        vals = np.empty(shape + (1,))
        for index in itertools.product(*(range(s) for s in shape)):
            theta = np.array([axes[j][index[j]] for j in range(zone.dimension)])
            vals[index + (0,)] = float(func(theta))
        ev = (lambda t: np.atleast_1d(float(func(np.asarray(t))))) if with_evaluator else None
        return BandStructure(axes, vals, zone, ev)


def compute_bands(
    factory: Callable[[Sequence[float]], AssembledHamiltonian],
    zone: BrillouinZone,
    resolution: int,
    num_bands: int,
) -> BandStructure:
    """Tabulate the lowest ``num_bands`` eigenvalues over an inclusive grid.

    ``factory`` maps a quasimomentum vector to the assembled box matrix;
    eigenvalues come back sorted ascending, so bands are the usual sorted
    branches (continuous but possibly kinked at crossings).
    """
    axes = [zone.inclusive_axis(resolution) for _ in range(zone.dimension)]
    shape = tuple(len(a) for a in axes)

    def solve(theta: Sequence[float]) -> np.ndarray:
        w = factory(theta).eigenvalues()
        if len(w) < num_bands:
            raise ValueError(
                f"requested {num_bands} bands but the box matrix has only {len(w)} eigenvalues"
            )
        return w

    energies = np.empty(shape + (num_bands,))
    for index in itertools.product(*(range(s) for s in shape)):
        theta = [axes[j][index[j]] for j in range(zone.dimension)]
        energies[index] = solve(theta)[:num_bands]
    return BandStructure(axes, energies, zone, evaluator=solve)


def find_band_edges(bands: BandStructure, gap_tol: float = 1e-9) -> list[dict]:
    """Merge per-band ranges into spectral intervals and list their edges.

    Returns dicts {energy, side, interval_index} with side "lower"/"upper";
    adjacent band ranges closer than ``gap_tol`` are merged.
    """
    ranges = sorted(bands.band_range(n) for n in range(bands.num_bands))
    merged: list[list[float]] = []
    for lo, hi in ranges:
        if merged and lo <= merged[-1][1] + gap_tol:
            merged[-1][1] = max(merged[-1][1], hi)
        else:
            merged.append([lo, hi])
    edges = []
    for i, (lo, hi) in enumerate(merged):
        edges.append({"energy": lo, "side": "lower", "interval_index": i})
        edges.append({"energy": hi, "side": "upper", "interval_index": i})
    return edges


@dataclass(frozen=True)
class BandEdgeReport:
    """Hessian geometry of the bands attaining one spectral edge."""

    edge: float
    band_indices: tuple[int, ...]
    minimizers: tuple[tuple[float, ...], ...]
    hessians: tuple[np.ndarray, ...]
    smallest_eigenvalues: tuple[float, ...]
    regular: bool
    boundary_minimizer: bool
    fd_step: float


def _hessian_from_probe(
    probe: Callable[[np.ndarray], float], theta0: np.ndarray, step: float
) -> np.ndarray:
    """Central-difference Hessian with one Richardson halving step."""

    def stencil(h: float) -> np.ndarray:
        d = len(theta0)
        hess = np.empty((d, d))
        f0 = probe(theta0)
        for i in range(d):
            ei = np.zeros(d)
            ei[i] = h
            hess[i, i] = (probe(theta0 + ei) - 2.0 * f0 + probe(theta0 - ei)) / h**2
        for i in range(d):
            for j in range(i + 1, d):
                ei = np.zeros(d)
                ej = np.zeros(d)
                ei[i] = h
                ej[j] = h
                val = (
                    probe(theta0 + ei + ej)
                    - probe(theta0 + ei - ej)
                    - probe(theta0 - ei + ej)
                    + probe(theta0 - ei - ej)
                ) / (4.0 * h**2)
                hess[i, j] = hess[j, i] = val
        return hess

    coarse = stencil(step)
    fine = stencil(step / 2.0)
    return (4.0 * fine - coarse) / 3.0


def check_regularity(
    bands: BandStructure,
    edge: float,
    fd_step: float = 1e-3,
    edge_tol: float = 1e-8,
    pd_tol: float = 1e-6,
) -> BandEdgeReport:
    """Decide whether a lower band edge is a regular Floquet minimum.

    For every band attaining ``edge`` and every grid minimizer, the theta
    Hessian is estimated by Richardson-extrapolated central differences
    (step ``fd_step`` when an evaluator is present, otherwise the grid
    spacing).  Regular means every Hessian is positive definite beyond
    ``pd_tol``.  Degenerate minima (e.g. quartic bottoms) extrapolate to
    a zero Hessian and are flagged non-regular.
    """
    shape = bands.energies.shape[:-1]
    attaining = [
        n for n in range(bands.num_bands) if bands.band_range(n)[0] <= edge + edge_tol
    ]
    if not attaining:
        raise ValueError(f"no band attains the edge {edge}")

    minimizers: list[tuple[float, ...]] = []
    hessians: list[np.ndarray] = []
    smallest: list[float] = []
    boundary = False

    full_zone = abs(bands.axes[0][0] + math.pi) < 1e-12 and abs(
        bands.axes[0][-1] - math.pi
    ) < 1e-12

    for n in attaining:
        vals = bands.energies[..., n]
        vmin = float(np.min(vals))
        mask = vals <= vmin + 1e-9 + edge_tol
        candidates = np.argwhere(mask)
        # Collapse duplicated endpoint minimizers (+-pi identify on full zones).
        seen: set[tuple[float, ...]] = set()
        for index in candidates:
            index = tuple(int(i) for i in index)
            theta0 = bands.theta_at(index)
            key = tuple(
                round(math.remainder(t, 2.0 * math.pi), 10) if full_zone else round(t, 10)
                for t in theta0
            )
            if key in seen:
                continue
            seen.add(key)
            on_boundary = any(
                i == 0 or i == shape[j] - 1 for j, i in enumerate(index)
            )
            if bands.evaluator is not None:
                probe = lambda t, band=n: float(bands.evaluator(t)[band])
                hess = _hessian_from_probe(probe, theta0, fd_step)
            else:
                if on_boundary and not full_zone:
                    boundary = True
                hess = _grid_hessian(bands, n, index, full_zone)
            minimizers.append(tuple(float(t) for t in theta0))
            hessians.append(hess)
            smallest.append(float(np.min(np.linalg.eigvalsh(hess))))
            if on_boundary and bands.evaluator is None and not full_zone:
                boundary = True

    regular = bool(smallest) and all(s > pd_tol for s in smallest)
    return BandEdgeReport(
        edge=float(edge),
        band_indices=tuple(attaining),
        minimizers=tuple(minimizers),
        hessians=tuple(hessians),
        smallest_eigenvalues=tuple(smallest),
        regular=regular,
        boundary_minimizer=boundary,
        fd_step=fd_step,
    )


def _grid_hessian(
    bands: BandStructure, n: int, index: tuple[int, ...], wrap: bool
) -> np.ndarray:
    """Richardson Hessian from tabulated values with step = grid spacing."""
    shape = bands.energies.shape[:-1]
    d = bands.dimension

    def value(offset: tuple[int, ...]) -> float:
        idx = []
        for j, (i, o) in enumerate(zip(index, offset)):
            k = i + o
            if wrap:
                k %= shape[j] - 1  # endpoint duplicates the start on full zones
            if not 0 <= k < shape[j]:
                raise ValueError(
                    "grid minimizer sits on the zone boundary; supply an evaluator "
                    "or a full-zone grid for wrap-around differencing"
                )
            idx.append(k)
        return float(bands.energies[tuple(idx) + (n,)])

    steps = [bands.axes[j][1] - bands.axes[j][0] for j in range(d)]

    def stencil(mult: int) -> np.ndarray:
        hess = np.empty((d, d))
        f0 = value((0,) * d)
        for i in range(d):
            e = [0] * d
            e[i] = mult
            hess[i, i] = (value(tuple(e)) - 2 * f0 + value(tuple(-x for x in e))) / (
                mult * steps[i]
            ) ** 2
        for i in range(d):
            for j in range(i + 1, d):
                acc = 0.0
                for si in (1, -1):
                    for sj in (1, -1):
                        e = [0] * d
                        e[i] = si * mult
                        e[j] = sj * mult
                        acc += si * sj * value(tuple(e))
                hess[i, j] = hess[j, i] = acc / (4.0 * mult * mult * steps[i] * steps[j])
        return hess

    fine = stencil(1)
    coarse = stencil(2)
    return (4.0 * fine - coarse) / 3.0


def estimate_lipschitz(bands: BandStructure, window: tuple[float, float]) -> float:
    """Max |Delta E_n| / |Delta theta| over grid edges inside an energy window.

    Both endpoints of a grid edge must lie in the window for it to count.
    Returns 0 when no band values fall inside the window.
    """
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"empty energy window [{lo}, {hi}]")
    best = 0.0
    for axis in range(bands.dimension):
        e = bands.energies
        a = np.moveaxis(e, axis, 0)
        fwd = a[1:]
        bwd = a[:-1]
        steps = np.diff(bands.axes[axis])
        ok = (fwd >= lo) & (fwd <= hi) & (bwd >= lo) & (bwd <= hi)
        if not np.any(ok):
            continue
        slope = np.abs(fwd - bwd) / steps.reshape((-1,) + (1,) * (fwd.ndim - 1))
        best = max(best, float(np.max(slope[ok])))
    return best


def write_band_csv(bands: BandStructure, path: str, metadata: dict | None = None) -> None:
    """Columns theta_1..theta_d, n, E; one row per grid point and band."""
    d = bands.dimension
    with open(path, "w", encoding="ascii") as fh:
        for key, val in (metadata or {}).items():
            fh.write(f"# {key}={val}\n")
        header = ",".join([f"theta_{j + 1}" for j in range(d)] + ["n", "E"])
        fh.write(header + "\n")
        shape = bands.energies.shape[:-1]
        for index in itertools.product(*(range(s) for s in shape)):
            theta = [bands.axes[j][index[j]] for j in range(d)]
            for n in range(bands.num_bands):
                cols = [repr(float(t)) for t in theta]
                cols.append(str(n))
                cols.append(repr(float(bands.energies[index + (n,)])))
                fh.write(",".join(cols) + "\n")
