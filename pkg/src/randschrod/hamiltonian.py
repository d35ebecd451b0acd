"""Finite-difference Hamiltonians on boxes of the integer lattice.

The continuum operator -Laplace + V0 + V_omega is discretized with the
standard (2d+1)-point stencil on a mesh of p points per unit cell and
axis (mesh step h = 1/p, units hbar^2/2m = 1).  Boxes cover an integer
number of unit cells; grid points sit at cell-centered positions so that
for p = 1 the grid coincides with the lattice Z^d.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import scipy.linalg
import scipy.sparse

from .disorder import DisorderSample

__all__ = [
    "SOLVER_BUDGET_POINTS",
    "GridSpec",
    "BoundaryCondition",
    "PeriodicPotential",
    "SingleSitePotential",
    "SingleSiteReport",
    "AssembledHamiltonian",
    "assemble_h0",
    "assemble_anderson",
    "assemble_periodic_approx",
    "validate_single_site",
    "fold_site",
    "box_sites",
    "fundamental_sites",
    "export_coordinate_file",
]

# Largest point count the dense/banded solvers are expected to handle at
# desk scale.  Assemblies beyond this are refused rather than left to
# thrash.
SOLVER_BUDGET_POINTS = 20_000


@dataclass(frozen=True)
class GridSpec:
    """Geometry of a finite simulation box.

    Parameters
    ----------
    dimension : int
        Spatial dimension, 1 or 2.
    points_per_cell : int
        Mesh points per unit cell and axis (p >= 1, mesh step 1/p).
    cells : tuple of int
        Unit cells covered per axis.  Periodic-approximation boxes need
        an odd count 2l+1 per axis; plain Dirichlet boxes may use any.
    stretch : tuple of float
        Lattice constant per axis (anisotropic mesh).  Default 1.
    """

    dimension: int
    points_per_cell: int
    cells: tuple[int, ...]
    stretch: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.points_per_cell < 1:
            raise ValueError("points_per_cell must be >= 1")
        if len(self.cells) != self.dimension or any(c < 1 for c in self.cells):
            raise ValueError(f"cells must give >= 1 cells per axis, got {self.cells}")
        if not self.stretch:
            object.__setattr__(self, "stretch", (1.0,) * self.dimension)
        if len(self.stretch) != self.dimension or any(a <= 0 for a in self.stretch):
            raise ValueError("stretch needs one positive factor per axis")
        if self.n_points > SOLVER_BUDGET_POINTS:
            raise ValueError(
                f"{self.n_points} grid points exceed the solver budget "
                f"({SOLVER_BUDGET_POINTS})"
            )

    @staticmethod
    def cube(dimension: int, points_per_cell: int, half_width: int) -> "GridSpec":
        """Box Lambda_{2l+1} covering (2l+1)^d unit cells."""
        if half_width < 0:
            raise ValueError("half_width must be >= 0")
        return GridSpec(dimension, points_per_cell, (2 * half_width + 1,) * dimension)

    @staticmethod
    def from_cells(dimension: int, points_per_cell: int, cells: int | Sequence[int]) -> "GridSpec":
        if isinstance(cells, int):
            cells = (cells,) * dimension
        return GridSpec(dimension, points_per_cell, tuple(int(c) for c in cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c * self.points_per_cell for c in self.cells)

    @property
    def n_points(self) -> int:
        return int(np.prod([c * self.points_per_cell for c in self.cells]))

    @property
    def mesh(self) -> tuple[float, ...]:
        return tuple(a / self.points_per_cell for a in self.stretch)

    @property
    def volume(self) -> float:
        return float(np.prod([c * a for c, a in zip(self.cells, self.stretch)]))

    @property
    def half_width(self) -> int:
        """l for a cube box of 2l+1 cells; error when not of that shape."""
        c = self.cells[0]
        if any(ci != c for ci in self.cells) or c % 2 == 0:
            raise ValueError(f"box of {self.cells} cells is not a (2l+1)^d cube")
        return (c - 1) // 2

    def axis_coords(self, axis: int) -> np.ndarray:
        """Cell-centered point coordinates along one axis, symmetric about 0."""
        n = self.shape[axis]
        h = self.mesh[axis]
        length = self.cells[axis] * self.stretch[axis]
        return -0.5 * length + (np.arange(n) + 0.5) * h

    def points(self) -> np.ndarray:
        """All grid points as an (n_points, d) array in row-major order."""
        axes = [self.axis_coords(j) for j in range(self.dimension)]
        grids = np.meshgrid(*axes, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=-1)


@dataclass(frozen=True)
class BoundaryCondition:
    """Dirichlet, Periodic, or Theta(theta) on the box boundary.

    Under Theta the wrap-around hops carry phases e^{+-i theta_j}; all
    components must lie in [-pi, pi].  Theta(0, ..., 0) assembles to the
    same matrix as Periodic.
    """

    kind: str
    theta: tuple[float, ...] = ()

    _KINDS = ("dirichlet", "periodic", "theta")

    def __post_init__(self) -> None:
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown boundary condition {self.kind!r}")
        if self.kind == "theta":
            if not self.theta:
                raise ValueError("theta boundary condition needs phase components")
            if any(not (-math.pi <= t <= math.pi) for t in self.theta):
                raise ValueError(f"theta components must lie in [-pi, pi], got {self.theta}")
        elif self.theta:
            raise ValueError(f"{self.kind} boundary condition takes no phases")

    @staticmethod
    def dirichlet() -> "BoundaryCondition":
        return BoundaryCondition("dirichlet")

    @staticmethod
    def periodic() -> "BoundaryCondition":
        return BoundaryCondition("periodic")

    @staticmethod
    def with_phases(theta: Sequence[float]) -> "BoundaryCondition":
        return BoundaryCondition("theta", tuple(float(t) for t in theta))

    @property
    def wraps(self) -> bool:
        return self.kind != "dirichlet"


def _cell_offsets(points_per_cell: int) -> np.ndarray:
    """In-cell sampling offsets relative to the cell center."""
    p = points_per_cell
    return -0.5 + (np.arange(p) + 0.5) / p


@dataclass(frozen=True)
class PeriodicPotential:
    """Z^d-periodic background potential V0, sampled once per unit cell.

    cell_values holds V0 at the p^d cell-centered mesh offsets and is
    tiled over the box during assembly.
    """

    dimension: int
    points_per_cell: int
    cell_values: np.ndarray

    def __post_init__(self) -> None:
        want = (self.points_per_cell,) * self.dimension
        got = np.asarray(self.cell_values, dtype=float)
        if got.shape != want:
            raise ValueError(f"cell_values shape {got.shape} != {want}")
        object.__setattr__(self, "cell_values", got)

    @staticmethod
    def zero(dimension: int, points_per_cell: int) -> "PeriodicPotential":
        shape = (points_per_cell,) * dimension
        return PeriodicPotential(dimension, points_per_cell, np.zeros(shape))

    @staticmethod
    def from_callable(
        dimension: int, points_per_cell: int, func: Callable[[np.ndarray], np.ndarray]
    ) -> "PeriodicPotential":
        """Sample a callable V0(x), x of shape (m, d), on one unit cell."""
        offs = _cell_offsets(points_per_cell)
        grids = np.meshgrid(*([offs] * dimension), indexing="ij")
        pts = np.stack([g.ravel() for g in grids], axis=-1)
        vals = np.asarray(func(pts), dtype=float).reshape((points_per_cell,) * dimension)
        return PeriodicPotential(dimension, points_per_cell, vals)

    @staticmethod
    def decomposable(
        points_per_cell: int, profiles: Sequence[Callable[[np.ndarray], np.ndarray]]
    ) -> "PeriodicPotential":
        """V0(x) = sum_j V_j(x_j) from one-dimensional profiles, exact on the grid."""
        d = len(profiles)
        offs = _cell_offsets(points_per_cell)
        axis_vals = [np.asarray(f(offs), dtype=float) for f in profiles]
        total = axis_vals[0]
        for v in axis_vals[1:]:
            total = total[..., None] + v
        return PeriodicPotential(d, points_per_cell, total)

    def shifted(self, constant: float) -> "PeriodicPotential":
        return PeriodicPotential(
            self.dimension, self.points_per_cell, self.cell_values + constant
        )

    def tile(self, grid: GridSpec) -> np.ndarray:
        if grid.dimension != self.dimension or grid.points_per_cell != self.points_per_cell:
            raise ValueError("potential sampling does not match the grid")
        return np.tile(self.cell_values, grid.cells).ravel()


# Profile evaluators are module-level classes, not closures: models travel
# into multiprocessing workers and must pickle.
@dataclass(frozen=True)
class _BoxProfile:
    half: float
    height: float

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return np.where(np.max(np.abs(pts), axis=-1) < self.half, self.height, 0.0)


@dataclass(frozen=True)
class _ExponentialProfile:
    delta2: float
    delta3: float

    def __call__(self, pts: np.ndarray) -> np.ndarray:
        return self.delta2 * np.exp(-self.delta3 * np.max(np.abs(pts), axis=-1))


@dataclass(frozen=True)
class SingleSitePotential:
    """Single-site profile u >= 0 with a core lower bound and decaying tail.

    Parameters
    ----------
    profile : callable
        Vectorized evaluator, (m, d) points -> (m,) values.  Assembly
        truncates it outside the sup-norm ball of ``radius``.
    delta1 : float
        Lower bound of u on the core cube {||x||_inf < core_diameter/2}.
    core_diameter : float
        Side s of the core cube Lambda_s.
    delta2, delta3 : float
        Tail envelope |u(x)| <= delta2 * exp(-delta3 ||x||_inf) outside
        the core.
    radius : float
        Truncation radius R_u; contributions beyond it are dropped.
    """

    profile: Callable[[np.ndarray], np.ndarray]
    delta1: float
    core_diameter: float
    delta2: float
    delta3: float
    radius: float

    def __post_init__(self) -> None:
        for name in ("delta1", "delta2", "delta3"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.core_diameter <= 0 or self.radius <= 0:
            raise ValueError("core_diameter and radius must be positive")
        if self.radius < self.core_diameter / 2:
            raise ValueError("truncation radius must cover the core cube")

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        vals = np.asarray(self.profile(pts), dtype=float)
        outside = np.max(np.abs(pts), axis=-1) > self.radius
        vals = np.where(outside, 0.0, vals)
        return vals

    @staticmethod
    def box(delta1: float = 1.0, core_diameter: float = 1.0) -> "SingleSitePotential":
        """Indicator bump: u = delta1 on the core cube, 0 outside."""
        return SingleSitePotential(
            profile=_BoxProfile(core_diameter / 2.0, delta1),
            delta1=delta1,
            core_diameter=core_diameter,
            delta2=delta1,
            delta3=1.0,
            radius=core_diameter / 2.0,
        )

    @staticmethod
    def exponential(
        delta1: float = 1.0,
        core_diameter: float = 1.0,
        delta3: float = 1.0,
        tail_floor: float = 1e-10,
    ) -> "SingleSitePotential":
        """u(x) = delta2 * exp(-delta3 ||x||_inf), truncated where it dips
        below ``tail_floor`` (default keeps the dropped tail < 1e-10)."""
        delta2 = delta1 * math.exp(delta3 * core_diameter / 2.0)
        radius = math.log(delta2 / tail_floor) / delta3
        return SingleSitePotential(
            profile=_ExponentialProfile(delta2, delta3),
            delta1=delta1,
            core_diameter=core_diameter,
            delta2=delta2,
            delta3=delta3,
            radius=radius,
        )


@dataclass(frozen=True)
class SingleSiteReport:
    """Outcome of validate_single_site; carries pass/fail, never raises."""

    passed: bool
    messages: tuple[str, ...]
    min_core_value: float
    worst_tail_excess: float


def validate_single_site(
    u: SingleSitePotential, points_per_cell: int = 8, dimension: int = 1
) -> SingleSiteReport:
    """Check nonnegativity, the core lower bound, and the tail envelope.

    Samples u on the assembly mesh out to the truncation radius and
    reports the first violation location of each kind.
    """
    h = 1.0 / points_per_cell
    n = int(math.ceil(u.radius / h)) + 1
    axis = h * np.arange(-n, n + 1)
    grids = np.meshgrid(*([axis] * dimension), indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=-1)
    vals = u.evaluate(pts)
    sup = np.max(np.abs(pts), axis=-1)

    messages: list[str] = []
    tol = 1e-12

    neg = vals < -tol
    if np.any(neg):
        i = int(np.argmax(neg))
        messages.append(f"u < 0 at x = {tuple(pts[i])} (value {vals[i]:.3e})")

    core = sup < u.core_diameter / 2.0 - tol
    min_core = float(np.min(vals[core])) if np.any(core) else math.inf
    if np.any(core) and min_core < u.delta1 - tol:
        i = int(np.argmin(np.where(core, vals, math.inf)))
        messages.append(
            f"core bound violated at x = {tuple(pts[i])}: {min_core:.6g} < delta1 = {u.delta1}"
        )

    tail = (~core) & (sup <= u.radius + tol)
    envelope = u.delta2 * np.exp(-u.delta3 * sup)
    excess = np.abs(vals) - envelope * (1.0 + 1e-9)
    worst = float(np.max(excess[tail])) if np.any(tail) else -math.inf
    if np.any(tail) and worst > tol:
        i = int(np.argmax(np.where(tail, excess, -math.inf)))
        messages.append(
            f"tail envelope violated at x = {tuple(pts[i])}: "
            f"|u| exceeds delta2*exp(-delta3*|x|) by {worst:.3e}"
        )

    return SingleSiteReport(
        passed=not messages,
        messages=tuple(messages),
        min_core_value=min_core,
        worst_tail_excess=worst,
    )


@dataclass(frozen=True)
class AssembledHamiltonian:
    """Sparse Hermitian matrix plus the geometry it was assembled on."""

    matrix: scipy.sparse.csr_matrix
    grid: GridSpec
    bc: BoundaryCondition
    label: str = "h0"

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def hermiticity_defect(self) -> float:
        d = self.matrix - self.matrix.getH()
        return float(np.max(np.abs(d.data))) if d.nnz else 0.0

    def _tridiagonal(self) -> tuple[np.ndarray, np.ndarray] | None:
        """(diag, offdiag) when the matrix is a real tridiagonal chain."""
        if self.grid.dimension != 1 or self.bc.wraps:
            return None
        m = self.matrix
        if np.iscomplexobj(m.data):
            return None
        return m.diagonal(0).real, m.diagonal(1).real

    def eigenvalues(self, upper: float | None = None) -> np.ndarray:
        """Sorted eigenvalues, optionally only those strictly below ``upper``.

        Dispatches to a banded solver for real 1D Dirichlet chains and to
        dense Hermitian solvers otherwise.
        """
        tri = self._tridiagonal()
        if tri is not None:
            diag, off = tri
            if upper is None:
                if len(diag) == 1:
                    return diag.copy()
                return scipy.linalg.eigvalsh_tridiagonal(diag, off)
            lo = float(np.min(diag) - 2.0 * np.sum(np.abs(off[:1])) - 4.0)
            if len(diag) == 1:
                w = diag.copy()
            else:
                w = scipy.linalg.eigvalsh_tridiagonal(
                    diag, off, select="v", select_range=(lo, float(upper))
                )
            return w[w < upper]
        w = scipy.linalg.eigvalsh(self.dense())
        if upper is not None:
            w = w[w < upper]
        return w

    def with_matrix(self, matrix: scipy.sparse.csr_matrix, label: str) -> "AssembledHamiltonian":
        return AssembledHamiltonian(matrix, self.grid, self.bc, label)


def _laplacian(grid: GridSpec, bc: BoundaryCondition) -> scipy.sparse.csr_matrix:
    shape = grid.shape
    n = grid.n_points
    idx = np.arange(n).reshape(shape)
    is_complex = bc.kind == "theta"
    dtype = complex if is_complex else float

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    vals: list[np.ndarray] = []
    diag = np.zeros(n)

    for axis in range(grid.dimension):
        h = grid.mesh[axis]
        w = 1.0 / (h * h)
        diag += 2.0 * w

        src = idx
        dst = np.roll(idx, -1, axis=axis)
        interior = np.ones(shape, dtype=bool)
        last = [slice(None)] * grid.dimension
        last[axis] = slice(shape[axis] - 1, shape[axis])
        interior[tuple(last)] = False

        a = src[interior].ravel()
        b = dst[interior].ravel()
        hop = np.full(a.shape, -w, dtype=dtype)
        rows += [a, b]
        cols += [b, a]
        vals += [hop, hop.conj()]

        if bc.wraps:
            a = src[~interior].ravel()
            b = dst[~interior].ravel()
            if is_complex:
                phase = np.exp(1j * bc.theta[axis])
            else:
                phase = 1.0
            wrap = np.full(a.shape, -w * phase, dtype=dtype)
            rows += [a, b]
            cols += [b, a]
            vals += [wrap, np.conj(wrap)]

    mat = scipy.sparse.coo_matrix(
        (np.concatenate(vals + [diag.astype(dtype)]),
         (np.concatenate(rows + [np.arange(n)]), np.concatenate(cols + [np.arange(n)]))),
        shape=(n, n),
    )
    return mat.tocsr()


def assemble_h0(
    grid: GridSpec, v0: PeriodicPotential, bc: BoundaryCondition
) -> AssembledHamiltonian:
    """Assemble H0 = -Laplace + V0 on the box under the given boundary
    condition.  The result is Hermitian up to exact arithmetic."""
    if bc.kind == "theta" and len(bc.theta) != grid.dimension:
        raise ValueError(
            f"theta has {len(bc.theta)} components for dimension {grid.dimension}"
        )
    lap = _laplacian(grid, bc)
    diag = v0.tile(grid)
    mat = (lap + scipy.sparse.diags(diag.astype(lap.dtype))).tocsr()
    return AssembledHamiltonian(mat, grid, bc, label="h0")


def box_sites(grid: GridSpec, margin: float) -> list[tuple[int, ...]]:
    """Integer lattice sites whose truncated bump can reach the box."""
    ranges = []
    for j in range(grid.dimension):
        half = grid.cells[j] * grid.stretch[j] / 2.0
        a = grid.stretch[j]
        lo = int(math.ceil((-half - margin) / a))
        hi = int(math.floor((half + margin) / a))
        ranges.append(range(lo, hi + 1))
    return [tuple(k) for k in itertools.product(*ranges)]


def fundamental_sites(grid: GridSpec) -> list[tuple[int, ...]]:
    """Sites of the fundamental cell {-l..l}^d of a (2l+1)^d cube box."""
    l = grid.half_width
    return [tuple(k) for k in itertools.product(range(-l, l + 1), repeat=grid.dimension)]


def fold_site(site: tuple[int, ...], cells: tuple[int, ...]) -> tuple[int, ...]:
    """Representative of site + (cells)Z^d inside {-l..l} per axis."""
    out = []
    for k, c in zip(site, cells):
        if c % 2 == 0:
            raise ValueError(f"folding needs an odd cell count, got {c}")
        half = (c - 1) // 2
        out.append((k + half) % c - half)
    return tuple(out)


def _site_window_indices(
    grid: GridSpec, site: tuple[int, ...], radius: float
) -> tuple[tuple[np.ndarray, ...], np.ndarray] | None:
    """Grid indices within sup-norm ``radius`` of the site, or None."""
    axes_idx = []
    axes_off = []
    for j in range(grid.dimension):
        coords = grid.axis_coords(j)
        pos = site[j] * grid.stretch[j]
        lo = np.searchsorted(coords, pos - radius - 1e-12, side="left")
        hi = np.searchsorted(coords, pos + radius + 1e-12, side="right")
        if hi <= lo:
            return None
        axes_idx.append(np.arange(lo, hi))
        axes_off.append(coords[lo:hi] - pos)
    grids = np.meshgrid(*axes_off, indexing="ij")
    offsets = np.stack([g.ravel() for g in grids], axis=-1)
    return tuple(axes_idx), offsets


def _accumulate_site(
    v: np.ndarray,
    grid: GridSpec,
    u: SingleSitePotential,
    site: tuple[int, ...],
    coupling: float,
) -> None:
    if coupling == 0.0:
        return
    window = _site_window_indices(grid, site, u.radius)
    if window is None:
        return
    axes_idx, offsets = window
    vals = coupling * u.evaluate(offsets)
    shape = tuple(len(a) for a in axes_idx)
    view = v.reshape(grid.shape)
    ix = np.ix_(*axes_idx)
    view[ix] += vals.reshape(shape)


def _check_nonnegative(v: np.ndarray) -> None:
    if np.min(v) < -1e-12:
        raise ValueError(
            f"assembled random potential has negative entries (min {np.min(v):.3e}); "
            "the single-site profile must be nonnegative"
        )


def assemble_anderson(
    h0: AssembledHamiltonian,
    u: SingleSitePotential,
    sample: DisorderSample,
) -> AssembledHamiltonian:
    """Add the Anderson potential sum_k omega_k u(. - k) to an assembled H0.

    Every lattice site whose truncation window meets the box must carry a
    coupling in ``sample``; a missing site raises KeyError naming it.
    """
    grid = h0.grid
    v = np.zeros(grid.n_points)
    for site in box_sites(grid, u.radius):
        _accumulate_site(v, grid, u, site, sample.coupling_at(site))
    _check_nonnegative(v)
    mat = (h0.matrix + scipy.sparse.diags(v.astype(h0.matrix.dtype))).tocsr()
    return h0.with_matrix(mat, label="anderson")


def assemble_periodic_approx(
    h0: AssembledHamiltonian,
    u: SingleSitePotential,
    sample: DisorderSample,
) -> AssembledHamiltonian:
    """Periodic approximation: couplings repeat with the box period.

    The coupling at site k is the sampled value at the folded site
    k mod (2l+1)Z^d (representative in {-l..l}^d), so only the fundamental
    cell must be sampled.  Tails of u that cross the box boundary wrap
    around the torus through the extended site sum.  Requires a wrapping
    boundary condition (Periodic or Theta) and an odd cell count.
    """
    grid = h0.grid
    if not h0.bc.wraps:
        raise ValueError("periodic approximation needs Periodic or Theta boundary conditions")
    grid.half_width  # noqa: B018  -- validates the (2l+1)^d cube shape
    v = np.zeros(grid.n_points)
    for site in box_sites(grid, u.radius):
        folded = fold_site(site, grid.cells)
        _accumulate_site(v, grid, u, site, sample.coupling_at(folded))
    _check_nonnegative(v)
    mat = (h0.matrix + scipy.sparse.diags(v.astype(h0.matrix.dtype))).tocsr()
    return h0.with_matrix(mat, label="periodic-approx")


def export_coordinate_file(h: AssembledHamiltonian, path: str) -> None:
    """Write the matrix as 'row col re [im]' text lines for inspection."""
    coo = h.matrix.tocoo()
    complex_vals = np.iscomplexobj(coo.data)
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"# {h.label} n={h.n} bc={h.bc.kind}\n")
        for r, c, x in zip(coo.row, coo.col, coo.data):
            if complex_vals:
                fh.write(f"{r} {c} {x.real!r} {x.imag!r}\n")
            else:
                fh.write(f"{r} {c} {x!r}\n")
