"""Bundled Anderson model: periodic background, single-site bump, disorder law.

This is the object the experiment layer passes around.  It knows how to
assemble finite boxes of itself under any boundary condition and how to
map a quasimomentum in the reduced zone to the literal wrap phase of the
box matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .disorder import DisorderModel, DisorderSample, sample_disorder
from .hamiltonian import (
    AssembledHamiltonian,
    BoundaryCondition,
    GridSpec,
    PeriodicPotential,
    SingleSitePotential,
    assemble_anderson,
    assemble_h0,
    assemble_periodic_approx,
    box_sites,
    fundamental_sites,
)

__all__ = ["AndersonModel", "align_band_edge"]


@dataclass(frozen=True)
class AndersonModel:
    """H_omega = -Laplace + V0 + sum_k omega_k u(. - k) on Z^d, discretized."""

    dimension: int
    points_per_cell: int
    v0: PeriodicPotential
    single_site: SingleSitePotential
    disorder: DisorderModel
    edge_shift: float = 0.0

    def __post_init__(self) -> None:
        if self.v0.dimension != self.dimension:
            raise ValueError("periodic potential dimension mismatch")
        if self.v0.points_per_cell != self.points_per_cell:
            raise ValueError("periodic potential mesh mismatch")

    @staticmethod
    def free(
        dimension: int = 1,
        points_per_cell: int = 1,
        omega_max: float = 1.0,
        master_seed: int = 0,
        single_site: SingleSitePotential | None = None,
        law: str = "uniform",
    ) -> "AndersonModel":
        """V0 = 0 with a box single-site bump; the workhorse test model."""
        return AndersonModel(
            dimension=dimension,
            points_per_cell=points_per_cell,
            v0=PeriodicPotential.zero(dimension, points_per_cell),
            single_site=single_site or SingleSitePotential.box(),
            disorder=DisorderModel(omega_max=omega_max, law=law, master_seed=master_seed),
        )

    # -- assembly ---------------------------------------------------------

    def grid(self, cells: int | Sequence[int]) -> GridSpec:
        return GridSpec.from_cells(self.dimension, self.points_per_cell, cells)

    def h0_box(self, cells: int | Sequence[int], bc: BoundaryCondition) -> AssembledHamiltonian:
        return assemble_h0(self.grid(cells), self.v0, bc)

    def sample_for_box(self, grid: GridSpec, realization: int) -> DisorderSample:
        sites = box_sites(grid, self.single_site.radius)
        return sample_disorder(self.disorder, sites, realization)

    def sample_fundamental(self, grid: GridSpec, realization: int) -> DisorderSample:
        return sample_disorder(self.disorder, fundamental_sites(grid), realization)

    def anderson_box(
        self, cells: int | Sequence[int], bc: BoundaryCondition, realization: int
    ) -> AssembledHamiltonian:
        """Box restriction of H_omega with independently sampled couplings."""
        grid = self.grid(cells)
        h0 = assemble_h0(grid, self.v0, bc)
        return assemble_anderson(h0, self.single_site, self.sample_for_box(grid, realization))

    def periodic_box(
        self,
        half_width: int,
        bc: BoundaryCondition,
        realization: int | None = None,
        sample: DisorderSample | None = None,
    ) -> AssembledHamiltonian:
        """Periodic approximation H_{omega,l} on Lambda_{2l+1}."""
        grid = GridSpec.cube(self.dimension, self.points_per_cell, half_width)
        h0 = assemble_h0(grid, self.v0, bc)
        if (realization is None) == (sample is None):
            raise ValueError("give either a realization index or a sample, not both")
        if sample is None:
            sample = self.sample_fundamental(grid, realization)
        return assemble_periodic_approx(h0, self.single_site, sample)

    # -- quasimomentum handling -------------------------------------------

    def wrap_phases(self, half_width: int, quasimomentum: Sequence[float]) -> BoundaryCondition:
        """Boundary condition realizing Bloch quasimomentum theta in B_l.

        A Bloch wave with quasimomentum theta gains the phase
        e^{i theta_j (2l+1)} across the box of side 2l+1, so that is the
        literal wrap phase handed to the assembler.
        """
        length = 2 * half_width + 1
        phases = []
        for t in quasimomentum:
            ph = t * length
            if not -math.pi - 1e-9 <= ph <= math.pi + 1e-9:
                raise ValueError(
                    f"quasimomentum component {t} lies outside the reduced zone "
                    f"[-pi/{length}, pi/{length}]"
                )
            phases.append(min(max(ph, -math.pi), math.pi))
        return BoundaryCondition.with_phases(phases)

    def periodic_box_at(
        self,
        half_width: int,
        quasimomentum: Sequence[float],
        realization: int | None = None,
        sample: DisorderSample | None = None,
    ) -> AssembledHamiltonian:
        bc = self.wrap_phases(half_width, quasimomentum)
        return self.periodic_box(half_width, bc, realization=realization, sample=sample)

    def unit_cell_factory(self):
        """theta in [-pi,pi]^d -> H0 on one unit cell with that wrap phase."""
        grid = GridSpec.from_cells(self.dimension, self.points_per_cell, 1)

        def factory(theta: Sequence[float]) -> AssembledHamiltonian:
            return assemble_h0(grid, self.v0, BoundaryCondition.with_phases(theta))

        return factory

    def periodic_band_factory(
        self, half_width: int, realization: int = 0, sample: DisorderSample | None = None
    ):
        """theta in B_l -> H_{omega,l} at that quasimomentum."""
        grid = GridSpec.cube(self.dimension, self.points_per_cell, half_width)
        if sample is None:
            sample = self.sample_fundamental(grid, realization)
        frozen = sample

        def factory(theta: Sequence[float]) -> AssembledHamiltonian:
            return self.periodic_box_at(half_width, theta, sample=frozen)

        return factory

    # -- band edge --------------------------------------------------------

    def band_minimum(self, resolution: int = 401) -> float:
        """Minimum of the lowest band of H0 over an inclusive full-zone grid."""
        if resolution % 2 == 0:
            resolution += 1  # keep theta = 0 on the grid
        factory = self.unit_cell_factory()
        axes = [np.linspace(-math.pi, math.pi, resolution)] * self.dimension
        best = math.inf
        if self.dimension == 1:
            for t in axes[0]:
                best = min(best, float(factory((t,)).eigenvalues()[0]))
        else:
            for t1 in axes[0]:
                for t2 in axes[1]:
                    best = min(best, float(factory((t1, t2)).eigenvalues()[0]))
        return best


def align_band_edge(model: AndersonModel, resolution: int = 401) -> AndersonModel:
    """Shift V0 so the lowest band edge of H0 sits exactly at 0.

    The shift is the deterministic band minimum at the reference
    resolution; it is recorded on the model for provenance.
    """
    shift = model.band_minimum(resolution)
    if shift == 0.0:
        return model
    return replace(
        model,
        v0=model.v0.shifted(-shift),
        edge_shift=model.edge_shift - shift,
    )
