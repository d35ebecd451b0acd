"""Reproducible disorder sampling for Anderson-type lattice models.

Coupling constants are produced by a counter-based hash keyed on
(master seed, realization index, lattice site).  A site's draw therefore
never depends on which other sites were requested or in which order,
which makes parallel sampling bitwise identical to serial sampling.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np
from scipy.special import betaincinv

__all__ = [
    "DisorderModel",
    "DisorderSample",
    "sample_disorder",
]

_LAWS = ("uniform", "beta")

# SplitMix64 constants (Steele et al.).  uint64 arithmetic wraps mod 2**64.
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def _hash_chain(seed: int, fields: Iterable[np.ndarray | int]) -> np.ndarray:
    """Fold integer fields into a well-mixed uint64 stream."""
    with np.errstate(over="ignore"):
        h = _mix(np.uint64(seed) + _GAMMA)
        for f in fields:
            v = np.asarray(f).astype(np.int64).view(np.uint64)
            h = _mix((h + _GAMMA) ^ _mix(v + _GAMMA))
    return h


def _uniform01(seed: int, realization: int, sites: np.ndarray) -> np.ndarray:
    """Deterministic i.i.d.-quality uniforms in [0, 1), one per site row."""
    cols = [int(realization)] + [sites[:, j] for j in range(sites.shape[1])]
    h = _hash_chain(seed, cols)
    return (h >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class DisorderModel:
    """Law of the i.i.d. coupling constants omega_k on [0, omega_max].

    Parameters
    ----------
    omega_max : float
        Upper edge of the single-site coupling range.  The degenerate
        value 0 is admitted and yields the unperturbed operator.
    law : str
        ``"uniform"`` (default) or ``"beta"``.  Both have bounded density
        on [0, omega_max]; beta requires shape parameters >= 1 for that.
    master_seed : int
        Root of the deterministic sampling scheme.
    beta_a, beta_b : float
        Shape parameters, only read when ``law == "beta"``.
    """

    omega_max: float
    law: str = "uniform"
    master_seed: int = 0
    beta_a: float = 2.0
    beta_b: float = 2.0

    def __post_init__(self) -> None:
        if self.omega_max < 0:
            raise ValueError(f"omega_max must be >= 0, got {self.omega_max}")
        if self.law not in _LAWS:
            raise ValueError(f"unknown disorder law {self.law!r}; choose from {_LAWS}")
        if self.law == "beta" and (self.beta_a < 1 or self.beta_b < 1):
            raise ValueError("beta law needs shape parameters >= 1 for a bounded density")

    def draw(self, sites: np.ndarray, realization: int) -> np.ndarray:
        u = _uniform01(self.master_seed, realization, sites)
        if self.law == "beta":
            u = betaincinv(self.beta_a, self.beta_b, u)
        return self.omega_max * u


@dataclass(frozen=True)
class DisorderSample:
    """One realization of couplings: a map from lattice site to omega_k.

    Sites are integer tuples (length = dimension) covering the simulation
    box plus the single-site truncation margin.
    """

    couplings: dict[tuple[int, ...], float]
    omega_max: float
    realization: int = 0

    def __getitem__(self, site: tuple[int, ...]) -> float:
        return self.couplings[site]

    def __contains__(self, site: tuple[int, ...]) -> bool:
        return site in self.couplings

    def __len__(self) -> int:
        return len(self.couplings)

    def sites(self) -> Iterator[tuple[int, ...]]:
        return iter(self.couplings)

    def coupling_at(self, site: tuple[int, ...]) -> float:
        """Coupling at ``site``; raises with the site named when absent."""
        try:
            return self.couplings[site]
        except KeyError:
            raise KeyError(f"no coupling sampled for contributing site {site}") from None

    def translated(self, vector: tuple[int, ...], fold_cells: int | None = None) -> "DisorderSample":
        """Sample shifted by a lattice vector, optionally folded mod fold_cells.

        Used by translation-invariance checks: the shifted sample is the
        original field viewed from a displaced origin.
        """
        out: dict[tuple[int, ...], float] = {}
        for site, w in self.couplings.items():
            moved = tuple(s + v for s, v in zip(site, vector))
            if fold_cells is not None:
                half = (fold_cells - 1) // 2
                moved = tuple((c + half) % fold_cells - half for c in moved)
            out[moved] = w
        return DisorderSample(out, self.omega_max, self.realization)

    @staticmethod
    def constant(sites: Iterable[tuple[int, ...]], value: float) -> "DisorderSample":
        sites = list(sites)
        return DisorderSample({s: float(value) for s in sites}, omega_max=max(value, 0.0))


def sample_disorder(
    model: DisorderModel,
    sites: Iterable[tuple[int, ...]],
    realization: int,
) -> DisorderSample:
    """Draw one disorder realization on a finite site set.

    The value at site k is a pure function of
    (model.master_seed, realization, k): enlarging or reordering the site
    set never changes previously drawn values, and omega_max = 0 yields
    identically zero couplings.
    """
    site_list = [tuple(int(c) for c in s) for s in sites]
    if not site_list:
        return DisorderSample({}, model.omega_max, realization)
    dims = {len(s) for s in site_list}
    if len(dims) != 1:
        raise ValueError("sites must all share one dimension")
    arr = np.asarray(site_list, dtype=np.int64)
    values = model.draw(arr, realization)
    return DisorderSample(
        {s: float(v) for s, v in zip(site_list, values)},
        model.omega_max,
        realization,
    )
