"""Integrated density of states: exact counting, averaging, tail fits."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from randschrod import (
    AndersonModel,
    BoundaryCondition,
    DisorderAverage,
    IdsCurve,
    average_ids,
    band_edge_mass,
    ids_difference_experiment,
    ids_dirichlet_box,
    ids_periodic_approx,
    lifshitz_fit,
    mass_window,
    smoothed_functional,
)
from randschrod.hscalc import plateau_function


def _dense_count_oracle(h, energies):
    evals = np.linalg.eigvalsh(h.dense())
    return np.array([np.sum(evals < e) for e in energies])


def _integer_counts(curve):
    return np.rint(curve.values * curve.volume).astype(int)


class TestDirichletCounting:
    @pytest.mark.parametrize(
        "dimension,points_per_cell,cells",
        [(1, 1, 31), (1, 2, 17), (2, 1, 7), (2, 2, 5)],
    )
    def test_counts_match_dense_diagonalization(self, dimension, points_per_cell, cells):
        model = AndersonModel.free(
            dimension=dimension, points_per_cell=points_per_cell,
            omega_max=1.5, master_seed=21,
        )
        h = model.anderson_box(cells, BoundaryCondition.dirichlet(), realization=0)
        assert h.n <= 400
        energies = np.linspace(-0.5, 9.0, 41)
        curve = ids_dirichlet_box(h, energies)
        assert np.array_equal(_integer_counts(curve), _dense_count_oracle(h, energies))

    def test_cutoff_path_agrees_below_the_cutoff(self):
        model = AndersonModel.free(omega_max=1.0, master_seed=8)
        h = model.anderson_box(60, BoundaryCondition.dirichlet(), realization=2)
        energies = np.linspace(0.0, 2.0, 21)
        full = ids_dirichlet_box(h, energies)
        cut = ids_dirichlet_box(h, energies, upper=2.0)
        assert np.array_equal(_integer_counts(cut), _integer_counts(full))
        assert not cut.complete
        with pytest.raises(ValueError, match="total mass"):
            cut.total_mass

    def test_counting_is_strictly_below(self):
        # free chain of 5 sites has eigenvalue 2 - 2cos(3 pi / 6) = 2
        # exactly; requesting E = 2 must not count it
        model = AndersonModel.free(omega_max=0.0)
        h = model.h0_box(5, BoundaryCondition.dirichlet())
        curve = ids_dirichlet_box(h, [2.0, 2.0 + 1e-9])
        assert curve.values[0] == pytest.approx(2.0 / 5.0)
        assert curve.values[1] == pytest.approx(3.0 / 5.0)

    def test_free_chain_of_two_hundred_cells_has_half_mass_at_two(self):
        model = AndersonModel.free(omega_max=0.0)
        h = model.h0_box(200, BoundaryCondition.dirichlet())
        curve = ids_dirichlet_box(h, [2.0])
        assert _integer_counts(curve)[0] == 100
        assert curve.values[0] == pytest.approx(0.5, abs=1e-12)

    def test_periodic_boundary_conditions_are_rejected(self):
        model = AndersonModel.free(omega_max=0.0)
        h = model.h0_box(5, BoundaryCondition.periodic())
        with pytest.raises(ValueError, match="[Dd]irichlet"):
            ids_dirichlet_box(h, [1.0])

    def test_energy_grid_beyond_cutoff_is_rejected(self):
        model = AndersonModel.free(omega_max=0.0)
        h = model.h0_box(5, BoundaryCondition.dirichlet())
        with pytest.raises(ValueError, match="cutoff"):
            ids_dirichlet_box(h, [3.0], upper=2.0)


class TestPeriodicCounting:
    def test_zero_disorder_zone_integral_tracks_the_arccos_law(self):
        model = AndersonModel.free(omega_max=0.0)
        grid = model.grid(2 * 6 + 1)
        sample = model.sample_fundamental(grid, 0)
        energies = np.linspace(0.05, 3.95, 40)
        curve = ids_periodic_approx(model, sample, 6, energies, theta_resolution=8)
        exact = np.arccos(1.0 - energies / 2.0) / np.pi
        assert np.max(np.abs(curve.values - exact)) <= 2.0 / 8.0

    def test_spectrum_is_invariant_under_folded_translation(self):
        # shifting the coupling field through the torus permutes sites,
        # so the periodic box spectrum cannot move
        from randschrod import SingleSitePotential

        model = AndersonModel.free(
            omega_max=1.0, master_seed=14,
            single_site=SingleSitePotential.exponential(delta3=1.2),
        )
        l = 5
        grid = model.grid(2 * l + 1)
        sample = model.sample_fundamental(grid, 0)
        bc = BoundaryCondition.periodic()
        base = model.periodic_box(l, bc, sample=sample).eigenvalues()
        for shift in ((1,), (4,), (-3,)):
            moved = sample.translated(shift, fold_cells=2 * l + 1)
            again = model.periodic_box(l, bc, sample=moved).eigenvalues()
            assert np.allclose(base, again, atol=1e-10)

    def test_zero_theta_resolution_is_rejected(self):
        model = AndersonModel.free()
        grid = model.grid(5)
        sample = model.sample_fundamental(grid, 0)
        with pytest.raises(ValueError, match="theta_resolution"):
            ids_periodic_approx(model, sample, 2, [1.0], theta_resolution=0)


class TestCurveContainer:
    def test_from_jumps_hand_example(self):
        curve = IdsCurve.from_jumps(
            positions=np.array([1.0, 3.0, 1.0]),
            weights=0.25,
            energies=np.array([0.0, 1.0, 2.0, 3.0, 4.0]),
            volume=4.0,
            points_per_cell=1,
        )
        assert np.array_equal(curve.values, [0.0, 0.0, 0.5, 0.5, 0.75])
        assert curve.value_at(1.0) == 0.0
        assert curve.value_at(1.5) == 0.5
        assert curve.total_mass == 0.75

    def test_unsorted_energy_grid_is_rejected(self):
        with pytest.raises(ValueError, match="sorted"):
            IdsCurve(energies=np.array([1.0, 0.0]), values=np.zeros(2),
                     volume=1.0, points_per_cell=1)

    @given(
        positions=hnp.arrays(np.float64, st.integers(1, 30),
                             elements=st.floats(-5, 5)),
        weight=st.floats(1e-3, 1.0),
    )
    @settings(max_examples=50, deadline=None)
    def test_curves_are_monotone_step_functions(self, positions, weight):
        energies = np.linspace(-6, 6, 25)
        curve = IdsCurve.from_jumps(positions, weight, energies, 1.0, 1)
        assert np.all(np.diff(curve.values) >= 0.0)
        assert curve.values[0] >= 0.0
        assert curve.values[-1] <= curve.total_mass + 1e-12
        # below and above the whole spectrum the curve saturates
        assert curve.value_at(-7.0) == 0.0
        assert curve.value_at(7.0) == pytest.approx(curve.total_mass)


class TestStieltjesFunctional:
    def _curve(self):
        return IdsCurve.from_jumps(
            np.array([0.5, 2.5]), np.array([0.125, 0.25]),
            np.linspace(0, 3, 7), volume=8.0, points_per_cell=1,
        )

    def test_constant_one_integrates_to_total_mass(self):
        curve = self._curve()
        assert smoothed_functional(lambda e: np.ones_like(e), curve) == pytest.approx(
            curve.total_mass
        )

    def test_two_jump_quadrature_is_exact(self):
        curve = self._curve()
        g = lambda e: np.sin(e) + 2.0  # noqa: E731
        expected = 0.125 * g(0.5) + 0.25 * g(2.5)
        assert smoothed_functional(g, curve) == pytest.approx(expected, rel=1e-14)

    def test_function_supported_in_a_gap_integrates_to_zero(self):
        curve = self._curve()
        g = plateau_function(0.5, 3)  # support [-0.25, 0.75]
        shifted = lambda e: g(np.asarray(e) - 1.25)  # noqa: E731
        shifted.support = (1.0, 2.0)
        assert smoothed_functional(shifted, curve) == 0.0

    def test_support_escaping_the_grid_is_rejected(self):
        curve = self._curve()
        g = lambda e: np.ones_like(e)  # noqa: E731
        g.support = (-1.0, 2.0)
        with pytest.raises(ValueError, match="support"):
            smoothed_functional(g, curve)


class TestAveraging:
    def test_mean_and_stderr_for_two_curves(self):
        energies = np.linspace(0, 1, 5)
        a = IdsCurve(energies=energies, values=np.full(5, 0.2), volume=1, points_per_cell=1)
        b = IdsCurve(energies=energies, values=np.full(5, 0.4), volume=1, points_per_cell=1)
        avg = average_ids([a, b])
        assert np.allclose(avg.mean, 0.3)
        # sample std of {0.2, 0.4} is 0.1*sqrt(2); stderr divides by sqrt(2)
        assert np.allclose(avg.stderr, 0.1)
        assert avg.realizations == 2

    def test_mismatched_grids_are_rejected(self):
        a = IdsCurve(energies=np.linspace(0, 1, 5), values=np.zeros(5),
                     volume=1, points_per_cell=1)
        b = IdsCurve(energies=np.linspace(0, 2, 5), values=np.zeros(5),
                     volume=1, points_per_cell=1)
        with pytest.raises(ValueError, match="grid"):
            average_ids([a, b])

    def test_empty_family_is_rejected(self):
        with pytest.raises(ValueError):
            average_ids([])


class TestDifferenceExperiment:
    def test_single_realization_is_rejected(self):
        model = AndersonModel.free(omega_max=0.5)
        with pytest.raises(ValueError, match="2 realizations"):
            ids_difference_experiment(model, plateau_function(0.5, 4), [4],
                                      realizations=1)

    def test_zero_disorder_delta_equals_the_noise_floor(self):
        model = AndersonModel.free(omega_max=0.0)
        table = ids_difference_experiment(
            model, plateau_function(0.5, 4), [4, 6], realizations=2,
            reference_half_width=12,
        )
        for row in table.rows:
            assert row.delta == row.noise_floor
            assert row.stderr == 0.0

    def test_self_comparison_sits_on_the_boundary_bias(self):
        # with reference l equal to the test l the disorder content of the
        # two functionals matches realization by realization; what remains
        # of delta is the deterministic periodic-vs-Dirichlet discrepancy
        # that the noise floor reports
        model = AndersonModel.free(omega_max=0.5, master_seed=3)
        table = ids_difference_experiment(
            model, plateau_function(0.5, 4), [8], realizations=6,
            reference_half_width=8,
        )
        row = table.rows[0]
        assert abs(row.delta - row.noise_floor) <= 2.0 * row.stderr


class TestMassWindow:
    def _avg(self):
        energies = np.linspace(0.0, 1.0, 11)
        mean = np.array([0, 0, 1e-5, 5e-4, 2e-3, 0.02, 0.09, 0.2, 0.3, 0.4, 0.45])
        return DisorderAverage(energies, mean, np.zeros(11), 4)

    def test_window_brackets_the_requested_mass_band(self):
        lo, hi = mass_window(self._avg(), edge=0.0, mass_low=1e-4, mass_high=0.1)
        assert lo == pytest.approx(0.3)   # first energy with mass >= 1e-4
        assert hi == pytest.approx(0.6)   # last energy with mass <= 0.1

    def test_empty_band_raises(self):
        with pytest.raises(ValueError, match="mass"):
            mass_window(self._avg(), edge=0.0, mass_low=0.46, mass_high=0.47)


class TestLifshitzFit:
    def _average_from(self, f, energies):
        # anchor the curve at the edge so mean_at(0) reads exactly 0
        grid = np.concatenate([[0.0], energies])
        mean = np.concatenate([[0.0], f(energies)])
        return DisorderAverage(grid, mean, np.zeros_like(mean), 2)

    def test_pure_lifshitz_tail_recovers_minus_half(self):
        energies = np.geomspace(1e-3, 1e-1, 30)
        avg = self._average_from(lambda e: np.exp(-e ** -0.5), energies)
        fit = lifshitz_fit(avg, edge=0.0, window=(1e-3, 1e-1),
                           target=-0.5, target_tolerance=0.05)
        assert fit.exponent == pytest.approx(-0.5, abs=1e-9)
        assert fit.residual_rms < 1e-9
        assert fit.matches_target

    def test_van_hove_edge_is_flagged_as_non_lifshitz(self):
        # N(E) = E near the edge gives a flat double-log slope, far from
        # the exponential tail's -1/2
        energies = np.geomspace(1e-3, 1e-2, 20)
        avg = self._average_from(lambda e: e.copy(), energies)
        fit = lifshitz_fit(avg, edge=0.0, window=(1e-3, 1e-2),
                           target=-0.5, target_tolerance=0.15)
        assert fit.exponent > -0.3
        assert fit.matches_target is False

    def test_no_target_leaves_the_verdict_open(self):
        energies = np.geomspace(1e-3, 1e-1, 10)
        avg = self._average_from(lambda e: np.exp(-e ** -0.5), energies)
        fit = lifshitz_fit(avg, edge=0.0, window=(1e-3, 1e-1))
        assert fit.matches_target is None

    def test_too_few_points_raise(self):
        energies = np.geomspace(1e-3, 1e-1, 10)
        avg = self._average_from(lambda e: np.exp(-e ** -0.5), energies)
        with pytest.raises(ValueError, match="need >= 4"):
            lifshitz_fit(avg, edge=0.0, window=(1e-3, 2e-3))

    def test_window_reaching_half_mass_is_refused(self):
        energies = np.linspace(0.1, 1.0, 10)
        avg = self._average_from(lambda e: 0.6 * e, energies)
        with pytest.raises(ValueError, match="1/2"):
            lifshitz_fit(avg, edge=0.0, window=(0.1, 1.0))

    def test_empty_window_is_refused(self):
        energies = np.geomspace(1e-3, 1e-1, 10)
        avg = self._average_from(lambda e: np.exp(-e ** -0.5), energies)
        with pytest.raises(ValueError, match="window"):
            lifshitz_fit(avg, edge=0.0, window=(0.1, 0.1))


class TestBandEdgeMass:
    def test_zero_disorder_mass_matches_the_arccos_increment(self):
        model = AndersonModel.free(omega_max=0.0)
        result = band_edge_mass(model, 6, 0.25, realizations=2, theta_resolution=8)
        assert result.energy == pytest.approx(2.0 * 6 ** -0.25)
        exact = math.acos(1.0 - result.energy / 2.0) / math.pi
        assert abs(result.mean - exact) <= 4.0 / (13 * 8)
        assert result.stderr == 0.0

    def test_alpha_outside_unit_interval_is_rejected(self):
        model = AndersonModel.free()
        for alpha in (0.0, 1.0, 1.5, -0.2):
            with pytest.raises(ValueError, match="alpha"):
                band_edge_mass(model, 4, alpha, realizations=2)

    def test_bound_is_attached_only_on_request(self):
        model = AndersonModel.free(omega_max=0.0)
        bare = band_edge_mass(model, 4, 0.5, realizations=2)
        assert bare.bound is None
        with_bound = band_edge_mass(
            model, 4, 0.5, realizations=2, smoothness_order=9, bound_constant=2.0
        )
        assert with_bound.bound == pytest.approx(2.0 * 4 ** (-9 * 0.5 + 3))
