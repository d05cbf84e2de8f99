"""Tests for exact evolution, purity series, Schmidt analysis and power iteration."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from puritysieve import dynamics, qcore
from puritysieve.dynamics import (
    FactorizedModel,
    FixedTimeReducedMap,
    ProductEvolution,
    assemble_total,
    central_spin_model,
    evolve_product,
    master_equation_residual,
    pointer_power,
    purity_series,
    schmidt_spectrum,
    spin_star_model,
)
from puritysieve.qcore import IDENTITY_2, SIGMA_X, SIGMA_Z

from oracles import haar_ket, random_density

KET_0Z = np.array([1.0, 0.0], dtype=complex)
KET_0X = np.array([1.0, 1.0], dtype=complex) / np.sqrt(2.0)


class TestFactorizedModel:
    def test_rejects_non_hermitian(self):
        with pytest.raises(ValueError, match="Hermitian"):
            FactorizedModel(np.array([[0.0, 1.0], [0.0, 0.0]]), IDENTITY_2)

    def test_rejects_term_dimension_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            FactorizedModel(SIGMA_Z, IDENTITY_2, ((np.eye(3), IDENTITY_2),))

    def test_layout(self):
        model = central_spin_model(3)
        assert model.system_dim == 2
        assert model.environment_dim == 8
        assert model.total_dim == 16
        assert model.layout.dims == (2, 8)
        assert model.layout.system_slots == (0,)


class TestAssembleTotal:
    def test_central_spin_single_bath_spin_by_hand(self):
        # (omega/2) sz (x) 1 + 1 (x) (omega/2) sz + 0.1 sx (x) sx at omega = 1
        model = central_spin_model(1, omega=1.0, epsilon=0.1)
        expected = np.diag([1.0, 0.0, 0.0, -1.0]).astype(complex)
        expected += 0.1 * np.fliplr(np.eye(4))
        assert_allclose(assemble_total(model), expected, atol=1e-15)
        assert_allclose(assemble_total(model)[0, 0], 1.0)
        assert_allclose(assemble_total(model)[0, 3], 0.1)

    def test_no_interaction_is_block_sum(self):
        model = spin_star_model(2, omega=0.7, couplings=())
        expected = qcore.kron(model.hs, np.eye(4)) + qcore.kron(IDENTITY_2, model.he)
        assert_allclose(assemble_total(model), expected)

    def test_hermitian_for_random_models(self):
        for couplings in [
            (("x", "x", 0.3),),
            (("x", "x", 0.2), ("z", "z", -0.4)),
            (("y", "z", 1.5),),
        ]:
            model = spin_star_model(3, omega=2.0, couplings=couplings)
            assert qcore.is_hermitian(assemble_total(model), atol=1e-12)


class TestEvolveProduct:
    def test_zero_time_is_initial_product(self):
        model = central_spin_model(2)
        rho_e = qcore.maximally_mixed(4)
        rho = evolve_product(model, KET_0X, rho_e, 0.0)
        assert_allclose(rho, qcore.kron(qcore.pure_density(KET_0X), rho_e), atol=1e-13)

    def test_stationary_state_without_interaction(self):
        # |0z> is an eigenstate of hs, so with no coupling the marginal is frozen
        model = spin_star_model(2, couplings=())
        rho_e = qcore.maximally_mixed(4)
        for t in (0.3, 1.7, 12.0):
            rho_s = qcore.partial_trace(
                evolve_product(model, KET_0Z, rho_e, t), model.layout, "system"
            )
            assert_allclose(rho_s, qcore.pure_density(KET_0Z), atol=1e-12)

    def test_full_purity_conserved(self):
        model = central_spin_model(3)
        rho_e = qcore.maximally_mixed(8)
        initial = qcore.purity(evolve_product(model, KET_0X, rho_e, 0.0))
        for t in (0.5, 2.0, 9.0):
            assert abs(qcore.purity(evolve_product(model, KET_0X, rho_e, t)) - initial) < 1e-10

    def test_state_stays_valid(self):
        model = central_spin_model(3)
        rho_e = qcore.maximally_mixed(8)
        for t in (0.4, 3.1):
            rho = evolve_product(model, KET_0X, rho_e, t)
            qcore.density_matrix(rho)  # raises if trace, hermiticity or PSD fail

    def test_dimension_mismatch(self):
        model = central_spin_model(2)
        with pytest.raises(ValueError, match="dimension"):
            ProductEvolution(model, np.array([1.0, 0, 0]) , qcore.maximally_mixed(4))
        with pytest.raises(ValueError, match="dimension"):
            ProductEvolution(model, KET_0Z, qcore.maximally_mixed(8))


class TestPuritySeries:
    def test_initial_value_is_one(self):
        model = central_spin_model(2)
        series = purity_series(model, KET_0X, qcore.maximally_mixed(4), [0.0, 0.5])
        assert series.values[0] == 1.0
        assert series.pmax[0] == 1.0

    def test_quadratic_law_for_field_eigenstate(self):
        # short-time loss coefficient 2 * eps^2 * n = 0.12 for the defaults
        model = central_spin_model(6)
        times = np.linspace(0.0, 0.3, 16)
        series = purity_series(model, KET_0Z, qcore.maximally_mixed(64), times)
        deviation = np.abs(series.values - (1.0 - 0.12 * times**2))
        assert deviation.max() < 5e-3

    def test_interaction_eigenstate_wins_at_small_times(self):
        model = central_spin_model(6)
        rho_e = qcore.maximally_mixed(64)
        times = np.linspace(0.0, 1.0, 21)
        series_z = purity_series(model, KET_0Z, rho_e, times)
        series_x = purity_series(model, KET_0X, rho_e, times)
        assert np.all(series_x.values[1:] >= series_z.values[1:])

    def test_sandwich_inequality(self):
        model = central_spin_model(4)
        times = np.linspace(0.0, 8.0, 41)
        series = purity_series(model, KET_0X, qcore.maximally_mixed(16), times)
        assert np.all(series.values <= series.pmax + 1e-12)
        assert np.all(series.pmax <= np.sqrt(series.values) + 1e-10)

    def test_values_independent_of_grid(self):
        model = central_spin_model(2)
        rho_e = qcore.maximally_mixed(4)
        coarse = purity_series(model, KET_0X, rho_e, np.linspace(0.0, 1.0, 6))
        fine = purity_series(model, KET_0X, rho_e, np.linspace(0.0, 1.0, 11))
        assert_allclose(coarse.values, fine.values[::2], atol=1e-13)

    def test_rejects_bad_grids(self):
        model = central_spin_model(2)
        rho_e = qcore.maximally_mixed(4)
        with pytest.raises(ValueError, match="start at 0"):
            purity_series(model, KET_0Z, rho_e, [0.1, 0.2])
        with pytest.raises(ValueError, match="ascending"):
            purity_series(model, KET_0Z, rho_e, [0.0, 0.5, 0.2])


class TestFixedTimeReducedMap:
    def test_matches_direct_evolution(self):
        model = central_spin_model(3)
        rho_e = qcore.maximally_mixed(8)
        t = 1.3
        reduced_map = FixedTimeReducedMap(model, rho_e, t)
        rng = np.random.default_rng(31)
        for _ in range(3):
            psi = haar_ket(rng, 2)
            direct = qcore.partial_trace(
                evolve_product(model, psi, rho_e, t), model.layout, "system"
            )
            assert_allclose(reduced_map.reduced_state(psi), direct, atol=1e-12)


class TestSchmidtSpectrum:
    def test_two_level_mixture(self):
        spectrum = schmidt_spectrum(np.diag([0.7, 0.3]))
        assert_allclose(spectrum.probs, [0.7, 0.3])
        assert len(spectrum.projectors) == 2
        assert_allclose(spectrum.projectors[0], np.diag([1.0, 0.0]), atol=1e-12)

    def test_probs_sum_to_one(self):
        rng = np.random.default_rng(19)
        spectrum = schmidt_spectrum(random_density(rng, 6))
        assert_allclose(spectrum.probs.sum(), 1.0, atol=1e-12)
        assert np.all(np.diff(spectrum.probs) <= 1e-12)

    def test_degenerate_grouping(self):
        spectrum = schmidt_spectrum(qcore.maximally_mixed(2))
        assert_allclose(spectrum.probs, [0.5, 0.5])
        assert len(spectrum.projectors) == 1
        assert_allclose(spectrum.projectors[0], np.eye(2), atol=1e-12)

    def test_projectors_orthogonal_and_idempotent(self):
        rng = np.random.default_rng(37)
        spectrum = schmidt_spectrum(random_density(rng, 5))
        for i, p in enumerate(spectrum.projectors):
            assert_allclose(p @ p, p, atol=1e-10)
            for q in spectrum.projectors[i + 1 :]:
                assert np.max(np.abs(p @ q)) < 1e-10

    def test_schmidt_symmetry_for_pure_total_state(self):
        rng = np.random.default_rng(41)
        layout = qcore.SpaceLayout.bipartite(4, 8)
        psi = haar_ket(rng, 32)
        rho = qcore.pure_density(psi)
        probs_s = schmidt_spectrum(qcore.partial_trace(rho, layout, "system")).probs
        probs_e = schmidt_spectrum(qcore.partial_trace(rho, layout, "environment")).probs
        assert_allclose(probs_s, probs_e[:4], atol=1e-10)
        assert np.max(np.abs(probs_e[4:])) < 1e-10


class TestPointerPower:
    def test_first_order_estimate_is_purity(self):
        estimate = pointer_power(np.diag([0.7, 0.3]), 1)
        assert_allclose(estimate.pmax, 0.58)

    def test_tenth_power_converges(self):
        estimate = pointer_power(np.diag([0.7, 0.3]), 10)
        assert abs(estimate.pmax - 0.7) < 1e-3
        exact = (0.7**11 + 0.3**11) / (0.7**10 + 0.3**10)
        assert_allclose(estimate.pmax, exact, rtol=1e-12)
        assert not estimate.degenerate

    def test_degenerate_case(self):
        estimate = pointer_power(qcore.maximally_mixed(2), 5)
        assert estimate.degenerate
        assert_allclose(estimate.pmax, 0.5)
        assert_allclose(estimate.projector, np.eye(2) / 2.0, atol=1e-12)

    def test_estimate_monotone_in_k(self):
        rng = np.random.default_rng(43)
        rho = random_density(rng, 6)
        estimates = [pointer_power(rho, k).pmax for k in range(1, 13)]
        assert np.all(np.diff(estimates) >= -1e-14)

    def test_geometric_error_bound(self):
        rng = np.random.default_rng(47)
        for _ in range(10):
            rho = random_density(rng, 8)
            top_two = np.sort(np.linalg.eigvalsh(rho))[::-1][:2]
            for k in (1, 5, 20):
                estimate = pointer_power(rho, k)
                error = top_two[0] - estimate.pmax
                assert -1e-10 <= error < (top_two[1] / top_two[0]) ** k * 8.0

    def test_large_k_projector_is_idempotent(self):
        estimate = pointer_power(np.diag([0.6, 0.25, 0.15]), 80)
        assert_allclose(np.trace(estimate.projector).real, 1.0, atol=1e-10)
        assert np.max(np.abs(estimate.projector @ estimate.projector - estimate.projector)) < 1e-6

    def test_converges_to_top_schmidt_probability(self):
        rng = np.random.default_rng(53)
        rho = random_density(rng, 5)
        spectrum = schmidt_spectrum(rho)
        estimate = pointer_power(rho, 60)
        gap_bound = (spectrum.probs[1] / spectrum.probs[0]) ** 60 * 5.0
        assert abs(estimate.pmax - spectrum.probs[0]) < max(gap_bound, 1e-12)
        assert_allclose(estimate.projector, spectrum.projectors[0], atol=1e-8)

    def test_rejects_non_positive_k(self):
        with pytest.raises(ValueError, match="k"):
            pointer_power(np.diag([0.7, 0.3]), 0)


class TestMasterEquationResidual:
    def test_small_residual_on_exact_trajectory(self):
        model = central_spin_model(2)
        residual = master_equation_residual(model, KET_0X, qcore.maximally_mixed(4), 0.5)
        assert residual < 1e-5

    def test_second_order_in_h(self):
        model = central_spin_model(2)
        rho_e = qcore.maximally_mixed(4)
        coarse = master_equation_residual(model, KET_0X, rho_e, 0.5, h=1e-3)
        fine = master_equation_residual(model, KET_0X, rho_e, 0.5, h=5e-4)
        assert 3.5 <= coarse / fine <= 4.5

    def test_reduces_to_von_neumann_without_coupling(self):
        model = spin_star_model(2, couplings=())
        residual = master_equation_residual(model, KET_0X, qcore.maximally_mixed(4), 0.5)
        assert residual < 1e-5

    def test_rejects_non_positive_h(self):
        model = central_spin_model(2)
        with pytest.raises(ValueError, match="h"):
            master_equation_residual(model, KET_0X, qcore.maximally_mixed(4), 0.5, h=0.0)
