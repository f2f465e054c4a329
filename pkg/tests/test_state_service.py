"""
Tests for the StateService class.

This module contains tests for state preparation, the trace distance,
the analyzer forward model and linear-inversion tomography.
"""

import math

import numpy as np
import pytest
from structured_dephasing.exceptions import TomographyError
from structured_dephasing.models.qubit_state import QubitState, WaveplateSetting
from structured_dephasing.services.state_service import (
    StateService,
    half_wave_plate,
    quarter_wave_plate,
)


@pytest.fixture
def state_service():
    """Create a StateService instance."""
    return StateService()


@pytest.fixture
def mixed_state():
    return QubitState(0.6, 0.4, 0.1 + 0.15j)


def _close(a, b, tol=1e-10):
    return (
        abs(a.pop_v - b.pop_v) < tol
        and abs(a.pop_h - b.pop_h) < tol
        and abs(a.coh - b.coh) < tol
    )


class TestWavePlates:
    """Tests for the Jones matrices."""

    @pytest.mark.parametrize("angle", [0.0, 22.5, 45.0, 17.0])
    def test_plates_are_unitary(self, angle):
        """Test that both wave plates are unitary at any angle."""
        for plate in (half_wave_plate(angle), quarter_wave_plate(angle)):
            np.testing.assert_allclose(plate @ plate.conj().T, np.eye(2), atol=1e-12)

    def test_half_wave_plate_at_zero(self):
        """Test that a HWP at 0 flips the sign of V."""
        np.testing.assert_allclose(half_wave_plate(0.0), np.diag([1.0, -1.0]))


class TestStatePreparation:
    """Tests for prepare_state."""

    def test_prepare_psi_plus(self, state_service):
        """Test that 67.5 degrees gives coh = +0.5."""
        state = state_service.prepare_state(67.5)
        assert state.pop_v == pytest.approx(0.5)
        assert state.coh == pytest.approx(0.5 + 0j)

    def test_prepare_psi_minus(self, state_service):
        """Test that 22.5 degrees gives coh = -0.5."""
        state = state_service.prepare_state(22.5)
        assert state.pop_h == pytest.approx(0.5)
        assert state.coh == pytest.approx(-0.5 + 0j)

    def test_prepare_horizontal(self, state_service):
        """Test that 45 degrees gives |H>."""
        state = state_service.prepare_state(45.0)
        assert state.pop_h == pytest.approx(1.0)
        assert abs(state.coh) == pytest.approx(0.0, abs=1e-15)

    def test_prepare_vertical(self, state_service):
        """Test that 0 degrees leaves |V> unchanged."""
        assert state_service.prepare_state(0.0).pop_v == pytest.approx(1.0)

    @pytest.mark.parametrize("angle", [0.0, 10.0, 33.3, 67.5, 100.0])
    def test_prepared_states_are_pure(self, state_service, angle):
        """Test that every prepared state is a valid pure state."""
        state = state_service.prepare_state(angle)
        assert state.validate() == []
        assert state.is_pure()

    def test_prepare_non_finite_angle(self, state_service):
        """Test that a non-finite angle raises ValueError."""
        with pytest.raises(ValueError):
            state_service.prepare_state(math.nan)

    def test_optimal_pair(self, state_service):
        """Test that the optimal pair is the prepared Psi+/Psi- pair."""
        plus, minus = state_service.optimal_pair()
        assert _close(plus, state_service.prepare_state(67.5))
        assert _close(minus, state_service.prepare_state(22.5))


class TestTraceDistance:
    """Tests for the trace distance."""

    def test_optimal_pair_distance(self, state_service):
        """Test that Psi+ and Psi- are perfectly distinguishable."""
        assert state_service.trace_distance(*state_service.optimal_pair()) == 1.0

    def test_identical_states(self, state_service, mixed_state):
        """Test that a state has distance 0 to itself."""
        assert state_service.trace_distance(mixed_state, mixed_state) == 0.0

    def test_symmetry(self, state_service, mixed_state):
        """Test that the distance is symmetric."""
        other = QubitState(0.5, 0.5, 0.2j)
        assert state_service.trace_distance(
            mixed_state, other
        ) == state_service.trace_distance(other, mixed_state)

    def test_matches_eigenvalue_definition(self, state_service, mixed_state):
        """Test the closed form against half the trace norm of the difference."""
        other = QubitState(0.3, 0.7, -0.2 + 0.1j)
        diff = mixed_state.matrix() - other.matrix()
        expected = 0.5 * np.sum(np.abs(np.linalg.eigvalsh(diff)))
        assert state_service.trace_distance(mixed_state, other) == pytest.approx(
            expected, abs=1e-14
        )

    def test_dephased_pair_distance_equals_kappa(self, state_service):
        """Test that dephasing the optimal pair by kappa gives D = |kappa|."""
        kappa = 0.3 * np.exp(0.4j)
        plus = QubitState(0.5, 0.5, 0.5 * kappa)
        minus = QubitState(0.5, 0.5, -0.5 * kappa)
        assert state_service.trace_distance(plus, minus) == pytest.approx(0.3)


class TestBlochVector:
    """Tests for Bloch coordinates."""

    def test_psi_plus(self, state_service):
        """Test that Psi+ lies on the +x axis."""
        plus, _ = state_service.optimal_pair()
        assert state_service.bloch_vector(plus) == (1.0, 0.0, 0.0)

    def test_vertical(self, state_service):
        """Test that |V> lies on the +z axis."""
        assert state_service.bloch_vector(QubitState(1.0, 0.0)) == (0.0, 0.0, 1.0)

    def test_distance_is_half_bloch_separation(self, state_service, mixed_state):
        """Test D = |r1 - r2| / 2."""
        other = QubitState(0.3, 0.7, -0.2 + 0.1j)
        r1 = np.array(state_service.bloch_vector(mixed_state))
        r2 = np.array(state_service.bloch_vector(other))
        assert state_service.trace_distance(mixed_state, other) == pytest.approx(
            0.5 * np.linalg.norm(r1 - r2)
        )


class TestAnalyzer:
    """Tests for the tomography forward model."""

    def test_canonical_projectors(self, state_service):
        """Test that the canonical settings project onto H, V, D and circular."""
        h, v, d, c = state_service.canonical_settings()
        s = 1.0 / math.sqrt(2.0)
        expected = {
            h: np.array([1.0, 0.0]),
            v: np.array([0.0, 1.0]),
            d: np.array([s, s]),
            c: np.array([s, -1j * s]),
        }
        for setting, vector in expected.items():
            projector = state_service.analyzer_projector(setting)
            np.testing.assert_allclose(
                projector, np.outer(vector, vector.conj()), atol=1e-12
            )

    def test_projector_is_rank_one(self, state_service):
        """Test that an arbitrary setting gives a rank-one projector."""
        projector = state_service.analyzer_projector(WaveplateSetting(11.0, 37.0))
        np.testing.assert_allclose(projector @ projector, projector, atol=1e-12)
        assert np.trace(projector).real == pytest.approx(1.0)

    def test_intensities_of_psi_plus(self, state_service):
        """Test the canonical intensities of the diagonal state."""
        plus, _ = state_service.optimal_pair()
        values = [i for _, i in state_service.measure_intensities(plus)]
        np.testing.assert_allclose(values, [0.5, 0.5, 1.0, 0.5], atol=1e-12)

    def test_intensities_of_psi_minus(self, state_service):
        """Test that Psi- is blocked at the diagonal setting."""
        _, minus = state_service.optimal_pair()
        setting = state_service.canonical_settings()[2]
        assert state_service.tomography_intensity(minus, setting) == pytest.approx(
            0.0, abs=1e-12
        )

    def test_invalid_setting(self, state_service):
        """Test that a non-finite setting raises ValueError."""
        with pytest.raises(ValueError, match="Invalid waveplate setting"):
            state_service.analyzer_projector(WaveplateSetting(math.inf))


class TestTomography:
    """Tests for linear-inversion tomography."""

    def test_round_trip(self, state_service, mixed_state):
        """Test that exact intensities reconstruct the state."""
        measured = state_service.measure_intensities(mixed_state)
        assert _close(state_service.tomography_reconstruct(measured), mixed_state)

    def test_round_trip_pure_state(self, state_service):
        """Test reconstruction of a pure state."""
        state = state_service.prepare_state(30.0)
        measured = state_service.measure_intensities(state)
        assert _close(state_service.tomography_reconstruct(measured), state)

    def test_overcomplete_settings(self, state_service, mixed_state):
        """Test least squares with more than four settings."""
        settings = state_service.canonical_settings() + [WaveplateSetting(11.0, 37.0)]
        measured = state_service.measure_intensities(mixed_state, settings)
        assert _close(state_service.tomography_reconstruct(measured), mixed_state)

    def test_flat_intensities_give_mixed_state(self, state_service):
        """Test that all intensities at 0.5 give the maximally mixed state."""
        measured = [(s, 0.5) for s in state_service.canonical_settings()]
        state = state_service.tomography_reconstruct(measured)
        assert _close(state, QubitState(0.5, 0.5))

    def test_perturbed_intensities(self, state_service, mixed_state):
        """Test that 1e-3 intensity errors stay within 5e-3 in trace distance."""
        rng = np.random.default_rng(7)
        measured = [
            (s, i + rng.uniform(-1e-3, 1e-3))
            for s, i in state_service.measure_intensities(mixed_state)
        ]
        state = state_service.tomography_reconstruct(measured)
        assert state.validate() == []
        assert state_service.trace_distance(state, mixed_state) < 5e-3

    def test_positivity_repair(self, state_service):
        """Test that an unphysical estimate is clipped to a valid state."""
        h, v, d, c = state_service.canonical_settings()
        measured = [(h, 0.5), (v, 0.5), (d, 1.1), (c, 0.5)]
        state = state_service.tomography_reconstruct(measured)
        assert state.validate() == []
        assert state.is_pure(tolerance=1e-9)

    def test_too_few_settings(self, state_service, mixed_state):
        """Test that fewer than four settings raise TomographyError."""
        measured = state_service.measure_intensities(mixed_state)[:3]
        with pytest.raises(TomographyError, match="at least 4"):
            state_service.tomography_reconstruct(measured)

    def test_incomplete_settings(self, state_service):
        """Test that repeated settings are not informationally complete."""
        measured = [(WaveplateSetting(0.0, 0.0), 0.5)] * 4
        with pytest.raises(TomographyError, match="informationally complete"):
            state_service.tomography_reconstruct(measured)
