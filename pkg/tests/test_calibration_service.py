"""
Tests for the CalibrationService class.

This module contains tests for fitting q0y against N_D tables and for the
least-squares fit of the two-beam spectrum.
"""

import math

import numpy as np
import pytest
from structured_dephasing.exceptions import (
    ConsistencyError,
    DegenerateDenominatorError,
    NonConvergenceError,
)
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.services.calibration_service import CalibrationService
from structured_dephasing.services.environment_service import EnvironmentService

SEPARATIONS = (0.68, 0.70, 1.34, 1.84, 2.14)


@pytest.fixture
def calibration_service():
    """Create a CalibrationService instance."""
    return CalibrationService()


@pytest.fixture
def environment_service():
    return EnvironmentService()


@pytest.fixture
def spectrum_params():
    return EnvParams(w0=0.88, q0y=7.0, dv=2.14)


class TestModel:
    """Tests for the model N_D and the objective."""

    def test_model_nd_large_separation(self, calibration_service):
        """Test the N_D of well separated beams."""
        assert calibration_service.model_nd(0.88, 4.0, 7.0) == pytest.approx(
            0.5, abs=0.01
        )

    def test_objective_is_sum_of_squares(self, calibration_service):
        """Test the objective against the model N_D."""
        nd = calibration_service.model_nd(0.88, 2.14, 7.0)
        rows = [(2.14, nd + 0.1), (2.14, nd - 0.2)]
        assert calibration_service.objective(0.88, rows, 7.0) == pytest.approx(0.05)


class TestFitQ0y:
    """Tests for the q0y calibration."""

    def test_recovers_generating_momentum(self, calibration_service):
        """Test that a table generated at q0y = 7 is fitted back."""
        rows = [(dv, calibration_service.model_nd(0.88, dv, 7.0)) for dv in SEPARATIONS]
        result = calibration_service.fit_q0y(0.88, rows, n_scan=601)
        assert result.q0y_fit == pytest.approx(7.0, abs=0.05)
        assert result.residual < 1e-8
        assert [row[0] for row in result.table] == list(SEPARATIONS)
        for _, target, model in result.table:
            assert model == pytest.approx(target, abs=1e-4)

    def test_single_markovian_row(self, calibration_service):
        """Test that a lone N_D = 0 target is met exactly."""
        result = calibration_service.fit_q0y(0.88, [(0.70, 0.0)], n_scan=500)
        assert result.residual == pytest.approx(0.0, abs=1e-10)
        assert result.table[0][2] <= 1e-3
        assert math.cos(2.0 * 0.70 * result.q0y_fit) < -0.99

    def test_nested_scans_never_worsen(self, calibration_service):
        """Test that finer nested scans give a residual no larger than coarser ones."""
        rows = [(dv, calibration_service.model_nd(0.88, dv, 7.0)) for dv in SEPARATIONS]
        residuals = [
            calibration_service.fit_q0y(0.88, rows, n_scan=n).residual
            for n in (501, 1001, 3001)
        ]
        for coarse, fine in zip(residuals, residuals[1:]):
            assert fine <= coarse + 1e-12

    def test_sub_range(self, calibration_service):
        """Test that the fit stays inside a requested range."""
        rows = [(dv, calibration_service.model_nd(0.88, dv, 7.0)) for dv in SEPARATIONS]
        result = calibration_service.fit_q0y(0.88, rows, (5.0, 9.0), n_scan=500)
        assert 5.0 <= result.q0y_fit <= 9.0
        assert result.q0y_fit == pytest.approx(7.0, abs=0.05)

    def test_all_points_fail(self, calibration_service, monkeypatch):
        """Test that a scan without any finite residual raises ConsistencyError."""

        def failing(w0, rows, q0y):
            raise DegenerateDenominatorError("degenerate")

        monkeypatch.setattr(calibration_service, "objective", failing)
        with pytest.raises(ConsistencyError, match="Every q0y scan point failed"):
            calibration_service.fit_q0y(0.88, [(0.70, 0.0)], n_scan=500)

    @pytest.mark.parametrize(
        "rows, q0y_range, n_scan, message",
        [
            ([], (0.0, 30.0), 500, "must not be empty"),
            ([(0.7, 0.0)], (-1.0, 30.0), 500, "q0y range"),
            ([(0.7, 0.0)], (10.0, 5.0), 500, "q0y range"),
            ([(0.7, 0.0)], (0.0, 30.0), 100, "n_scan"),
            ([(0.0, 0.0)], (0.0, 30.0), 500, "separation must be positive"),
            ([(0.7, -0.1)], (0.0, 30.0), 500, "must be non-negative"),
        ],
    )
    def test_invalid_inputs(
        self, calibration_service, rows, q0y_range, n_scan, message
    ):
        """Test that malformed calibration inputs raise ValueError."""
        with pytest.raises(ValueError, match=message):
            calibration_service.fit_q0y(0.88, rows, q0y_range, n_scan)


class TestSelectMinimum:
    """Tests for the tie-breaking rule among scan minima."""

    def test_global_minimum(self, calibration_service):
        """Test that a clear global minimum is chosen."""
        residuals = np.array([2.0, 1.5, 1.0])
        assert calibration_service._select_minimum(residuals) == 2

    def test_smallest_momentum_wins_ties(self, calibration_service):
        """Test that an earlier minimum within 1 percent wins."""
        residuals = np.array([3.0, 1.005, 2.0, 1.0, 4.0])
        assert calibration_service._select_minimum(residuals) == 1

    def test_distant_minimum_ignored(self, calibration_service):
        """Test that an earlier minimum outside the tolerance loses."""
        residuals = np.array([3.0, 1.2, 2.0, 1.0, 4.0])
        assert calibration_service._select_minimum(residuals) == 3

    def test_tied_plateau_is_centred(self, calibration_service):
        """Test that a run of equal minima is represented by its middle point."""
        residuals = np.array([2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 2.0, 0.0, 3.0])
        assert calibration_service._select_minimum(residuals) == 3

    def test_run_within_band_keeps_lowest_point(self, calibration_service):
        """Test that a sloped run inside the tie band keeps its lowest point."""
        residuals = np.array([3.0, 1.004, 1.0, 1.003, 4.0])
        assert calibration_service._select_minimum(residuals) == 2

    def test_failed_points_ignored(self, calibration_service):
        """Test that infinite residuals never win."""
        residuals = np.array([np.inf, 0.5, np.inf])
        assert calibration_service._select_minimum(residuals) == 1


class TestFitSpectrum:
    """Tests for the two-beam spectrum fit."""

    def test_recovers_analytic_parameters(
        self, calibration_service, environment_service, spectrum_params
    ):
        """Test recovery from a guess about 10 percent off."""
        spectrum = environment_service.build_structured(spectrum_params)
        guess = EnvParams(w0=0.8, q0y=7.6, dv=2.3, phi=0.3)
        fitted = calibration_service.fit_spectrum(spectrum, guess)
        assert fitted.w0 == pytest.approx(0.88, rel=5e-3)
        assert fitted.dv == pytest.approx(2.14, rel=5e-3)
        assert fitted.q0y == pytest.approx(7.0, rel=5e-3)
        assert fitted.phi == 0.3
        assert fitted.residual is not None and fitted.residual >= 0.0

    def test_recovers_from_noisy_row(
        self, calibration_service, environment_service, spectrum_params
    ):
        """Test recovery from an offset row with 1 percent noise."""
        rows = environment_service.synthesize_counts(
            spectrum_params, offset=0.07, noise=0.01, seed=11
        )
        spectrum = environment_service.ingest_tabulated(rows)
        guess = EnvParams(w0=0.8, q0y=7.6, dv=2.3)
        fitted = calibration_service.fit_spectrum(spectrum, guess)
        assert fitted.w0 == pytest.approx(0.88, rel=0.03)
        assert fitted.dv == pytest.approx(2.14, rel=0.03)
        assert fitted.q0y == pytest.approx(7.0, rel=0.03)

    def test_flat_spectrum(self, calibration_service):
        """Test that a structureless spectrum raises NonConvergenceError."""
        q = np.linspace(-1.0, 1.0, 101)
        flat = EnvironmentSpectrum(q, np.full(101, 0.5))
        with pytest.raises(NonConvergenceError, match="flat"):
            calibration_service.fit_spectrum(flat, EnvParams(w0=0.88, dv=2.14))

    def test_sweep_limit(self, environment_service, spectrum_params):
        """Test that running out of sweeps raises NonConvergenceError."""
        service = CalibrationService(max_sweeps=1)
        spectrum = environment_service.build_structured(spectrum_params)
        guess = EnvParams(w0=0.8, q0y=7.6, dv=2.3)
        with pytest.raises(NonConvergenceError, match="did not converge"):
            service.fit_spectrum(spectrum, guess)

    def test_unstructured_guess(
        self, calibration_service, environment_service, spectrum_params
    ):
        """Test that a guess without dv raises ValueError."""
        spectrum = environment_service.build_structured(spectrum_params)
        with pytest.raises(ValueError, match="dv > 0"):
            calibration_service.fit_spectrum(spectrum, EnvParams(w0=0.88, q0y=7.0))

    def test_invalid_spectrum(self, calibration_service):
        """Test that an unnormalized spectrum raises ValueError."""
        q = np.linspace(-1.0, 1.0, 101)
        bad = EnvironmentSpectrum(q, np.ones(101))
        with pytest.raises(ValueError, match="Invalid fit input"):
            calibration_service.fit_spectrum(bad, EnvParams(w0=0.88, dv=2.14))
