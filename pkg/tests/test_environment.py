"""
Tests for the EnvParams, EnvironmentSpectrum and Kappa models.
"""

import math

import numpy as np
import pytest
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.models.kappa import Kappa


def _box_spectrum(meta=None, n=101):
    q = np.linspace(-1.0, 1.0, n)
    return EnvironmentSpectrum(q, np.full(n, 0.5), meta=meta)


class TestEnvParams:
    """Tests for the EnvParams model."""

    def test_defaults_describe_gaussian(self):
        """Test that the default separation is the unstructured case."""
        params = EnvParams(w0=0.88)
        assert params.dv == 0.0
        assert not params.is_structured

    def test_structured(self):
        """Test that a positive dv marks a structured environment."""
        assert EnvParams(w0=0.88, q0y=7.0, dv=2.14).is_structured

    def test_validate_valid_params(self):
        """Test that valid parameters pass validation."""
        assert EnvParams(w0=0.88, q0y=-3.0, dv=2.14, phi=1.0).validate() == []

    def test_validate_non_positive_waist(self):
        """Test validation fails with w0 <= 0."""
        for w0 in (0.0, -1.0):
            errors = EnvParams(w0=w0).validate()
            assert any("w0" in err for err in errors)

    def test_validate_negative_separation(self):
        """Test validation fails with dv < 0."""
        errors = EnvParams(w0=0.88, dv=-0.1).validate()
        assert any("dv" in err for err in errors)

    def test_validate_non_finite(self):
        """Test validation reports every non-finite field."""
        errors = EnvParams(w0=math.inf, q0y=math.nan).validate()
        assert errors == ["w0 must be finite", "q0y must be finite"]

    def test_without_structure(self):
        """Test that removing the structure keeps w0, q0y and phi."""
        params = EnvParams(w0=0.88, q0y=7.0, dv=2.14, phi=0.3)
        assert params.without_structure() == EnvParams(0.88, 7.0, 0.0, 0.3)

    def test_to_dict_without_residual(self):
        """Test that the residual key only appears for fitted parameters."""
        data = EnvParams(w0=0.88, q0y=7.0, dv=2.14).to_dict()
        assert data == {"w0_mm": 0.88, "q0y_mm_inv": 7.0, "dv_mm": 2.14, "phi_rad": 0.0}

    def test_dict_round_trip_with_residual(self):
        """Test serialization of fitted parameters."""
        params = EnvParams(w0=0.88, q0y=7.0, dv=2.14, residual=1e-4)
        assert EnvParams.from_dict(params.to_dict()) == params


class TestEnvironmentSpectrum:
    """Tests for the EnvironmentSpectrum model."""

    def test_arrays_are_read_only(self):
        """Test that the spectrum cannot be modified in place."""
        spectrum = _box_spectrum()
        with pytest.raises(ValueError):
            spectrum.density[0] = 1.0

    def test_arrays_are_copied(self):
        """Test that later changes to the input arrays do not leak in."""
        density = np.full(11, 0.5)
        spectrum = EnvironmentSpectrum(np.linspace(-1, 1, 11), density)
        density[0] = 9.0
        assert spectrum.density[0] == 0.5

    def test_spacing_and_integral(self):
        """Test the grid spacing and trapezoidal integral."""
        spectrum = _box_spectrum()
        assert spectrum.spacing == pytest.approx(0.02)
        assert spectrum.integral() == pytest.approx(1.0)

    def test_validate_normalized_spectrum(self):
        """Test that a normalized uniform spectrum passes validation."""
        assert _box_spectrum().validate() == []

    def test_validate_not_normalized(self):
        """Test validation fails for a density that does not integrate to 1."""
        q = np.linspace(-1.0, 1.0, 11)
        errors = EnvironmentSpectrum(q, np.ones(11)).validate()
        assert any("integrate to 1" in err for err in errors)

    def test_validate_negative_density(self):
        """Test validation fails with negative density values."""
        q = np.linspace(0.0, 1.0, 3)
        errors = EnvironmentSpectrum(q, [2.0, -0.5, 2.0]).validate()
        assert any("non-negative" in err for err in errors)

    def test_validate_decreasing_grid(self):
        """Test validation fails for a non-increasing grid."""
        q = np.linspace(1.0, -1.0, 11)
        errors = EnvironmentSpectrum(q, np.full(11, 0.5)).validate()
        assert any("strictly increasing" in err for err in errors)

    def test_validate_non_uniform_grid(self):
        """Test validation fails for an irregular grid."""
        q = np.array([0.0, 0.1, 0.3, 0.4])
        errors = EnvironmentSpectrum(q, np.full(4, 2.5)).validate()
        assert any("uniformly spaced" in err for err in errors)

    def test_validate_shape_mismatch(self):
        """Test validation fails when the arrays differ in length."""
        errors = EnvironmentSpectrum(np.linspace(0, 1, 5), np.ones(4)).validate()
        assert errors == ["Density and momentum grid must have the same length"]

    def test_validate_too_short(self):
        """Test validation fails with a single sample."""
        errors = EnvironmentSpectrum([0.0], [1.0]).validate()
        assert len(errors) == 1

    def test_validate_unresolved_modulation(self):
        """Test validation fails when the grid is too coarse for dv."""
        meta = EnvParams(w0=0.88, dv=2.14)
        errors = _box_spectrum(meta=meta, n=11).validate()
        assert any("resolve" in err for err in errors)

    def test_validate_resolved_modulation(self):
        """Test that a fine enough grid passes for a structured spectrum."""
        meta = EnvParams(w0=0.88, dv=2.14)
        assert _box_spectrum(meta=meta, n=201).validate() == []

    def test_rows(self):
        """Test the spectrum as (q, density) pairs."""
        rows = _box_spectrum(n=3).rows()
        assert rows == [(-1.0, 0.5), (0.0, 0.5), (1.0, 0.5)]

    def test_to_dict(self):
        """Test converting a spectrum to a dictionary."""
        data = _box_spectrum(meta=EnvParams(w0=1.0), n=3).to_dict()
        assert data["q_mm_inv"] == [-1.0, 0.0, 1.0]
        assert data["density"] == [0.5, 0.5, 0.5]
        assert data["meta"]["w0_mm"] == 1.0


class TestKappa:
    """Tests for the Kappa model."""

    def test_magnitude(self):
        """Test the modulus of the decoherence factor."""
        assert Kappa(0.3 + 0.4j, dc=1.0).magnitude == pytest.approx(0.5)

    def test_validate_physical(self):
        """Test that |kappa| <= 1 passes validation."""
        assert Kappa(1.0 + 0j).validate() == []

    def test_validate_within_tolerance(self):
        """Test that rounding noise above 1 is tolerated."""
        assert Kappa(1.0 + 1e-12 + 0j).validate() == []

    def test_validate_unphysical(self):
        """Test validation fails for |kappa| > 1."""
        errors = Kappa(1.1 + 0j).validate()
        assert any("exceeds 1" in err for err in errors)

    def test_validate_non_finite(self):
        """Test validation fails for non-finite values."""
        errors = Kappa(complex(math.nan, 0.0), dc=math.inf).validate()
        assert len(errors) == 2

    def test_to_dict(self):
        """Test converting kappa to a dictionary."""
        assert Kappa(0.1 - 0.2j, dc=2.0).to_dict() == {
            "dc_mm": 2.0,
            "re": 0.1,
            "im": -0.2,
        }
