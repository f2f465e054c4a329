"""
Environment service module.

This module provides the EnvironmentService class which builds the analytic
Gaussian and interference-structured spectral densities, ingests tabulated
CCD-row data and synthesizes such data for tests and reference files.
"""

import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.integrate import trapezoid

from structured_dephasing.exceptions import ConsistencyError
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.utils.numerics import uniform_grid

LOGGER = logging.getLogger(__name__)

MIN_TABULATED_SAMPLES = 16

Row = Tuple[float, float]


class EnvironmentService:
    """
    Service class for environment spectra.

    Args:
        envelope_half_width: Grid half-width around q0y, in units of 1/w0.
        envelope_spacing: Grid spacing, in units of 1/w0.
        modulation_periods: Modulation periods added beyond each tail of a
            structured spectrum.
        samples_per_half_period: Samples per half modulation period
            (pi / (2 dv) in q), giving spacing pi / (20 dv) at the default 10.
    """

    def __init__(
        self,
        envelope_half_width: float = 8.0,
        envelope_spacing: float = 0.02,
        modulation_periods: float = 3.0,
        samples_per_half_period: float = 10.0,
    ) -> None:
        self.envelope_half_width = envelope_half_width
        self.envelope_spacing = envelope_spacing
        self.modulation_periods = modulation_periods
        self.samples_per_half_period = samples_per_half_period

    def build_gaussian(
        self, params: EnvParams, spacing: Optional[float] = None
    ) -> EnvironmentSpectrum:
        """
        Build the unstructured single-beam spectrum.

        Any dv carried by ``params`` is ignored.

        Args:
            params: Environment parameters.
            spacing: Optional finer grid spacing in mm^-1.

        Returns:
            Normalized Gaussian spectrum spanning q0y +/- 8/w0.

        Raises:
            ValueError: If w0 is not positive.
        """
        self._check(params)
        w0 = params.w0
        default = self.envelope_spacing / w0
        step = default if spacing is None else min(spacing, default)
        q = uniform_grid(params.q0y, self.envelope_half_width / w0, step)
        density = self.shape(q, w0, params.q0y, 0.0)
        return self._normalized(q, density, params.without_structure())

    def build_structured(
        self, params: EnvParams, spacing: Optional[float] = None
    ) -> EnvironmentSpectrum:
        """
        Build the two-beam interference spectrum.

        density(q) ~ exp(-w0^2 (q - q0y)^2 / 2) * (1 - cos(2 dv q))

        Args:
            params: Environment parameters with dv > 0.
            spacing: Optional finer grid spacing in mm^-1.

        Returns:
            Normalized structured spectrum.

        Raises:
            ValueError: If the parameters are invalid or dv is zero.
        """
        self._check(params)
        if not params.is_structured:
            raise ValueError("build_structured needs dv > 0; use build_gaussian")
        w0, dv = params.w0, params.dv
        default = min(
            self.envelope_spacing / w0,
            math.pi / (2.0 * self.samples_per_half_period * dv),
        )
        step = default if spacing is None else min(spacing, default)
        # tail widening is capped so that dv -> 0 keeps a finite grid
        widening = min(
            self.modulation_periods * math.pi / dv, self.envelope_half_width / w0
        )
        q = uniform_grid(params.q0y, self.envelope_half_width / w0 + widening, step)
        density = self.shape(q, w0, params.q0y, dv)
        return self._normalized(q, density, params)

    def spectrum_for(
        self, params: EnvParams, spacing: Optional[float] = None
    ) -> EnvironmentSpectrum:
        """Build the Gaussian spectrum for dv == 0 and the structured one otherwise."""
        if params.is_structured:
            return self.build_structured(params, spacing=spacing)
        return self.build_gaussian(params, spacing=spacing)

    def refine(
        self, spectrum: EnvironmentSpectrum, spacing: float
    ) -> EnvironmentSpectrum:
        """
        Return ``spectrum`` on a grid no coarser than ``spacing``.

        Analytic spectra are rebuilt from their parameters; tabulated ones are
        linearly interpolated and renormalized.
        """
        if spectrum.spacing <= spacing:
            return spectrum
        if spectrum.meta is not None:
            return self.spectrum_for(spectrum.meta, spacing=spacing)
        q = uniform_grid(
            0.5 * (spectrum.q_grid[0] + spectrum.q_grid[-1]),
            0.5 * (spectrum.q_grid[-1] - spectrum.q_grid[0]),
            spacing,
        )
        density = np.interp(q, spectrum.q_grid, spectrum.density)
        return self._normalized(q, density, None)

    def ingest_tabulated(
        self, rows: Sequence[Row], baseline_window: float = 0.1
    ) -> EnvironmentSpectrum:
        """
        Clean a measured (q, counts) row into a normalized spectrum.

        The baseline is the mean of the medians of the outermost
        ``baseline_window`` fraction of samples on each side. It is
        subtracted, negatives are clipped to zero, and the result is
        resampled linearly onto a uniform grid with the same endpoints and
        sample count.

        Args:
            rows: (q, counts) samples with strictly increasing q.
            baseline_window: Tail fraction used for the baseline, in (0, 0.5).

        Returns:
            Normalized EnvironmentSpectrum without analytic provenance.

        Raises:
            ValueError: On too few samples, non-monotone q, non-finite
                values or a density that vanishes after cleaning.
        """
        if len(rows) < MIN_TABULATED_SAMPLES:
            raise ValueError(
                f"Tabulated spectrum needs at least {MIN_TABULATED_SAMPLES} samples, "
                f"got {len(rows)}"
            )
        if not 0 < baseline_window < 0.5:
            raise ValueError("baseline_window must lie in (0, 0.5)")
        data = np.asarray(rows, dtype=float)
        if data.ndim != 2 or data.shape[1] != 2:
            raise ValueError("Tabulated spectrum rows must be (q, counts) pairs")
        q, counts = data[:, 0], data[:, 1]
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(counts))):
            raise ValueError("Tabulated spectrum contains non-finite values")
        if np.any(np.diff(q) <= 0):
            raise ValueError("Tabulated q values must be strictly increasing")
        if not np.any(counts > 0):
            raise ValueError("Tabulated spectrum has no positive counts")

        tail = max(1, int(round(baseline_window * q.size)))
        baseline = 0.5 * (np.median(counts[:tail]) + np.median(counts[-tail:]))
        LOGGER.debug("Ingest baseline %.6g from %d samples per tail", baseline, tail)
        cleaned = np.clip(counts - baseline, 0.0, None)
        if not np.any(cleaned > 0):
            raise ValueError("Tabulated spectrum is zero after baseline removal")

        grid = np.linspace(q[0], q[-1], q.size)
        return self._normalized(grid, np.interp(grid, q, cleaned), None)

    def synthesize_counts(
        self,
        params: EnvParams,
        offset: float = 0.0,
        amplitude: float = 1.0,
        noise: float = 0.0,
        seed: int = 0,
        q_grid: Optional[np.ndarray] = None,
    ) -> List[Row]:
        """
        Generate a synthetic CCD row from the analytic spectrum.

        counts = amplitude * density / max(density) + offset + U(-noise, noise)

        Args:
            params: Environment parameters.
            offset: Constant background.
            amplitude: Peak height above the background.
            noise: Half-width of the seeded uniform additive noise.
            seed: Seed of the noise generator.
            q_grid: Sample positions; defaults to the analytic grid.

        Returns:
            List of (q, counts) rows.
        """
        spectrum = self.spectrum_for(params)
        q = spectrum.q_grid if q_grid is None else np.asarray(q_grid, dtype=float)
        shape = np.interp(q, spectrum.q_grid, spectrum.density, left=0.0, right=0.0)
        counts = amplitude * shape / spectrum.density.max() + offset
        if noise > 0:
            rng = np.random.default_rng(seed)
            counts = counts + rng.uniform(-noise, noise, size=q.size)
        return list(zip(q.tolist(), counts.tolist()))

    @staticmethod
    def shape(q: np.ndarray, w0: float, q0y: float, dv: float) -> np.ndarray:
        """Unnormalized analytic density on ``q``."""
        envelope = np.exp(-0.5 * (w0 * (q - q0y)) ** 2)
        if dv > 0:
            return envelope * (1.0 - np.cos(2.0 * dv * q))
        return envelope

    @staticmethod
    def _check(params: EnvParams) -> None:
        errors = params.validate()
        if errors:
            raise ValueError(f"Invalid environment parameters: {'; '.join(errors)}")

    @staticmethod
    def _normalized(
        q: np.ndarray, density: np.ndarray, meta: Optional[EnvParams]
    ) -> EnvironmentSpectrum:
        total = float(trapezoid(density, q))
        if not total > 0:
            raise ConsistencyError("Spectral density integrates to zero")
        spectrum = EnvironmentSpectrum(q_grid=q, density=density / total, meta=meta)
        errors = spectrum.validate()
        if errors:
            raise ConsistencyError(f"Built spectrum is invalid: {'; '.join(errors)}")
        return spectrum
