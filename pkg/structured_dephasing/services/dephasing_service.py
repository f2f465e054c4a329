"""
Dephasing service module.

This module provides the DephasingService class which evaluates the
decoherence function kappa(dc) by direct quadrature over a spectrum and by
the closed-form magnitude of the two-beam environment, and applies the
resulting dephasing channel to qubit states.
"""

import logging
import math
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import trapezoid

from structured_dephasing.exceptions import ConsistencyError, DegenerateDenominatorError
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.models.kappa import MAGNITUDE_TOLERANCE, Kappa
from structured_dephasing.models.qubit_state import QubitState
from structured_dephasing.services.environment_service import EnvironmentService

LOGGER = logging.getLogger(__name__)

Source = Union[EnvParams, EnvironmentSpectrum]

# log(t) above which the radicand is only ever handled in log space
_LOG_SPACE_THRESHOLD = 300.0


class DephasingService:
    """
    Service class for the decoherence function and the dephasing channel.

    Args:
        environment_service: Used to build spectra for quadrature and to
            refine grids that under-resolve the integrand.
        degenerate_threshold: Smallest |1 - exp(-2 dv^2/w0^2) cos(2 dv q0y)|
            accepted by the closed form.
        overflow_guard: cosh argument above which log cosh is evaluated
            asymptotically.
        radicand_tolerance: Relative size of negative radicands that are
            treated as rounding noise.
        samples_per_oscillation: Grid points per half period pi/|dc| of the
            quadrature integrand.
        chunk_size: Displacements evaluated per vectorized quadrature block.
    """

    def __init__(
        self,
        environment_service: Optional[EnvironmentService] = None,
        degenerate_threshold: float = 1e-6,
        overflow_guard: float = 700.0,
        radicand_tolerance: float = 1e-12,
        samples_per_oscillation: float = 10.0,
        chunk_size: int = 256,
    ) -> None:
        self.environment_service = environment_service or EnvironmentService()
        self.degenerate_threshold = degenerate_threshold
        self.overflow_guard = overflow_guard
        self.radicand_tolerance = radicand_tolerance
        self.samples_per_oscillation = samples_per_oscillation
        self.chunk_size = chunk_size

    def kappa_quadrature(
        self, env: EnvironmentSpectrum, dc: float, phi: float = 0.0
    ) -> Kappa:
        """
        Decoherence function by trapezoidal quadrature.

        kappa(dc) = integral of density(q) * exp(i (2 q dc + phi)) dq

        Args:
            env: Normalized spectrum.
            dc: Displacement in mm.
            phi: Coupling phase in radians.

        Returns:
            The complex Kappa at dc.
        """
        if not math.isfinite(dc):
            raise ValueError("dc must be finite")
        value = self.kappa_quadrature_many(env, np.array([dc]), phi)[0]
        return Kappa(value=complex(value), dc=float(dc))

    def kappa_quadrature_many(
        self, env: EnvironmentSpectrum, dcs: Sequence[float], phi: float = 0.0
    ) -> np.ndarray:
        """
        Vectorized quadrature over an array of displacements.

        The grid is refined once, for the largest |dc|, when its spacing
        exceeds pi / (samples_per_oscillation * |dc|).
        """
        errors = env.validate()
        if errors:
            raise ValueError(f"Invalid environment spectrum: {'; '.join(errors)}")
        dcs = np.asarray(dcs, dtype=float)
        if dcs.size == 0:
            return np.zeros(0, dtype=complex)

        reach = float(np.max(np.abs(dcs)))
        if reach > 0:
            limit = math.pi / (self.samples_per_oscillation * reach)
            if env.spacing > limit:
                LOGGER.debug(
                    "Refining spectrum grid from %.4g to %.4g for |dc| = %.4g",
                    env.spacing,
                    limit,
                    reach,
                )
                env = self.environment_service.refine(env, limit)

        q, density = env.q_grid, env.density
        values = np.empty(dcs.size, dtype=complex)
        for start in range(0, dcs.size, self.chunk_size):
            block = dcs[start : start + self.chunk_size]
            integrand = density * np.exp(1j * (2.0 * np.outer(block, q) + phi))
            values[start : start + block.size] = trapezoid(integrand, q, axis=1)
        return values

    def kappa_closed_form(self, params: EnvParams, dc: float) -> float:
        """
        Closed-form |kappa(dc)| of the two-beam environment.

        With a = exp(-2 dv^2/w0^2), c = cos(2 dv q0y) and
        h = cosh(4 dc dv/w0^2)::

            |kappa| = exp(-2 dc^2/w0^2) / (1 - a c)
                      * sqrt(a^2 (c^2 + h^2 - 1) - 2 a c h + 1)

        Args:
            params: Environment parameters.
            dc: Displacement in mm.

        Returns:
            |kappa(dc)| clamped to [0, 1].

        Raises:
            DegenerateDenominatorError: If |1 - a c| <= degenerate_threshold.
            ConsistencyError: If the radicand is clearly negative.
        """
        if not math.isfinite(dc):
            raise ValueError("dc must be finite")
        return float(self.closed_form_many(params, np.array([dc]))[0])

    def closed_form_many(self, params: EnvParams, dcs: Sequence[float]) -> np.ndarray:
        """Vectorized closed-form |kappa| over an array of displacements."""
        errors = params.validate()
        if errors:
            raise ValueError(f"Invalid environment parameters: {'; '.join(errors)}")
        w2 = params.w0 * params.w0
        log_a = -2.0 * params.dv * params.dv / w2
        a = math.exp(log_a)
        c = math.cos(2.0 * params.dv * params.q0y)
        denominator = 1.0 - a * c
        if abs(denominator) <= self.degenerate_threshold:
            raise DegenerateDenominatorError(
                f"Closed form is degenerate for {params}: "
                f"|1 - a c| = {abs(denominator):.3g}"
            )

        dcs = np.asarray(dcs, dtype=float)
        x = np.abs(4.0 * dcs * params.dv / w2)
        log_g = -2.0 * dcs * dcs / w2
        inside = x <= self.overflow_guard
        capped = np.minimum(x, self.overflow_guard)
        log_h = np.where(
            inside,
            np.log(np.cosh(capped)),
            x - math.log(2.0) + np.log1p(np.exp(-2.0 * x)),
        )
        log_t = log_a + log_h

        result = np.empty(dcs.size, dtype=float)
        direct = log_t < _LOG_SPACE_THRESHOLD
        if np.any(direct):
            # a (h - 1) via sinh keeps F = (1 - a c)^2 exactly at dc = 0
            excess = np.where(
                inside[direct],
                2.0 * a * np.sinh(0.5 * capped[direct]) ** 2,
                np.exp(np.minimum(log_t[direct], _LOG_SPACE_THRESHOLD)) - a,
            )
            radicand = denominator**2 + excess * (excess + 2.0 * a - 2.0 * c)
            radicand = self._clamp_radicand(radicand, excess + a)
            result[direct] = np.exp(log_g[direct]) * np.sqrt(radicand) / denominator
        if not np.all(direct):
            big = log_t[~direct]
            rest = 1.0 + a * a * (c * c - 1.0)
            log_radicand = 2.0 * big + np.log1p(
                -2.0 * c * np.exp(-big) + rest * np.exp(-2.0 * big)
            )
            result[~direct] = np.exp(
                log_g[~direct] + 0.5 * log_radicand - math.log(denominator)
            )
        return np.clip(result, 0.0, 1.0)

    def kappa_magnitudes(self, source: Source, dcs: Sequence[float]) -> np.ndarray:
        """
        |kappa| over a displacement grid with automatic engine selection.

        Structured EnvParams use the closed form and fall back to quadrature
        when its denominator is degenerate. Gaussian parameters and spectra
        use quadrature.
        """
        if isinstance(source, EnvParams):
            if source.is_structured:
                try:
                    return self.closed_form_many(source, dcs)
                except DegenerateDenominatorError as e:
                    LOGGER.info("%s; rerouting to quadrature", e)
            spectrum = self.environment_service.spectrum_for(source)
            return np.abs(self.kappa_quadrature_many(spectrum, dcs, source.phi))
        return np.abs(self.kappa_quadrature_many(source, dcs))

    def evolve_state(self, rho0: QubitState, kappa: Kappa) -> QubitState:
        """
        Apply the dephasing channel: populations kept, coh multiplied by kappa.

        Args:
            rho0: Initial state.
            kappa: Decoherence factor.

        Returns:
            The dephased state.

        Raises:
            ValueError: If the state is invalid or |kappa| > 1.
        """
        errors = rho0.validate()
        if errors:
            raise ValueError(f"Invalid qubit state: {'; '.join(errors)}")
        if kappa.magnitude > 1.0 + MAGNITUDE_TOLERANCE:
            raise ValueError(f"|kappa| = {kappa.magnitude!r} exceeds 1 (unphysical)")
        return QubitState(rho0.pop_v, rho0.pop_h, rho0.coh * kappa.value)

    def evolve_pair(
        self, pair: Tuple[QubitState, QubitState], kappa: Kappa
    ) -> Tuple[QubitState, QubitState]:
        """Apply the same dephasing channel to both members of a pair."""
        return self.evolve_state(pair[0], kappa), self.evolve_state(pair[1], kappa)

    def _clamp_radicand(self, radicand: np.ndarray, t: np.ndarray) -> np.ndarray:
        floor = -self.radicand_tolerance * (1.0 + t * t)
        if np.any(radicand < floor):
            worst = float(np.min(radicand))
            raise ConsistencyError(f"Closed-form radicand is negative ({worst:.3g})")
        return np.maximum(radicand, 0.0)
