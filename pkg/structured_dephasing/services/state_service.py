"""
State service module.

This module provides the StateService class: state preparation from wave-plate
angles, the trace distance, the optimal Psi+/Psi- pair and an idealized
polarization-tomography forward model with its linear inversion.

Jones matrices are written in the (|H>, |V>) basis; QubitState stores the
density matrix in the (|V>, |H>) basis.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from structured_dephasing.exceptions import TomographyError
from structured_dephasing.models.qubit_state import QubitState, WaveplateSetting

LOGGER = logging.getLogger(__name__)

Measurement = Tuple[WaveplateSetting, float]

_CANONICAL_SETTINGS = (
    WaveplateSetting(0.0, 0.0),
    WaveplateSetting(45.0, 0.0),
    WaveplateSetting(22.5, 0.0),
    WaveplateSetting(0.0, 45.0),
)


def half_wave_plate(theta_deg: float) -> np.ndarray:
    """Jones matrix of a half-wave plate with fast axis at theta from H."""
    c = math.cos(math.radians(2.0 * theta_deg))
    s = math.sin(math.radians(2.0 * theta_deg))
    return np.array([[c, s], [s, -c]], dtype=complex)


def quarter_wave_plate(theta_deg: float) -> np.ndarray:
    """Jones matrix of a quarter-wave plate with fast axis at theta from H."""
    c = math.cos(math.radians(theta_deg))
    s = math.sin(math.radians(theta_deg))
    off = (1 - 1j) * s * c
    return np.array([[c * c + 1j * s * s, off], [off, s * s + 1j * c * c]])


class StateService:
    """
    Service class for qubit state algebra and tomography.

    Args:
        positivity_tolerance: Largest negative eigenvalue a reconstructed
            state may have before it is repaired by eigenvalue clipping.
    """

    def __init__(self, positivity_tolerance: float = 1e-9) -> None:
        self.positivity_tolerance = positivity_tolerance

    def prepare_state(self, hwp_deg: float) -> QubitState:
        """
        Prepare the pure state obtained by sending |V> through a HWP.

        The output is linearly polarized at 2*hwp_deg - 90 degrees from H.

        Args:
            hwp_deg: Half-wave-plate angle in degrees.

        Returns:
            The prepared pure QubitState.

        Raises:
            ValueError: If the angle is not finite.
        """
        if not math.isfinite(hwp_deg):
            raise ValueError("HWP angle must be finite")
        angle = math.radians(2.0 * hwp_deg - 90.0)
        amp_h, amp_v = math.cos(angle), math.sin(angle)
        return QubitState(amp_v * amp_v, amp_h * amp_h, complex(amp_v * amp_h))

    def optimal_pair(self) -> Tuple[QubitState, QubitState]:
        """Return (|Psi+><Psi+|, |Psi-><Psi-|) with coh = +0.5 and -0.5."""
        return QubitState(0.5, 0.5, 0.5 + 0j), QubitState(0.5, 0.5, -0.5 + 0j)

    def trace_distance(self, a: QubitState, b: QubitState) -> float:
        """
        Trace distance between two qubit states.

        Uses the closed-form eigenvalues of the 2x2 Hermitian difference.
        """
        d_vv = a.pop_v - b.pop_v
        d_hh = a.pop_h - b.pop_h
        d_coh = a.coh - b.coh
        half_trace = 0.5 * (d_vv + d_hh)
        radius = math.hypot(0.5 * (d_vv - d_hh), abs(d_coh))
        return 0.5 * (abs(half_trace + radius) + abs(half_trace - radius))

    def bloch_vector(self, rho: QubitState) -> Tuple[float, float, float]:
        """Bloch coordinates (x, y, z) with z = pop_v - pop_h."""
        return (2.0 * rho.coh.real, -2.0 * rho.coh.imag, rho.pop_v - rho.pop_h)

    def canonical_settings(self) -> List[WaveplateSetting]:
        """Analyzer settings projecting onto H, V, diagonal and circular light."""
        return list(_CANONICAL_SETTINGS)

    def analyzer_projector(self, setting: WaveplateSetting) -> np.ndarray:
        """
        Projector, in the (|H>, |V>) basis, of the transmitted PBS port.

        Light crosses the HWP, then the QWP, then the PBS.
        """
        errors = setting.validate()
        if errors:
            raise ValueError(f"Invalid waveplate setting: {'; '.join(errors)}")
        optics = quarter_wave_plate(setting.qwp_deg) @ half_wave_plate(setting.hwp_deg)
        analyzed = optics.conj().T @ np.array([1.0, 0.0], dtype=complex)
        return np.outer(analyzed, analyzed.conj())

    def tomography_intensity(self, rho: QubitState, setting: WaveplateSetting) -> float:
        """
        Normalized intensity transmitted by the analyzer, Tr(rho P).

        Args:
            rho: State under test.
            setting: Analyzer wave-plate setting.

        Returns:
            Intensity in [0, 1].
        """
        projector = self.analyzer_projector(setting)
        rho_hv = np.array(
            [[rho.pop_h, rho.coh.conjugate()], [rho.coh, rho.pop_v]], dtype=complex
        )
        return float(np.real(np.trace(rho_hv @ projector)))

    def measure_intensities(
        self,
        rho: QubitState,
        settings: Sequence[WaveplateSetting] = _CANONICAL_SETTINGS,
    ) -> List[Measurement]:
        """Forward model over a list of settings."""
        return [(s, self.tomography_intensity(rho, s)) for s in settings]

    def tomography_reconstruct(self, intensities: Sequence[Measurement]) -> QubitState:
        """
        Linear-inversion tomography.

        Solves the least-squares problem for (pop_v, pop_h, Re coh, Im coh),
        repairs positivity by eigenvalue clipping and renormalizes the trace.

        Args:
            intensities: (setting, intensity) pairs.

        Returns:
            The reconstructed QubitState.

        Raises:
            TomographyError: If the settings are not informationally complete.
        """
        if len(intensities) < 4:
            raise TomographyError(
                f"Tomography needs at least 4 settings, got {len(intensities)}"
            )
        design = np.array(
            [self._design_row(self.analyzer_projector(s)) for s, _ in intensities]
        )
        if np.linalg.matrix_rank(design) < 4:
            raise TomographyError("Analyzer settings are not informationally complete")
        measured = np.array([float(value) for _, value in intensities])
        solution, *_ = np.linalg.lstsq(design, measured, rcond=None)
        pop_v, pop_h, coh_re, coh_im = solution

        rho = np.array(
            [[pop_v, coh_re + 1j * coh_im], [coh_re - 1j * coh_im, pop_h]],
            dtype=complex,
        )
        eigenvalues, eigenvectors = np.linalg.eigh(rho)
        if eigenvalues.min() < -self.positivity_tolerance:
            LOGGER.debug("Clipping reconstruction eigenvalue %.3g", eigenvalues.min())
            eigenvalues = np.clip(eigenvalues, 0.0, None)
            rho = (eigenvectors * eigenvalues) @ eigenvectors.conj().T

        trace = float(np.real(np.trace(rho)))
        if trace <= 0:
            raise TomographyError("Reconstructed state has non-positive trace")
        return QubitState.from_matrix(rho / trace)

    @staticmethod
    def _design_row(projector: np.ndarray) -> List[float]:
        p_hv = projector[0, 1]
        return [
            float(np.real(projector[1, 1])),
            float(np.real(projector[0, 0])),
            2.0 * float(np.real(p_hv)),
            -2.0 * float(np.imag(p_hv)),
        ]
