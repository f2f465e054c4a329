"""
Qubit state model module.

This module defines the QubitState class, the 2x2 density matrix of the
polarization qubit written in the (|V>, |H>) basis, and the WaveplateSetting
class describing a half-wave-plate / quarter-wave-plate pair.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List

import numpy as np

TRACE_TOLERANCE = 1e-12
POSITIVITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class QubitState:
    """
    Represents a polarization qubit density matrix.

    The state is stored through its independent entries::

        rho = [[pop_v,        coh  ],
               [conj(coh),    pop_h]]

    Attributes:
        pop_v (float): Population of |V>
        pop_h (float): Population of |H>
        coh (complex): Off-diagonal element <V|rho|H>

    Example:
        >>> state = QubitState(0.5, 0.5, 0.5 + 0j)
        >>> state.validate()
        []
        >>> state.is_pure()
        True
    """

    pop_v: float
    pop_h: float
    coh: complex = 0j

    def validate(self) -> List[str]:
        """
        Validate the density-matrix invariants.

        Checks unit trace, non-negative populations and positive
        semidefiniteness (|coh|^2 <= pop_v * pop_h).

        Returns:
            List of validation error messages. Empty list if valid.
        """
        errors = []

        values = (self.pop_v, self.pop_h, self.coh.real, self.coh.imag)
        if not all(math.isfinite(v) for v in values):
            errors.append("State entries must be finite")
            return errors

        if abs(self.pop_v + self.pop_h - 1.0) > TRACE_TOLERANCE:
            errors.append(
                f"Populations must sum to 1 (got {self.pop_v + self.pop_h!r})"
            )

        if self.pop_v < -TRACE_TOLERANCE or self.pop_h < -TRACE_TOLERANCE:
            errors.append("Populations must be non-negative")

        if abs(self.coh) ** 2 > self.pop_v * self.pop_h + POSITIVITY_TOLERANCE:
            errors.append("Coherence exceeds the bound |coh|^2 <= pop_v * pop_h")

        return errors

    def is_pure(self, tolerance: float = 1e-12) -> bool:
        """Return True when |coh|^2 equals pop_v * pop_h within tolerance."""
        return abs(abs(self.coh) ** 2 - self.pop_v * self.pop_h) <= tolerance

    def matrix(self) -> np.ndarray:
        """Return the density matrix in the (|V>, |H>) basis."""
        return np.array(
            [[self.pop_v, self.coh], [np.conj(self.coh), self.pop_h]],
            dtype=complex,
        )

    @classmethod
    def from_matrix(cls, rho: np.ndarray) -> "QubitState":
        """
        Create a QubitState from a 2x2 matrix in the (|V>, |H>) basis.

        Only the upper triangle's off-diagonal entry is read; the matrix is
        assumed Hermitian.
        """
        return cls(
            pop_v=float(np.real(rho[0, 0])),
            pop_h=float(np.real(rho[1, 1])),
            coh=complex(rho[0, 1]),
        )

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the state to a dictionary representation.

        Returns:
            Dictionary with pop_v, pop_h and the real/imaginary parts of coh
        """
        return {
            "pop_v": self.pop_v,
            "pop_h": self.pop_h,
            "coh_re": self.coh.real,
            "coh_im": self.coh.imag,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "QubitState":
        """Create a QubitState from the output of :meth:`to_dict`."""
        return cls(
            pop_v=float(data["pop_v"]),
            pop_h=float(data["pop_h"]),
            coh=complex(float(data["coh_re"]), float(data.get("coh_im", 0.0))),
        )

    def __str__(self) -> str:
        return (
            f"QubitState(V={self.pop_v:.6g}, H={self.pop_h:.6g}, "
            f"coh={self.coh.real:.6g}{self.coh.imag:+.6g}j)"
        )


@dataclass(frozen=True)
class WaveplateSetting:
    """
    Half-wave-plate and quarter-wave-plate fast-axis angles, in degrees.

    Angles are interpreted modulo 180.

    Attributes:
        hwp_deg (float): Half-wave-plate angle
        qwp_deg (float): Quarter-wave-plate angle
    """

    hwp_deg: float
    qwp_deg: float = 0.0

    def validate(self) -> List[str]:
        """Return validation errors; angles must be finite."""
        errors = []
        if not math.isfinite(self.hwp_deg):
            errors.append("HWP angle must be finite")
        if not math.isfinite(self.qwp_deg):
            errors.append("QWP angle must be finite")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Convert the setting to a dictionary of angles in degrees."""
        return {"hwp_deg": self.hwp_deg, "qwp_deg": self.qwp_deg}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "WaveplateSetting":
        """Create a WaveplateSetting from hwp_deg and qwp_deg."""
        return cls(hwp_deg=float(data["hwp_deg"]), qwp_deg=float(data["qwp_deg"]))

    def __str__(self) -> str:
        return f"WaveplateSetting(HWP={self.hwp_deg:g} deg, QWP={self.qwp_deg:g} deg)"
