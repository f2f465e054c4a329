"""
Decoherence function model module.

The decoherence function kappa(dc) multiplies the coherence of the qubit after
a beam displacement dc, which plays the role of time.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List

MAGNITUDE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Kappa:
    """
    Value of the decoherence function at one displacement.

    Attributes:
        value (complex): kappa(dc), dimensionless, |value| <= 1
        dc (float): Displacement in mm

    Example:
        >>> Kappa(value=0.3 + 0j, dc=1.0).magnitude
        0.3
    """

    value: complex
    dc: float = 0.0

    @property
    def magnitude(self) -> float:
        """|kappa|."""
        return abs(self.value)

    def validate(self) -> List[str]:
        """Return validation errors for a physical decoherence factor."""
        errors = []
        if not (math.isfinite(self.value.real) and math.isfinite(self.value.imag)):
            errors.append("kappa must be finite")
        elif self.magnitude > 1.0 + MAGNITUDE_TOLERANCE:
            errors.append(f"|kappa| = {self.magnitude!r} exceeds 1 (unphysical)")
        if not math.isfinite(self.dc):
            errors.append("dc must be finite")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Displacement and the real and imaginary parts of kappa."""
        return {"dc_mm": self.dc, "re": self.value.real, "im": self.value.imag}

    def __str__(self) -> str:
        return f"Kappa(dc={self.dc:g} mm, |kappa|={self.magnitude:.6g})"
