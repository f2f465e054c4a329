"""
Environment model module.

This module defines EnvParams, the analytic description of the
interference-structured environment, and EnvironmentSpectrum, the sampled and
normalized spectral density |f(q_y)|^2 on a momentum grid.

Units: lengths in mm, momenta in mm^-1, phases in radians.
"""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy.integrate import trapezoid

NORMALIZATION_TOLERANCE = 1e-9
UNIFORM_SPACING_TOLERANCE = 1e-6


@dataclass(frozen=True)
class EnvParams:
    """
    Analytic environment parameters.

    Attributes:
        w0 (float): Beam waist in mm
        q0y (float): Central transverse momentum in mm^-1
        dv (float): Half-separation of the interfering beams in mm;
            0 denotes the unstructured single-beam (Gaussian) case
        phi (float): Coupling phase in radians
        residual (Optional[float]): Least-squares residual when the
            parameters were produced by a spectrum fit

    Example:
        >>> params = EnvParams(w0=0.88, q0y=7.0, dv=2.14)
        >>> params.validate()
        []
        >>> params.is_structured
        True
    """

    w0: float
    q0y: float = 0.0
    dv: float = 0.0
    phi: float = 0.0
    residual: Optional[float] = None

    def validate(self) -> List[str]:
        """
        Validate the parameters.

        Returns:
            List of validation error messages. Empty list if valid.
        """
        errors = []
        for name in ("w0", "q0y", "dv", "phi"):
            if not math.isfinite(getattr(self, name)):
                errors.append(f"{name} must be finite")
        if errors:
            return errors

        if self.w0 <= 0:
            errors.append("Beam waist w0 must be positive")
        if self.dv < 0:
            errors.append("Beam half-separation dv must be non-negative")
        return errors

    @property
    def is_structured(self) -> bool:
        """True when the environment carries an interference modulation."""
        return self.dv > 0

    def without_structure(self) -> "EnvParams":
        """Return the same parameters with the modulation removed (dv = 0)."""
        return EnvParams(w0=self.w0, q0y=self.q0y, dv=0.0, phi=self.phi)

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the parameters to a dictionary.

        Returns:
            Dictionary with w0_mm, q0y_mm_inv, dv_mm and phi_rad, plus the
            fit residual when one is attached

        Example:
            >>> EnvParams(w0=0.88, dv=2.14).to_dict()["dv_mm"]
            2.14
        """
        data: Dict[str, Any] = {
            "w0_mm": self.w0,
            "q0y_mm_inv": self.q0y,
            "dv_mm": self.dv,
            "phi_rad": self.phi,
        }
        if self.residual is not None:
            data["residual"] = self.residual
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "EnvParams":
        """Create EnvParams from a dictionary; only w0_mm is required."""
        residual = data.get("residual")
        return cls(
            w0=float(data["w0_mm"]),
            q0y=float(data.get("q0y_mm_inv", 0.0)),
            dv=float(data.get("dv_mm", 0.0)),
            phi=float(data.get("phi_rad", 0.0)),
            residual=None if residual is None else float(residual),
        )

    def __str__(self) -> str:
        return (
            f"EnvParams(w0={self.w0:g} mm, q0y={self.q0y:g} mm^-1, "
            f"dv={self.dv:g} mm, phi={self.phi:g} rad)"
        )


@dataclass(frozen=True, eq=False)
class EnvironmentSpectrum:
    """
    Normalized spectral density sampled on a uniform momentum grid.

    The arrays are copied and made read-only on construction.

    Attributes:
        q_grid (np.ndarray): Strictly increasing, uniformly spaced momenta
        density (np.ndarray): Non-negative density values on q_grid
        meta (Optional[EnvParams]): Analytic parameters the spectrum was
            built from, None for ingested data
    """

    q_grid: np.ndarray
    density: np.ndarray
    meta: Optional[EnvParams] = field(default=None)

    def __post_init__(self) -> None:
        q_grid = np.array(self.q_grid, dtype=float)
        density = np.array(self.density, dtype=float)
        q_grid.setflags(write=False)
        density.setflags(write=False)
        object.__setattr__(self, "q_grid", q_grid)
        object.__setattr__(self, "density", density)

    @property
    def spacing(self) -> float:
        """Grid spacing in mm^-1."""
        return float(self.q_grid[1] - self.q_grid[0])

    def integral(self) -> float:
        """Trapezoidal integral of the density over the grid."""
        return float(trapezoid(self.density, self.q_grid))

    def validate(self) -> List[str]:
        """
        Validate grid shape, monotonicity, non-negativity and normalization.

        Returns:
            List of validation error messages. Empty list if valid.
        """
        errors = []
        if self.q_grid.ndim != 1 or self.q_grid.size < 2:
            return ["Momentum grid must be one-dimensional with at least 2 points"]
        if self.density.shape != self.q_grid.shape:
            return ["Density and momentum grid must have the same length"]
        if not (np.all(np.isfinite(self.q_grid)) and np.all(np.isfinite(self.density))):
            return ["Grid and density must be finite"]

        steps = np.diff(self.q_grid)
        if np.any(steps <= 0):
            errors.append("Momentum grid must be strictly increasing")
        elif np.ptp(steps) > UNIFORM_SPACING_TOLERANCE * steps.mean():
            errors.append("Momentum grid must be uniformly spaced")

        if np.any(self.density < 0):
            errors.append("Density values must be non-negative")

        if abs(self.integral() - 1.0) > NORMALIZATION_TOLERANCE:
            errors.append(f"Density must integrate to 1 (got {self.integral()!r})")

        if self.meta is not None and self.meta.is_structured and not errors:
            limit = math.pi / (20.0 * self.meta.dv)
            if self.spacing > limit * (1.0 + UNIFORM_SPACING_TOLERANCE):
                errors.append(
                    f"Grid spacing {self.spacing:g} does not resolve the modulation "
                    f"(needs <= {limit:g})"
                )
        return errors

    def rows(self) -> List[Tuple[float, float]]:
        """Return the spectrum as (q, density) pairs."""
        return list(zip(self.q_grid.tolist(), self.density.tolist()))

    def to_dict(self) -> Dict[str, Any]:
        """Grid, density and analytic provenance (None for ingested data)."""
        return {
            "q_mm_inv": self.q_grid.tolist(),
            "density": self.density.tolist(),
            "meta": None if self.meta is None else self.meta.to_dict(),
        }

    def __str__(self) -> str:
        return (
            f"EnvironmentSpectrum({self.q_grid.size} points, "
            f"q in [{self.q_grid[0]:g}, {self.q_grid[-1]:g}] mm^-1)"
        )
