"""
Dynamics model module.

This module defines the Trajectory class (trace distance sampled along the
displacement dc) and the DynamicsReport class summarizing the BLP measure,
the Markovian/non-Markovian classification and the revival location.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from structured_dephasing.models.environment import EnvParams

DISTANCE_TOLERANCE = 1e-9
UNIFORM_SPACING_TOLERANCE = 1e-6


class Classification(Enum):
    """Dynamics classification derived from the BLP measure."""

    MARKOVIAN = "Markovian"
    NON_MARKOVIAN = "NonMarkovian"


@dataclass(frozen=True, eq=False)
class Trajectory:
    """
    Trace-distance evolution D(dc) on a uniform displacement grid.

    Attributes:
        dc (np.ndarray): Strictly increasing, uniformly spaced displacements (mm)
        d (np.ndarray): Trace distance at each displacement, in [0, 1]
        source (Union[EnvParams, str, None]): Environment parameters, or a
            text label for ingested spectra
    """

    dc: np.ndarray
    d: np.ndarray
    source: Union[EnvParams, str, None] = field(default=None)

    def __post_init__(self) -> None:
        dc = np.array(self.dc, dtype=float)
        d = np.array(self.d, dtype=float)
        dc.setflags(write=False)
        d.setflags(write=False)
        object.__setattr__(self, "dc", dc)
        object.__setattr__(self, "d", d)

    @property
    def points(self) -> List[Tuple[float, float]]:
        """The trajectory as ordered (dc, D) pairs."""
        return list(zip(self.dc.tolist(), self.d.tolist()))

    @property
    def step(self) -> float:
        """Displacement step in mm."""
        return float(self.dc[1] - self.dc[0])

    def validate(self) -> List[str]:
        """
        Validate ordering, uniform spacing and the range of D.

        Returns:
            List of validation error messages. Empty list if valid.
        """
        if self.dc.ndim != 1 or self.dc.size < 2:
            return ["Trajectory needs at least 2 samples"]
        if self.d.shape != self.dc.shape:
            return ["dc and D arrays must have the same length"]

        errors = []
        steps = np.diff(self.dc)
        if np.any(steps <= 0):
            errors.append("dc must be strictly increasing")
        elif np.ptp(steps) > UNIFORM_SPACING_TOLERANCE * steps.mean():
            errors.append("dc must be uniformly spaced")
        if not np.all(np.isfinite(self.d)):
            errors.append("Trace distances must be finite")
        elif np.any(self.d < 0) or np.any(self.d > 1.0 + DISTANCE_TOLERANCE):
            errors.append("Trace distances must lie in [0, 1]")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """Displacements and trace distances as parallel lists."""
        return {"dc_mm": self.dc.tolist(), "trace_distance": self.d.tolist()}

    def __str__(self) -> str:
        return f"Trajectory({self.dc.size} points, dc in [0, {self.dc[-1]:g}] mm)"


@dataclass(frozen=True)
class DynamicsReport:
    """
    Summary of the dynamics induced by one environment.

    Attributes:
        nd (float): BLP measure N_D, >= 0
        classification (Classification): Markovian or NonMarkovian
        dc_max (Optional[float]): Displacement of the maximal revival (mm),
            present only for non-Markovian dynamics
        nd_threshold (float): Classification tolerance used
        dv (Optional[float]): Beam half-separation of the environment (mm)
    """

    nd: float
    classification: Classification
    dc_max: Optional[float] = None
    nd_threshold: float = 1e-3
    dv: Optional[float] = None

    def validate(self) -> List[str]:
        """Check the report's internal consistency."""
        errors = []
        if self.nd < 0:
            errors.append("N_D must be non-negative")
        non_markovian = self.nd > self.nd_threshold
        if non_markovian != (self.classification is Classification.NON_MARKOVIAN):
            errors.append("Classification disagrees with N_D and its threshold")
        if (self.dc_max is not None) != non_markovian:
            errors.append("dc_max must be present exactly for non-Markovian dynamics")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the report to a dictionary.

        Returns:
            Dictionary with nd, classification, dc_max_mm (None when absent)
            and nd_threshold, plus dv_mm for analytic environments
        """
        data: Dict[str, Any] = {
            "nd": self.nd,
            "classification": self.classification.value,
            "dc_max_mm": self.dc_max,
            "nd_threshold": self.nd_threshold,
        }
        if self.dv is not None:
            data["dv_mm"] = self.dv
        return data

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "DynamicsReport":
        """
        Create a DynamicsReport from a dictionary.

        Args:
            data: Dictionary with keys nd and classification, and optionally
                dc_max_mm, nd_threshold and dv_mm

        Returns:
            New DynamicsReport instance
        """
        dc_max = data.get("dc_max_mm")
        dv = data.get("dv_mm")
        return cls(
            nd=float(data["nd"]),
            classification=Classification(data["classification"]),
            dc_max=None if dc_max is None else float(dc_max),
            nd_threshold=float(data.get("nd_threshold", 1e-3)),
            dv=None if dv is None else float(dv),
        )

    def __str__(self) -> str:
        revival = "none" if self.dc_max is None else f"{self.dc_max:.4g} mm"
        return (
            f"DynamicsReport(N_D={self.nd:.4g}, {self.classification.value}, "
            f"dc_max={revival})"
        )
