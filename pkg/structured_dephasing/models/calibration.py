"""
Calibration result model module.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple


@dataclass(frozen=True)
class CalibrationResult:
    """
    Outcome of fitting the central momentum q0y to target N_D values.

    Attributes:
        q0y_fit (float): Fitted central transverse momentum (mm^-1)
        residual (float): Sum of squared N_D errors at q0y_fit
        table (List[Tuple[float, float, float]]): (dv, nd_target, nd_model)
            rows, in input order
        w0 (float): Beam waist the fit was performed with (mm)
    """

    q0y_fit: float
    residual: float
    table: List[Tuple[float, float, float]] = field(default_factory=list)
    w0: float = 0.88

    def validate(self) -> List[str]:
        errors = []
        if self.residual < 0:
            errors.append("Residual must be non-negative")
        if not self.table:
            errors.append("Calibration table must not be empty")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the result to a dictionary.

        Returns:
            Dictionary with q0y_fit, residual, w0_mm and the table as a list
            of {dv_mm, nd_target, nd_model} records

        Example:
            >>> result = CalibrationResult(7.0, 0.0, [(2.14, 0.46, 0.46)])
            >>> result.to_dict()["table"][0]["dv_mm"]
            2.14
        """
        return {
            "q0y_fit": self.q0y_fit,
            "residual": self.residual,
            "w0_mm": self.w0,
            "table": [
                {"dv_mm": dv, "nd_target": target, "nd_model": model}
                for dv, target, model in self.table
            ],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "CalibrationResult":
        """Create a CalibrationResult from the output of :meth:`to_dict`."""
        return cls(
            q0y_fit=float(data["q0y_fit"]),
            residual=float(data["residual"]),
            table=[
                (float(row["dv_mm"]), float(row["nd_target"]), float(row["nd_model"]))
                for row in data["table"]
            ],
            w0=float(data.get("w0_mm", 0.88)),
        )

    def __str__(self) -> str:
        return (
            f"CalibrationResult(q0y={self.q0y_fit:.6g} mm^-1, "
            f"residual={self.residual:.3g}, rows={len(self.table)})"
        )
