"""
Run configuration model module.

This module defines RunConfig, the flat set of options shared by every
command-line subcommand, and DvGrid, the parsed form of a
``start:stop:step`` separation grid.
"""

import math
from dataclasses import dataclass, fields
from typing import Any, Dict, List, Mapping, Optional, Union

import numpy as np

FIT = "fit"
AUTO = "auto"
OUTPUT_FORMATS = ("csv", "json")
LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")


@dataclass(frozen=True)
class DvGrid:
    """
    Inclusive grid of beam half-separations in mm.

    Example:
        >>> DvGrid.parse("0.2:0.3:0.05").values().tolist()
        [0.2, 0.25, 0.3]
    """

    start: float
    stop: float
    step: float

    @classmethod
    def parse(cls, text: str) -> "DvGrid":
        """Parse ``start:stop:step``; raises ValueError on malformed input."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ValueError(f"Grid must be written start:stop:step, got {text!r}")
        try:
            start, stop, step = (float(p) for p in parts)
        except ValueError:
            raise ValueError(f"Grid bounds must be numbers, got {text!r}") from None
        grid = cls(start=start, stop=stop, step=step)
        errors = grid.validate()
        if errors:
            raise ValueError(f"Invalid dv grid: {'; '.join(errors)}")
        return grid

    def validate(self) -> List[str]:
        errors = []
        if not all(math.isfinite(v) for v in (self.start, self.stop, self.step)):
            return ["Grid bounds must be finite"]
        if self.start <= 0:
            errors.append("Grid start must be positive")
        if self.start >= self.stop:
            errors.append("Grid start must be below stop")
        if self.step <= 0:
            errors.append("Grid step must be positive")
        return errors

    def values(self) -> np.ndarray:
        """Grid points, stop included when it lies within half a step."""
        count = int(math.floor((self.stop - self.start) / self.step + 0.5)) + 1
        return self.start + self.step * np.arange(count)

    def __str__(self) -> str:
        return f"{self.start:g}:{self.stop:g}:{self.step:g}"


@dataclass(frozen=True)
class RunConfig:
    """
    Options for one command-line run.

    Attributes:
        w0_mm (float): Beam waist
        q0y_mm_inv (Union[float, str]): Central momentum, or "fit" to
            calibrate it against a N_D table first
        phi_rad (float): Coupling phase
        dv_mm (Optional[float]): Beam half-separation; None or 0 means a
            Gaussian environment
        dv_grid (Optional[DvGrid]): Separation grid for sweeps
        dc_points (int): Trajectory samples
        dc_range_mm (Union[float, str]): Trajectory range, or "auto"
        output_path (Optional[str]): Output file; None writes to stdout
        format (Optional[str]): "csv" or "json"; None picks the
            subcommand's default
        log_level (str): Logging level name
        n_jobs (int): joblib workers for sweeps and scans
        nd_threshold (float): Markovian classification tolerance
        baseline_window (float): Tail fraction used for ingest baselines
        table_path (Optional[str]): N_D table CSV for "fit"
        input_path (Optional[str]): Tabulated spectrum CSV for ingest
    """

    w0_mm: float = 0.88
    q0y_mm_inv: Union[float, str] = 0.0
    phi_rad: float = 0.0
    dv_mm: Optional[float] = None
    dv_grid: Optional[DvGrid] = None
    dc_points: int = 2000
    dc_range_mm: Union[float, str] = AUTO
    output_path: Optional[str] = None
    format: Optional[str] = None
    log_level: str = "WARNING"
    n_jobs: int = 1
    nd_threshold: float = 1e-3
    baseline_window: float = 0.1
    table_path: Optional[str] = None
    input_path: Optional[str] = None

    @classmethod
    def from_mapping(cls, values: Mapping[str, Any]) -> "RunConfig":
        """
        Build a RunConfig from string or typed values keyed by field name.

        Unknown keys and unparseable values raise ValueError. The result is
        validated before it is returned.
        """
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ValueError(f"Unknown configuration keys: {', '.join(unknown)}")

        kwargs: Dict[str, Any] = {}
        for key, raw in values.items():
            if raw is None:
                continue
            kwargs[key] = _coerce(key, raw)

        config = cls(**kwargs)
        errors = config.validate()
        if errors:
            raise ValueError(f"Invalid configuration: {'; '.join(errors)}")
        return config

    @property
    def fits_q0y(self) -> bool:
        """True when q0y is to be fitted on the N_D table first."""
        return self.q0y_mm_inv == FIT

    def validate(self) -> List[str]:
        """
        Validate the configuration.

        Returns:
            List of validation error messages. Empty list if valid.
        """
        errors = []
        if not (math.isfinite(self.w0_mm) and self.w0_mm > 0):
            errors.append("w0_mm must be positive")
        if self.q0y_mm_inv != FIT and not (
            isinstance(self.q0y_mm_inv, float) and math.isfinite(self.q0y_mm_inv)
        ):
            errors.append("q0y_mm_inv must be a finite number or 'fit'")
        if not math.isfinite(self.phi_rad):
            errors.append("phi_rad must be finite")
        if self.dv_mm is not None and not (
            math.isfinite(self.dv_mm) and self.dv_mm >= 0
        ):
            errors.append("dv_mm must be non-negative")
        if self.dv_grid is not None:
            errors.extend(self.dv_grid.validate())
        if self.dc_points < 200:
            errors.append("dc_points must be at least 200")
        if self.dc_range_mm != AUTO and not (
            isinstance(self.dc_range_mm, float)
            and math.isfinite(self.dc_range_mm)
            and self.dc_range_mm > 0
        ):
            errors.append("dc_range_mm must be positive or 'auto'")
        if self.format is not None and self.format not in OUTPUT_FORMATS:
            errors.append(f"format must be one of {', '.join(OUTPUT_FORMATS)}")
        if self.log_level.upper() not in LOG_LEVELS:
            errors.append(f"log_level must be one of {', '.join(LOG_LEVELS)}")
        if self.n_jobs == 0:
            errors.append("n_jobs must not be 0")
        if not (math.isfinite(self.nd_threshold) and self.nd_threshold >= 0):
            errors.append("nd_threshold must be non-negative")
        if not 0 < self.baseline_window < 0.5:
            errors.append("baseline_window must lie in (0, 0.5)")
        return errors

    def to_dict(self) -> Dict[str, Any]:
        """
        Convert the configuration to a dictionary.

        Returns:
            Dictionary keyed by field name, with dv_grid as start:stop:step
            text
        """
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["dv_grid"] = None if self.dv_grid is None else str(self.dv_grid)
        return data


def _coerce(key: str, raw: Any) -> Any:
    if key == "dv_grid":
        return raw if isinstance(raw, DvGrid) else DvGrid.parse(str(raw).strip())
    if key in ("q0y_mm_inv", "dc_range_mm"):
        keyword = FIT if key == "q0y_mm_inv" else AUTO
        if isinstance(raw, str) and raw.strip().lower() == keyword:
            return keyword
        return _to_float(key, raw)
    if key in ("w0_mm", "phi_rad", "dv_mm", "nd_threshold", "baseline_window"):
        return _to_float(key, raw)
    if key in ("dc_points", "n_jobs"):
        try:
            return int(raw)
        except (TypeError, ValueError):
            raise ValueError(f"{key} must be an integer, got {raw!r}") from None
    if key == "log_level":
        return str(raw).strip().upper()
    if key == "format":
        return str(raw).strip().lower()
    return str(raw).strip()


def _to_float(key: str, raw: Any) -> float:
    try:
        return float(raw)
    except (TypeError, ValueError):
        raise ValueError(f"{key} must be a number, got {raw!r}") from None
