"""
Calibration service module.

This module provides the CalibrationService class which pins down the
central momentum q0y against a table of target N_D values and fits the
analytic two-beam spectrum to ingested tabulated data.
"""

import logging
import math
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
from joblib import Parallel, delayed
from scipy.optimize import minimize_scalar

from structured_dephasing.exceptions import (
    ConsistencyError,
    EngineError,
    NonConvergenceError,
)
from structured_dephasing.models.calibration import CalibrationResult
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.services.environment_service import EnvironmentService
from structured_dephasing.services.nonmarkov_service import NonMarkovService
from structured_dephasing.utils.numerics import bracket, relative_change

LOGGER = logging.getLogger(__name__)

TableRow = Tuple[float, float]

Q0Y_LIMITS = (0.0, 30.0)
MIN_SCAN = 500


def _scan_residual(
    service: "CalibrationService", w0: float, rows: Sequence[TableRow], q0y: float
) -> float:
    try:
        return service.objective(w0, rows, q0y)
    except EngineError as e:
        LOGGER.debug("Scan point q0y=%g failed: %s", q0y, e)
        return math.inf


class CalibrationService:
    """
    Service class for parameter calibration.

    Args:
        nonmarkov_service: Computes N_D for each table row.
        environment_service: Supplies the analytic spectrum shape.
        n_jobs: joblib workers for the q0y scan.
        tie_tolerance: Relative residual margin within which the smallest
            q0y among local minima wins.
        max_sweeps: Coordinate-descent sweeps allowed in fit_spectrum.
        line_points: Dense scan points per one-dimensional step.
    """

    def __init__(
        self,
        nonmarkov_service: Optional[NonMarkovService] = None,
        environment_service: Optional[EnvironmentService] = None,
        n_jobs: int = 1,
        tie_tolerance: float = 0.01,
        max_sweeps: int = 200,
        line_points: int = 121,
    ) -> None:
        self.nonmarkov_service = nonmarkov_service or NonMarkovService()
        self.environment_service = environment_service or EnvironmentService()
        self.n_jobs = n_jobs
        self.tie_tolerance = tie_tolerance
        self.max_sweeps = max_sweeps
        self.line_points = line_points

    def model_nd(self, w0: float, dv: float, q0y: float) -> float:
        """N_D of the optimal pair on the default trajectory grid."""
        traj = self.nonmarkov_service.trajectory(EnvParams(w0=w0, q0y=q0y, dv=dv))
        return self.nonmarkov_service.blp_measure(traj)

    def objective(self, w0: float, rows: Sequence[TableRow], q0y: float) -> float:
        """Sum of squared N_D errors over the table at one q0y."""
        return float(
            sum((self.model_nd(w0, dv, q0y) - target) ** 2 for dv, target in rows)
        )

    def fit_q0y(
        self,
        w0: float,
        rows: Sequence[TableRow],
        q0y_range: Tuple[float, float] = Q0Y_LIMITS,
        n_scan: int = 3001,
    ) -> CalibrationResult:
        """
        Fit q0y by a dense scan followed by a bounded scalar refinement.

        Among scan points that are local minima with a residual within
        ``tie_tolerance`` of the best one, the smallest q0y is refined. A
        contiguous run of tied points is one minimum, represented by the
        middle of its lowest samples.

        Args:
            w0: Beam waist in mm.
            rows: (dv, target N_D) pairs.
            q0y_range: Scan interval inside [0, 30] mm^-1.
            n_scan: Scan points, at least 500.

        Returns:
            CalibrationResult with the table in input order.

        Raises:
            ValueError: On an empty table, bad range or too few scan points.
            ConsistencyError: If every scan point fails.
        """
        rows = [(float(dv), float(target)) for dv, target in rows]
        self._check_fit_inputs(w0, rows, q0y_range, n_scan)

        grid = np.linspace(q0y_range[0], q0y_range[1], n_scan)
        LOGGER.info("Scanning q0y over [%g, %g] with %d points", *q0y_range, n_scan)
        residuals = np.array(
            Parallel(n_jobs=self.n_jobs)(
                delayed(_scan_residual)(self, w0, rows, q) for q in grid
            )
        )
        if not np.any(np.isfinite(residuals)):
            raise ConsistencyError("Every q0y scan point failed")

        index = self._select_minimum(residuals)
        q_fit, residual = float(grid[index]), float(residuals[index])
        lo, hi = bracket(grid, index)
        if hi > lo:
            refined = minimize_scalar(
                lambda q: _scan_residual(self, w0, rows, q),
                bounds=(lo, hi),
                method="bounded",
                options={"xatol": 1e-10},
            )
            if refined.fun < residual:
                q_fit, residual = float(refined.x), float(refined.fun)

        table = [(dv, target, self.model_nd(w0, dv, q_fit)) for dv, target in rows]
        LOGGER.info("Fitted q0y=%.8g with residual %.4g", q_fit, residual)
        return CalibrationResult(q0y_fit=q_fit, residual=residual, table=table, w0=w0)

    def fit_spectrum(self, env_data: EnvironmentSpectrum, init: EnvParams) -> EnvParams:
        """
        Least-squares fit of (w0, dv, q0y) of the two-beam spectrum.

        The model is A * shape(q; w0, dv, q0y) + B with A and B profiled out by
        linear least squares. Coordinate descent updates dv, q0y and w0 in
        turn, each by a dense scan over a box around the guess followed by a
        bounded scalar refinement.

        Args:
            env_data: Tabulated or analytic spectrum to fit.
            init: Initial guess with dv > 0.

        Returns:
            Fitted EnvParams carrying the residual and the guess's phi.

        Raises:
            ValueError: On invalid input.
            NonConvergenceError: On a structureless input, a non-positive
                amplitude or when the sweeps run out.
        """
        errors = env_data.validate() + init.validate()
        if errors:
            raise ValueError(f"Invalid fit input: {'; '.join(errors)}")
        if not init.is_structured:
            raise ValueError("fit_spectrum needs an initial guess with dv > 0")
        q, y = env_data.q_grid, env_data.density
        if np.ptp(y) <= 1e-9 * np.max(np.abs(y)):
            raise NonConvergenceError("Spectrum is flat; there is no structure to fit")

        def residual_of(p: np.ndarray) -> float:
            return self._profiled_fit(q, y, p)[0]

        q0_half = max(0.5 * abs(init.q0y), 2.0 / init.w0)
        # parameter order: w0, dv, q0y
        bounds = [
            (0.5 * init.w0, 1.5 * init.w0),
            (0.5 * init.dv, 1.5 * init.dv),
            (init.q0y - q0_half, init.q0y + q0_half),
        ]
        current = np.array([init.w0, init.dv, init.q0y])
        best = residual_of(current)

        for sweep in range(1, self.max_sweeps + 1):
            previous, previous_best = current.copy(), best
            for axis in (1, 2, 0):
                current, best = self._line_search(
                    residual_of, current, best, axis, bounds[axis]
                )
            LOGGER.debug("Sweep %d: params=%s residual=%.6g", sweep, current, best)
            improvement = previous_best - best
            if (
                relative_change(current, previous) < 1e-9
                or improvement <= 1e-12 * previous_best
            ):
                break
        else:
            raise NonConvergenceError(
                f"Spectrum fit did not converge in {self.max_sweeps} sweeps"
            )

        best, amplitude = self._profiled_fit(q, y, current)
        if amplitude <= 0:
            raise NonConvergenceError("Fitted spectrum amplitude is not positive")
        w0, dv, q0y = (float(v) for v in current)
        LOGGER.info("Spectrum fit converged in %d sweeps, residual %.4g", sweep, best)
        return EnvParams(w0=w0, q0y=q0y, dv=dv, phi=init.phi, residual=best)

    def _line_search(
        self,
        residual_of: Callable[[np.ndarray], float],
        point: np.ndarray,
        best: float,
        axis: int,
        limits: Tuple[float, float],
    ) -> Tuple[np.ndarray, float]:
        def along(value: float) -> float:
            trial = point.copy()
            trial[axis] = value
            return residual_of(trial)

        grid = np.linspace(limits[0], limits[1], self.line_points)
        scan = np.array([along(v) for v in grid])
        index = int(np.argmin(scan))
        lo, hi = bracket(grid, index)
        refined = minimize_scalar(
            along, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12}
        )
        candidates = [(best, point[axis]), (scan[index], grid[index])]
        candidates.append((float(refined.fun), float(refined.x)))
        value, position = min(candidates, key=lambda c: c[0])
        updated = point.copy()
        updated[axis] = position
        return updated, float(value)

    def _profiled_fit(
        self, q: np.ndarray, y: np.ndarray, p: np.ndarray
    ) -> Tuple[float, float]:
        w0, dv, q0y = p
        shape = self.environment_service.shape(q, w0, q0y, dv)
        design = np.column_stack([shape, np.ones_like(shape)])
        (amplitude, offset), *_ = np.linalg.lstsq(design, y, rcond=None)
        residual = float(np.sum((design @ np.array([amplitude, offset]) - y) ** 2))
        return residual, float(amplitude)

    def _select_minimum(self, residuals: np.ndarray) -> int:
        best = float(np.min(residuals))
        limit = best * (1.0 + self.tie_tolerance) + 1e-15
        padded = np.concatenate(([math.inf], residuals, [math.inf]))
        for i, value in enumerate(residuals):
            if value <= limit and value <= padded[i] and value <= padded[i + 2]:
                return self._plateau_centre(residuals, i, limit)
        return int(np.argmin(residuals))

    @staticmethod
    def _plateau_centre(residuals: np.ndarray, index: int, limit: float) -> int:
        # the contiguous run within the tie band is one minimum
        lo = index
        while lo > 0 and residuals[lo - 1] <= limit:
            lo -= 1
        hi = index
        while hi < residuals.size - 1 and residuals[hi + 1] <= limit:
            hi += 1
        end = hi + 1
        run = residuals[lo:end]
        flat = np.flatnonzero(run <= np.min(run) + 1e-15)
        return lo + int(flat[flat.size // 2])

    @staticmethod
    def _check_fit_inputs(
        w0: float,
        rows: List[TableRow],
        q0y_range: Tuple[float, float],
        n_scan: int,
    ) -> None:
        errors = []
        if not rows:
            errors.append("N_D table must not be empty")
        if not (math.isfinite(w0) and w0 > 0):
            errors.append("w0 must be positive")
        lo, hi = q0y_range
        if not (Q0Y_LIMITS[0] <= lo < hi <= Q0Y_LIMITS[1]):
            errors.append(f"q0y range must be increasing within [0, 30]: {q0y_range}")
        if n_scan < MIN_SCAN:
            errors.append(f"n_scan must be at least {MIN_SCAN}")
        for dv, target in rows:
            if not (math.isfinite(dv) and dv > 0):
                errors.append(f"Table separation must be positive, got {dv!r}")
            if not (math.isfinite(target) and target >= 0):
                errors.append(f"Target N_D must be non-negative, got {target!r}")
        if errors:
            raise ValueError(f"Invalid calibration input: {'; '.join(errors)}")
