"""
Non-Markovianity service module.

This module provides the NonMarkovService class: trace-distance trajectories
of the optimal state pair, the BLP measure N_D, the Markovian/non-Markovian
classification, the revival position dc_max and parallel sweeps over the
beam half-separation dv.
"""

import logging
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from joblib import Parallel, delayed
from scipy.signal import find_peaks

from structured_dephasing.exceptions import ConsistencyError, EngineError
from structured_dephasing.models.dynamics import (
    Classification,
    DynamicsReport,
    Trajectory,
)
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.models.kappa import Kappa
from structured_dephasing.models.qubit_state import QubitState
from structured_dephasing.services.dephasing_service import DephasingService
from structured_dephasing.services.state_service import StateService
from structured_dephasing.utils.numerics import parabolic_vertex

LOGGER = logging.getLogger(__name__)

Source = Union[EnvParams, EnvironmentSpectrum]
SweepEntry = Tuple[float, Optional[DynamicsReport]]

MIN_POINTS = 200
DEFAULT_POINTS = 2000


def _sweep_point(
    service: "NonMarkovService",
    params: EnvParams,
    n_points: int,
    nd_threshold: float,
) -> SweepEntry:
    try:
        return params.dv, service.report(
            params, n_points=n_points, nd_threshold=nd_threshold
        )
    except EngineError as e:
        LOGGER.warning("Sweep point dv=%g failed: %s", params.dv, e)
        return params.dv, None


class NonMarkovService:
    """
    Service class for trace-distance dynamics.

    Args:
        dephasing_service: Source of |kappa| and of the dephasing channel.
        state_service: Trace distance, optimal pair and tomography model.
        nd_threshold: Default Markovian classification tolerance.
        prominence: Smallest peak prominence accepted as a revival.
        range_widths: Default trajectory range is dv + range_widths * w0.
        n_jobs: joblib workers used by sweeps.
    """

    def __init__(
        self,
        dephasing_service: Optional[DephasingService] = None,
        state_service: Optional[StateService] = None,
        nd_threshold: float = 1e-3,
        prominence: float = 1e-6,
        range_widths: float = 4.0,
        n_jobs: int = 1,
    ) -> None:
        self.dephasing_service = dephasing_service or DephasingService()
        self.state_service = state_service or StateService()
        self.nd_threshold = nd_threshold
        self.prominence = prominence
        self.range_widths = range_widths
        self.n_jobs = n_jobs

    def default_range(self, source: Source) -> float:
        """
        Default trajectory range dv + 4 w0 in mm.

        Raises:
            ValueError: For a tabulated spectrum, which has no w0 or dv.
        """
        params = source if isinstance(source, EnvParams) else source.meta
        if params is None:
            raise ValueError("Tabulated spectra need an explicit dc range")
        return params.dv + self.range_widths * params.w0

    def displacements(
        self, source: Source, dc_max_range: Optional[float], n_points: int
    ) -> np.ndarray:
        """Uniform displacement grid [0, dc_max_range] with n_points samples."""
        if n_points < MIN_POINTS:
            raise ValueError(f"n_points must be at least {MIN_POINTS}, got {n_points}")
        span = self.default_range(source) if dc_max_range is None else dc_max_range
        if not span > 0:
            raise ValueError(f"dc range must be positive, got {span!r}")
        return np.linspace(0.0, span, n_points)

    def trajectory(
        self,
        source: Source,
        dc_max_range: Optional[float] = None,
        n_points: int = DEFAULT_POINTS,
    ) -> Trajectory:
        """
        Trace distance of the optimal pair, D(dc) = |kappa(dc)|.

        Args:
            source: Environment parameters or spectrum.
            dc_max_range: Upper end of the dc grid; defaults to dv + 4 w0.
            n_points: Number of samples, at least 200.

        Returns:
            The sampled Trajectory.

        Raises:
            ValueError: On invalid range or sample count.
            EngineError: Propagated from the kappa engines.
        """
        dc = self.displacements(source, dc_max_range, n_points)
        d = self.dephasing_service.kappa_magnitudes(source, dc)
        return Trajectory(dc=dc, d=d, source=self._provenance(source))

    def state_trajectory(
        self,
        source: Source,
        dc_max_range: Optional[float] = None,
        n_points: int = DEFAULT_POINTS,
        pair: Optional[Tuple[QubitState, QubitState]] = None,
    ) -> Trajectory:
        """
        Trace distance computed from the evolved density matrices of a pair.

        Args:
            source: Environment parameters or spectrum.
            dc_max_range: Upper end of the dc grid.
            n_points: Number of samples.
            pair: Initial states; defaults to the optimal pair.

        Returns:
            The sampled Trajectory.
        """
        first, second = pair or self.state_service.optimal_pair()
        dc = self.displacements(source, dc_max_range, n_points)
        d = np.array(
            [
                self.state_service.trace_distance(
                    *self.dephasing_service.evolve_pair((first, second), kappa)
                )
                for kappa in self._kappas(source, dc)
            ]
        )
        return Trajectory(dc=dc, d=d, source=self._provenance(source))

    def tomographic_trajectory(
        self,
        source: Source,
        dc_max_range: Optional[float] = None,
        n_points: int = DEFAULT_POINTS,
        perturbation: float = 0.0,
        seed: int = 0,
    ) -> Trajectory:
        """
        Trace distance as an experiment measures it.

        At each dc both optimal states are dephased, measured at the canonical
        analyzer settings with optional seeded uniform intensity errors in
        [-perturbation, perturbation], reconstructed and compared.
        """
        if perturbation < 0:
            raise ValueError("perturbation must be non-negative")
        rng = np.random.default_rng(seed)
        settings = self.state_service.canonical_settings()
        pair = self.state_service.optimal_pair()
        dc = self.displacements(source, dc_max_range, n_points)

        d = []
        for kappa in self._kappas(source, dc):
            reconstructed = []
            for state in self.dephasing_service.evolve_pair(pair, kappa):
                measured = self.state_service.measure_intensities(state, settings)
                if perturbation > 0:
                    noise = rng.uniform(-perturbation, perturbation, len(measured))
                    measured = [(s, i + e) for (s, i), e in zip(measured, noise)]
                state_hat = self.state_service.tomography_reconstruct(measured)
                reconstructed.append(state_hat)
            d.append(self.state_service.trace_distance(*reconstructed))
        return Trajectory(dc=dc, d=np.array(d), source=self._provenance(source))

    def blp_measure(self, traj: Trajectory) -> float:
        """
        BLP measure: sum of the positive increments of D.

        Example:
            >>> service = NonMarkovService()
            >>> traj = Trajectory(np.linspace(0.0, 4.0, 5), [1.0, 0.2, 0.6, 0.1, 0.3])
            >>> round(service.blp_measure(traj), 12)
            0.6
        """
        self._check(traj)
        return float(np.sum(np.clip(np.diff(traj.d), 0.0, None)))

    def classify(
        self, nd: float, nd_threshold: Optional[float] = None
    ) -> Classification:
        """NonMarkovian iff nd > nd_threshold."""
        if nd < 0:
            raise ValueError(f"N_D must be non-negative, got {nd!r}")
        threshold = self.nd_threshold if nd_threshold is None else nd_threshold
        if nd > threshold:
            return Classification.NON_MARKOVIAN
        return Classification.MARKOVIAN

    def dc_max(self, traj: Trajectory) -> Optional[float]:
        """
        Displacement of the largest revival of D.

        Candidates are the peaks ``find_peaks`` reports with at least
        ``prominence``, kept only when their lowest preceding sample is
        interior. A flat top counts as one peak. The winner's position is
        refined by a parabola through the three bracketing samples.

        Returns:
            dc of the maximal revival in mm, or None when D has no interior
            peak.
        """
        self._check(traj)
        d = traj.d
        peaks, _ = find_peaks(d, prominence=self.prominence)
        candidates = [int(p) for p in peaks if p > 1 and d[1:p].min() < d[0]]
        if not candidates:
            return None
        best = max(candidates, key=lambda p: d[p])
        return parabolic_vertex(traj.dc, d, best)

    def highest_revived_sample(self, traj: Trajectory) -> Optional[float]:
        """
        dc of the highest sample lying above the lowest sample before it.

        Endpoints are included, so a revival still rising at the end of the
        grid is placed on the last sample. None for monotone decay.
        """
        self._check(traj)
        d = traj.d
        revived = np.flatnonzero(d > np.minimum.accumulate(d))
        if revived.size == 0:
            return None
        return float(traj.dc[revived[np.argmax(d[revived])]])

    def report(
        self,
        source: Source,
        dc_max_range: Optional[float] = None,
        n_points: int = DEFAULT_POINTS,
        nd_threshold: Optional[float] = None,
    ) -> DynamicsReport:
        """Trajectory, N_D, classification and revival position in one call."""
        threshold = self.nd_threshold if nd_threshold is None else nd_threshold
        traj = self.trajectory(source, dc_max_range, n_points)
        nd = self.blp_measure(traj)
        classification = self.classify(nd, threshold)
        revival = None
        if classification is Classification.NON_MARKOVIAN:
            revival = self.dc_max(traj)
            if revival is None:
                LOGGER.info("No interior revival peak; using highest revived sample")
                revival = self.highest_revived_sample(traj)
        params = source if isinstance(source, EnvParams) else source.meta
        report = DynamicsReport(
            nd=nd,
            classification=classification,
            dc_max=revival,
            nd_threshold=threshold,
            dv=None if params is None else params.dv,
        )
        errors = report.validate()
        if errors:
            raise ConsistencyError(f"Inconsistent dynamics report: {'; '.join(errors)}")
        return report

    def sweep(
        self,
        w0: float,
        q0y: float,
        dv_grid: Sequence[float],
        phi: float = 0.0,
        n_points: int = DEFAULT_POINTS,
        nd_threshold: Optional[float] = None,
    ) -> List[SweepEntry]:
        """
        DynamicsReport for every dv of a grid, in grid order.

        Points whose engine fails are logged and reported as None.
        """
        grid = np.asarray(dv_grid, dtype=float)
        if grid.ndim != 1 or grid.size == 0:
            raise ValueError("dv grid must be a non-empty sequence")
        if np.any(grid <= 0) or np.any(np.diff(grid) <= 0):
            raise ValueError("dv grid must be positive and strictly increasing")
        threshold = self.nd_threshold if nd_threshold is None else nd_threshold
        environments = [EnvParams(w0=w0, q0y=q0y, dv=float(dv), phi=phi) for dv in grid]
        for params in environments:
            errors = params.validate()
            if errors:
                raise ValueError(f"Invalid environment parameters: {'; '.join(errors)}")

        LOGGER.info("Sweeping %d separations with n_jobs=%d", grid.size, self.n_jobs)
        return Parallel(n_jobs=self.n_jobs)(
            delayed(_sweep_point)(self, params, n_points, threshold)
            for params in environments
        )

    def nd_sweep(
        self, w0: float, q0y: float, dv_grid: Sequence[float], **kwargs
    ) -> List[Tuple[float, Optional[float]]]:
        """(dv, N_D) pairs; N_D is None where the engine failed."""
        return [
            (dv, None if report is None else report.nd)
            for dv, report in self.sweep(w0, q0y, dv_grid, **kwargs)
        ]

    def dcmax_sweep(
        self, w0: float, q0y: float, dv_grid: Sequence[float], **kwargs
    ) -> List[Tuple[float, Optional[float]]]:
        """(dv, dc_max) pairs; dc_max is None for Markovian or failed points."""
        return [
            (dv, None if report is None else report.dc_max)
            for dv, report in self.sweep(w0, q0y, dv_grid, **kwargs)
        ]

    def frontier(
        self,
        sweep: Sequence[Tuple[float, Optional[float]]],
        nd_threshold: Optional[float] = None,
    ) -> Optional[float]:
        """Largest dv whose N_D is at or below the threshold, or None."""
        threshold = self.nd_threshold if nd_threshold is None else nd_threshold
        markovian = [dv for dv, nd in sweep if nd is not None and nd <= threshold]
        return max(markovian) if markovian else None

    def _kappas(self, source: Source, dc: np.ndarray) -> List[Kappa]:
        if isinstance(source, EnvParams):
            phase = np.exp(1j * source.phi)
            magnitudes = self.dephasing_service.kappa_magnitudes(source, dc)
            values = np.minimum(magnitudes, 1.0) * phase
        else:
            values = self.dephasing_service.kappa_quadrature_many(source, dc)
            values = values / np.maximum(np.abs(values), 1.0)
        return [Kappa(value=complex(v), dc=float(x)) for v, x in zip(values, dc)]

    @staticmethod
    def _provenance(source: Source) -> Union[EnvParams, str]:
        if isinstance(source, EnvParams):
            return source
        return source.meta if source.meta is not None else "tabulated"

    @staticmethod
    def _check(traj: Trajectory) -> None:
        errors = traj.validate()
        if errors:
            raise ValueError(f"Invalid trajectory: {'; '.join(errors)}")
