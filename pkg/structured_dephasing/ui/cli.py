"""
Command-Line Interface module.

This module provides the CLI class which parses subcommands and flags,
merges them over an optional config file, calls the services and writes
deterministic CSV or JSON output.
"""

import argparse
import csv
import logging
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from structured_dephasing import __version__
from structured_dephasing.data.file_handler import FileHandler
from structured_dephasing.exceptions import EngineError
from structured_dephasing.models.calibration import CalibrationResult
from structured_dephasing.models.environment import EnvironmentSpectrum, EnvParams
from structured_dephasing.models.run_config import AUTO, OUTPUT_FORMATS, RunConfig
from structured_dephasing.services.calibration_service import CalibrationService
from structured_dephasing.services.environment_service import EnvironmentService
from structured_dephasing.services.nonmarkov_service import NonMarkovService

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USER_ERROR = 2
EXIT_ENGINE_ERROR = 3

TABLE_REFERENCE = "table1_theory.csv"

# flag -> RunConfig field
_FLAGS = (
    ("--w0-mm", "w0_mm", "Beam waist in mm"),
    ("--q0y", "q0y_mm_inv", "Central momentum in mm^-1, or 'fit'"),
    ("--phi", "phi_rad", "Coupling phase in radians"),
    ("--dv-mm", "dv_mm", "Beam half-separation in mm (0 or absent: Gaussian)"),
    ("--dv-grid", "dv_grid", "Separation grid start:stop:step in mm"),
    ("--dc-points", "dc_points", "Trajectory samples (>= 200)"),
    ("--dc-range-mm", "dc_range_mm", "Trajectory range in mm, or 'auto'"),
    ("--out", "output_path", "Output file (default: stdout)"),
    ("--table", "table_path", "N_D table CSV (dv_mm,nd) used by 'fit'"),
    ("--input", "input_path", "Tabulated spectrum CSV (q_mm_inv,counts)"),
    ("--log-level", "log_level", "Logging level (default WARNING)"),
    ("--n-jobs", "n_jobs", "joblib workers for sweeps and scans"),
    ("--nd-threshold", "nd_threshold", "Markovian classification tolerance"),
    ("--baseline-window", "baseline_window", "Tail fraction for ingest baselines"),
)

_DEFAULT_FORMATS = {
    "env": "csv",
    "trajectory": "csv",
    "ingest": "csv",
    "report": "json",
    "fit": "json",
}


class CLI:
    """
    Command-Line Interface for the structured dephasing simulator.

    Example:
        >>> cli = CLI(FileHandler(), EnvironmentService(), NonMarkovService(),
        ...           CalibrationService())
        >>> cli.run(["env", "--dv-mm", "2.14", "--out", "env.csv"])
        0
    """

    def __init__(
        self,
        file_handler: FileHandler,
        environment_service: EnvironmentService,
        nonmarkov_service: NonMarkovService,
        calibration_service: CalibrationService,
    ) -> None:
        """
        Initialize the CLI.

        Args:
            file_handler: Reads inputs and renders outputs.
            environment_service: Builds and ingests spectra.
            nonmarkov_service: Trajectories, reports and sweeps.
            calibration_service: q0y and spectrum fits.
        """
        self.file_handler = file_handler
        self.environment_service = environment_service
        self.nonmarkov_service = nonmarkov_service
        self.calibration_service = calibration_service
        self.parser = self._build_parser()

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parse arguments, run one subcommand and return its exit code.

        Returns:
            0 on success, 2 on user or configuration errors, 3 on engine errors.
        """
        try:
            args = self.parser.parse_args(argv)
        except SystemExit as e:
            return int(e.code or 0)

        try:
            config = self._load_config(args)
            logging.basicConfig(
                level=config.log_level,
                stream=sys.stderr,
                format="%(levelname)s %(name)s: %(message)s",
            )
            self.nonmarkov_service.n_jobs = config.n_jobs
            self.calibration_service.n_jobs = config.n_jobs
            text = self._dispatch(args.command, config)
            self._emit(text, config)
        except EngineError as e:
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_ENGINE_ERROR
        except (ValueError, OSError, csv.Error) as e:
            print(f"Error: {e}", file=sys.stderr)
            return EXIT_USER_ERROR
        return EXIT_OK

    def cmd_env(self, config: RunConfig) -> str:
        """Built or ingested spectrum as q_mm_inv,density rows."""
        if config.input_path:
            spectrum = self._ingest(config)
        else:
            spectrum = self.environment_service.spectrum_for(self._params(config))
        if self._format("env", config) == "json":
            return self.file_handler.render_json(spectrum.to_dict())
        return self.file_handler.render_csv(("q_mm_inv", "density"), spectrum.rows())

    def cmd_trajectory(self, config: RunConfig) -> str:
        """Trace-distance evolution as dc_mm,trace_distance rows."""
        source: Any
        if config.input_path:
            source = self._ingest(config)
        else:
            source = self._params(config)
        traj = self.nonmarkov_service.trajectory(
            source, self._dc_range(config), config.dc_points
        )
        if self._format("trajectory", config) == "json":
            data = traj.to_dict()
            data["source"] = self._describe(traj.source)
            return self.file_handler.render_json(data)
        return self.file_handler.render_csv(("dc_mm", "trace_distance"), traj.points)

    def cmd_report(self, config: RunConfig) -> str:
        """DynamicsReport for one dv, or one per dv of a grid."""
        as_json = self._format("report", config) == "json"
        if config.dv_grid is None:
            params = self._params(config)
            report = self.nonmarkov_service.report(
                params, self._dc_range(config), config.dc_points, config.nd_threshold
            )
            if as_json:
                return self.file_handler.render_json(report.to_dict())
            return self._report_csv([(params.dv, report)])

        q0y = self._q0y(config)
        sweep = self.nonmarkov_service.sweep(
            config.w0_mm,
            q0y,
            config.dv_grid.values(),
            phi=config.phi_rad,
            n_points=config.dc_points,
            nd_threshold=config.nd_threshold,
        )
        frontier = self.nonmarkov_service.frontier(
            [(dv, None if r is None else r.nd) for dv, r in sweep], config.nd_threshold
        )
        LOGGER.info(
            "Markovian frontier: %s", "none" if frontier is None else f"{frontier:g} mm"
        )
        if as_json:
            return self.file_handler.render_json(
                [self._sweep_entry(dv, r, config.nd_threshold) for dv, r in sweep]
            )
        return self._report_csv(sweep)

    def cmd_fit(self, config: RunConfig) -> str:
        """CalibrationResult of q0y against an N_D table."""
        result = self._fit(config)
        if self._format("fit", config) == "json":
            return self.file_handler.render_json(result.to_dict())
        header = ("dv_mm", "nd_target", "nd_model")
        return self.file_handler.render_csv(header, result.table)

    def cmd_ingest(self, config: RunConfig) -> str:
        """Cleaned spectrum (csv) or the spectrum fit seeded from the config (json)."""
        spectrum = self._ingest(config)
        if self._format("ingest", config) == "json":
            init = EnvParams(
                w0=config.w0_mm,
                q0y=self._q0y(config),
                dv=config.dv_mm or 0.0,
                phi=config.phi_rad,
            )
            fitted = self.calibration_service.fit_spectrum(spectrum, init)
            return self.file_handler.render_json(fitted.to_dict())
        return self.file_handler.render_csv(("q_mm_inv", "density"), spectrum.rows())

    def _dispatch(self, command: str, config: RunConfig) -> str:
        handlers = {
            "env": self.cmd_env,
            "trajectory": self.cmd_trajectory,
            "report": self.cmd_report,
            "fit": self.cmd_fit,
            "ingest": self.cmd_ingest,
        }
        return handlers[command](config)

    def _emit(self, text: str, config: RunConfig) -> None:
        if config.output_path:
            self.file_handler.write_text(text, Path(config.output_path))
        else:
            sys.stdout.write(text)

    def _load_config(self, args: argparse.Namespace) -> RunConfig:
        values: Dict[str, Any] = {}
        if args.config:
            values.update(self.file_handler.load_config(Path(args.config)))
        if args.format is not None:
            values["format"] = args.format
        for _, field, _ in _FLAGS:
            flag_value = getattr(args, field)
            if flag_value is not None:
                values[field] = flag_value
        return RunConfig.from_mapping(values)

    def _params(self, config: RunConfig) -> EnvParams:
        params = EnvParams(
            w0=config.w0_mm,
            q0y=self._q0y(config),
            dv=config.dv_mm or 0.0,
            phi=config.phi_rad,
        )
        errors = params.validate()
        if errors:
            raise ValueError(f"Invalid environment parameters: {'; '.join(errors)}")
        return params

    def _q0y(self, config: RunConfig) -> float:
        if not config.fits_q0y:
            return float(config.q0y_mm_inv)
        result = self._fit(config)
        LOGGER.info(
            "Using fitted q0y=%.8g (residual %.4g)", result.q0y_fit, result.residual
        )
        return result.q0y_fit

    def _fit(self, config: RunConfig) -> CalibrationResult:
        path = config.table_path or self.file_handler.reference_path(TABLE_REFERENCE)
        rows = self.file_handler.load_table(Path(path))
        return self.calibration_service.fit_q0y(config.w0_mm, rows)

    def _ingest(self, config: RunConfig) -> EnvironmentSpectrum:
        if not config.input_path:
            raise ValueError("ingest needs --input <path>")
        rows = self.file_handler.load_spectrum_rows(Path(config.input_path))
        return self.environment_service.ingest_tabulated(rows, config.baseline_window)

    @staticmethod
    def _dc_range(config: RunConfig) -> Optional[float]:
        if config.dc_range_mm == AUTO:
            return None
        return float(config.dc_range_mm)

    @staticmethod
    def _format(command: str, config: RunConfig) -> str:
        return config.format or _DEFAULT_FORMATS[command]

    @staticmethod
    def _describe(source: Any) -> Any:
        return source.to_dict() if isinstance(source, EnvParams) else source

    @staticmethod
    def _sweep_entry(dv: float, report: Any, nd_threshold: float) -> Dict[str, Any]:
        if report is not None:
            return report.to_dict()
        return {
            "classification": None,
            "dc_max_mm": None,
            "dv_mm": dv,
            "nd": None,
            "nd_threshold": nd_threshold,
        }

    def _report_csv(self, entries: List[Tuple[float, Any]]) -> str:
        rows = [
            (
                dv,
                None if r is None else r.nd,
                None if r is None else r.classification.value,
                None if r is None else r.dc_max,
            )
            for dv, r in entries
        ]
        return self.file_handler.render_csv(
            ("dv_mm", "nd", "classification", "dc_max_mm"), rows
        )

    @staticmethod
    def _build_parser() -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="key = value configuration file")
        common.add_argument("--format", choices=OUTPUT_FORMATS, help="Output format")
        for flag, field, text in _FLAGS:
            common.add_argument(flag, dest=field, help=text)

        parser = argparse.ArgumentParser(
            prog="structured-dephasing",
            description="Qubit dephasing in interference-structured environments",
        )
        parser.add_argument(
            "--version", action="version", version=f"%(prog)s {__version__}"
        )
        commands = parser.add_subparsers(dest="command", required=True)
        commands.add_parser("env", parents=[common], help="Write the spectrum")
        commands.add_parser("trajectory", parents=[common], help="Write D(dc)")
        commands.add_parser("report", parents=[common], help="N_D and revival report")
        commands.add_parser("fit", parents=[common], help="Fit q0y to an N_D table")
        commands.add_parser("ingest", parents=[common], help="Clean or fit a CCD row")
        return parser
