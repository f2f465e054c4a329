"""
Main entry point for the structured dephasing simulator.
"""

import sys
from typing import Optional, Sequence

from structured_dephasing.data.file_handler import FileHandler
from structured_dephasing.services.calibration_service import CalibrationService
from structured_dephasing.services.dephasing_service import DephasingService
from structured_dephasing.services.environment_service import EnvironmentService
from structured_dephasing.services.nonmarkov_service import NonMarkovService
from structured_dephasing.services.state_service import StateService
from structured_dephasing.ui.cli import CLI


def build_cli() -> CLI:
    """Wire the services together."""
    environment_service = EnvironmentService()
    dephasing_service = DephasingService(environment_service)
    nonmarkov_service = NonMarkovService(dephasing_service, StateService())
    calibration_service = CalibrationService(nonmarkov_service, environment_service)
    return CLI(
        FileHandler(), environment_service, nonmarkov_service, calibration_service
    )


def main(argv: Optional[Sequence[str]] = None) -> None:
    """Run the command line and exit with its status code."""
    sys.exit(build_cli().run(argv))


if __name__ == "__main__":
    main()
