"""
Exception hierarchy for the simulation engines.

User and configuration mistakes are reported with ``ValueError`` (as the
models' ``validate()`` messages are). Everything raised by a numerical engine
derives from :class:`EngineError`, which the CLI maps to exit code 3.
"""


class EngineError(Exception):
    """Base class for failures of a numerical engine."""


class DegenerateDenominatorError(EngineError):
    """The closed-form decoherence function is undefined for these parameters."""


class NonConvergenceError(EngineError):
    """An iterative fit did not converge."""


class TomographyError(EngineError):
    """The tomography design cannot determine a state."""


class ConsistencyError(EngineError):
    """An internal numerical consistency check failed."""
