"""Exception types shared across the engine.

The split matters for the command line front end, which maps configuration
problems, numerical failures, and verification failures to distinct exit
codes.
"""

from __future__ import annotations


class EngineError(Exception):
    """Base class for everything raised deliberately by this package."""


class ConfigError(EngineError, ValueError):
    """Invalid configuration: bad keys, malformed descriptors, missing files."""


class NumericalError(EngineError, RuntimeError):
    """A computation failed to produce a trustworthy result."""


class BlowupError(NumericalError):
    """State values exceeded the blow-up guard during time stepping."""


class TailMassError(NumericalError):
    """Discarded age-tail mass exceeded the truncation tolerance."""


class ConvergenceError(NumericalError):
    """An iterative method hit its iteration cap without meeting tolerance."""


class BracketError(NumericalError):
    """A root or equilibrium bracket could not be established."""


class SeamError(ValueError):
    """Characteristic solution queried on the undefined line a = t."""


class GateError(EngineError, ValueError):
    """A verification check was invoked outside its regime of validity."""
