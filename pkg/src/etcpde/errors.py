"""Exception taxonomy shared across the workbench."""
from __future__ import annotations

__all__ = [
    "EtcpdeError",
    "UnsupportedBoundaryError",
    "ResolutionError",
    "DegenerateSpectrumError",
    "SingularLocationsError",
    "DivergenceError",
    "TrainingStalledError",
    "InfeasibleError",
    "NumericalFailureError",
    "CertificateRejectedError",
    "HardAssertionError",
    "ConfigError",
    "ZenoWarning",
]


class EtcpdeError(Exception):
    """Base class for workbench errors."""


class UnsupportedBoundaryError(EtcpdeError):
    """Boundary configuration outside what the operation supports."""


class ResolutionError(EtcpdeError):
    """Discretization too coarse for the requested quantity."""


class DegenerateSpectrumError(EtcpdeError):
    """Spectrum unusable (e.g. all eigenvalues zero)."""


class SingularLocationsError(EtcpdeError):
    """Measurement locations give a (near-)singular reconstruction matrix."""


class DivergenceError(EtcpdeError):
    """Simulated field exceeded the overflow guard; carries a partial trace."""

    def __init__(self, message: str, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class TrainingStalledError(EtcpdeError):
    """Damped normal equations became unsolvable; carries best weights."""

    def __init__(self, message: str, best=None, history=None):
        super().__init__(message)
        self.best = best
        self.history = history


class InfeasibleError(EtcpdeError):
    """Constraint system certified infeasible; carries the best violation."""

    def __init__(self, message: str, best_violation: float | None = None):
        super().__init__(message)
        self.best_violation = best_violation


class NumericalFailureError(EtcpdeError):
    """Solver lost numerical traction (ill-conditioned Newton system, NaN)."""


class CertificateRejectedError(EtcpdeError):
    """Recovered gain failed exact re-verification; carries the report."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class HardAssertionError(EtcpdeError):
    """A structural invariant the pipeline must never violate failed."""


class ConfigError(EtcpdeError):
    """Experiment configuration invalid (unknown key, bad type, bad value)."""


class ZenoWarning(UserWarning):
    """Static trigger fired at consecutive-step rate; run aborted."""
