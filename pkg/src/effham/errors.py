"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (config 2, sampling 3,
numerical 4), so estimator code should raise the most specific class.
"""


class EffhamError(Exception):
    """Base class for all package errors."""


class ConfigurationError(EffhamError, ValueError):
    """Invalid configuration, file, or call contract (exit code 2)."""


class SamplingError(EffhamError, RuntimeError):
    """Monte Carlo stage could not produce a usable result (exit code 3)."""


class OverlapError(SamplingError):
    """Reweighting observable lost overlap with the sampling ensemble."""


class NumericalError(EffhamError, RuntimeError):
    """Downstream numerics failed, e.g. no positive transfer eigenvalues (exit code 4)."""
