"""Exception hierarchy shared across the package.

Everything raised deliberately by this package derives from :class:`MmnError`
so callers can catch one base class.  The command line tool maps the leaf
classes onto distinct exit codes.
"""

from __future__ import annotations


class MmnError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(MmnError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigError(MmnError, ValueError):
    """A run configuration file or CLI argument set is invalid."""


class CapabilityError(MmnError):
    """The requested operation is not available for the given model.

    Raised when a density or sampler has no implemented path for a mixing
    law (for example a tabulated law with no sampler, or a closed-form
    request for a law that only supports quadrature).
    """


class NonNormalizableError(MmnError):
    """An exponential tilt of a mixing law fails to be integrable."""


class ContaminatedEstimateError(MmnError):
    """A Monte Carlo estimate contains too many non-finite replicates."""


class WindowError(MmnError):
    """A numerical-integration window clips non-negligible mass."""


class DensityUnderflowWarning(RuntimeWarning):
    """A density evaluation underflowed to zero on the natural scale."""
