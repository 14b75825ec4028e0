"""Exception taxonomy shared across the package.

The CLI maps these onto exit codes: argument problems exit 2, input
format/data problems exit 3, degeneracy and connectivity problems exit 4.
"""


class CityHierError(Exception):
    """Base class for all package errors."""

    exit_code = 1


class ArgumentError(CityHierError):
    """Invalid argument value or combination."""

    exit_code = 2


class GeometryError(ArgumentError):
    """Synthetic-geometry parameters are infeasible (clusters would overlap)."""


class FormatError(CityHierError):
    """A file does not conform to its declared format."""

    exit_code = 3


class DataError(CityHierError):
    """A well-formed input carries invalid values."""

    exit_code = 3


class CapacityError(CityHierError):
    """Declared input size exceeds the configured memory envelope."""

    exit_code = 3


class MissingReferenceError(DataError):
    """An identifier refers to an entity that does not exist."""


class DomainError(DataError):
    """A coordinate lies outside its valid range."""


class ConnectivityError(CityHierError):
    """A required path does not exist (unreachable city or node)."""

    exit_code = 4


class SnapError(ConnectivityError):
    """One or more cities lie farther than the snap radius from any road node."""


class DegenerateFitError(CityHierError):
    """The regression design admits no unique least-squares solution."""

    exit_code = 4
