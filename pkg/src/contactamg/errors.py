"""Exception types shared across the package."""


class ContactAmgError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(ContactAmgError):
    """Operand shapes are inconsistent."""


class SingularMatrixError(ContactAmgError):
    """A factorization hit a zero pivot or a singular lumped diagonal."""


class AssemblyError(ContactAmgError):
    """Mesh or element data is invalid (e.g. inverted element Jacobian)."""


class ConfigError(ContactAmgError):
    """A configuration value or file is invalid."""


class SetupError(ContactAmgError):
    """Hierarchy construction cannot proceed (e.g. empty aggregation)."""
