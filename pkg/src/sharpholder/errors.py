"""Exception hierarchy shared by all modules."""


class SharpHolderError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SharpHolderError):
    pass


# coefficient fields
class InvalidProfile(SharpHolderError, ValueError):
    pass


class PointOutsideDomain(SharpHolderError, ValueError):
    pass


class AngularCenterSingularity(SharpHolderError, ValueError):
    pass


class ValidationError(SharpHolderError):
    pass


class DeterminantViolation(ValidationError):
    pass


class NonPositiveDefinite(ValidationError):
    pass


# Wirtinger inequality
class ZeroAmplitude(SharpHolderError, ValueError):
    pass


class ConstraintViolated(SharpHolderError, ValueError):
    pass


class NumericalError(SharpHolderError):
    pass


class EigenIterationDiverged(NumericalError):
    pass


# exponent estimation and the sharp example
class CircleOutsideDomain(SharpHolderError, ValueError):
    pass


class QuadratureBreakdown(NumericalError):
    pass


# finite elements
class InvalidMeshSize(SharpHolderError, ValueError):
    pass


class SolverStagnation(NumericalError):
    pass


class SingularSystem(NumericalError):
    pass


# regularity meter
class CenterOutsideDomain(SharpHolderError, ValueError):
    pass


class DegenerateWindow(SharpHolderError, ValueError):
    pass
