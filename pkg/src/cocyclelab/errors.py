"""Exception hierarchy shared by all modules."""


class CocycleError(Exception):
    """Base class for every structured numerical failure raised by cocyclelab."""


class ConfigError(CocycleError, ValueError):
    """A parameter is outside its declared range."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class NonUnimodularDeterminant(CocycleError, ValueError):
    pass


class NotSU2Free(CocycleError):
    def __init__(self, message, x=None):
        super().__init__(message)
        self.x = x


class BadCoupling(ConfigError):
    pass


class StripExceeded(ConfigError):
    pass


class BadEpsilon(ConfigError):
    pass


class BadVerblunsky(ConfigError):
    pass


class BadEta(ConfigError):
    pass


class ConstantTheta(ConfigError):
    pass


class DegenerateProfile(CocycleError):
    pass


class NoConvergence(CocycleError):
    pass


class AmbiguousWinding(CocycleError):
    pass


class MeanObstruction(CocycleError):
    pass


class SmallDivisorBlowup(CocycleError):
    pass


class ZeroOnCircle(CocycleError):
    pass
