"""Exception types raised by the library."""


class MFACError(Exception):
    """Base class for every error raised by mfaclab."""


class IllPosedIdentityError(MFACError, ValueError):
    """A polynomial identity cannot be solved for the requested unknown."""


class GainSingularError(MFACError, ZeroDivisionError):
    """The instantaneous control gain is too close to zero to invert."""


class CovarianceBreakdownError(MFACError, ArithmeticError):
    """The RLS covariance matrix stopped being positive definite."""


class DivergenceError(MFACError, OverflowError):
    """A simulated signal left the admissible range."""


class ConfigError(MFACError, ValueError):
    """Malformed experiment configuration.

    ``key`` names the offending entry when one can be singled out.
    """

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
