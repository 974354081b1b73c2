"""Exception hierarchy shared across the package."""


class GammaRegressError(Exception):
    """Base class for all package errors."""


class NonFiniteDensity(GammaRegressError, ValueError):
    pass


class DegenerateObjective(GammaRegressError, ValueError):
    pass


class QuadratureFailure(GammaRegressError, ArithmeticError):
    pass


class UnsupportedResponse(GammaRegressError, ValueError):
    pass


class TruncationNotConverged(GammaRegressError, ArithmeticError):
    pass


class SingularDesign(GammaRegressError, ValueError):
    pass


class SeparationDetected(GammaRegressError, ArithmeticError):
    pass


class NoDescent(GammaRegressError, ArithmeticError):
    """Line search could not decrease the objective from the starting point."""


class LengthMismatch(GammaRegressError, ValueError):
    pass
