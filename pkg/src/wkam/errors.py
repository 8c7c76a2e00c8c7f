"""Exception hierarchy shared by the solver modules."""


class WkamError(Exception):
    """Base class for every error raised by :mod:`wkam`."""


class SingularMatrixError(WkamError):
    def __init__(self, node, condition):
        self.node = node
        self.condition = condition
        super().__init__(f"singular matrix at grid node {node} (condition number {condition:.3e})")


class ResonanceError(WkamError):
    def __init__(self, k, distance=0.0):
        self.k = tuple(int(v) for v in k)
        self.distance = distance
        super().__init__(f"exact resonance at k={self.k} (|e^(2 pi i k.omega) - lambda| = {distance:.3e})")


class NonZeroAverage(WkamError):
    def __init__(self, average):
        self.average = average
        super().__init__(f"lambda = 1 requires a zero-average right-hand side, got |mean| = {average:.3e}")


class SmallDivisorOverflow(WkamError):
    def __init__(self, k, divisor):
        self.k = tuple(int(v) for v in k)
        self.divisor = divisor
        super().__init__(f"small divisor {divisor:.3e} at k={self.k} is below the configured floor")


class KamError(WkamError):
    """Failure inside the Newton iteration; ``step`` names the algorithm step."""

    def __init__(self, message, step=None):
        self.step = step
        if step:
            message = f"[{step}] {message}"
        super().__init__(message)


class NoContraction(KamError):
    pass


class MaxIterExceeded(KamError):
    pass


class NearSingularSystem(KamError):
    def __init__(self, condition, step="solve average system"):
        self.condition = condition
        super().__init__(f"average system is near singular (condition number {condition:.3e})", step)


class Stagnation(KamError):
    pass


class DivergentSeries(KamError):
    pass


class DomainViolation(KamError):
    def __init__(self, node, step="compute error"):
        self.node = node
        super().__init__(f"embedding leaves the family's domain at grid node {node}", step)


class TaylorDepthError(WkamError):
    pass


class ConfigError(WkamError):
    pass
