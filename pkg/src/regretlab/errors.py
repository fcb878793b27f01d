"""Exception hierarchy shared by every regretlab module."""


class RegretLabError(Exception):
    """Base class for all errors raised by regretlab."""


class DimensionError(RegretLabError, ValueError):
    """Two vectors (or a vector and a matrix) have incompatible shapes."""


class NonFiniteError(RegretLabError, ValueError):
    """A vector that must be finite contains NaN or Inf."""


class PreconditionError(RegretLabError, ValueError):
    """The hypotheses of a theorem or lemma are not met by the inputs.

    Raised instead of reporting a violation, so that a failing certificate
    always means the inequality itself was broken.
    """


class ConvergenceError(RegretLabError, RuntimeError):
    """An iterative procedure hit its iteration cap.

    ``estimate`` carries the last iterate or value reached.
    """

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate


class DivergenceError(RegretLabError, RuntimeError):
    """An optimizer produced a non-finite iterate.

    ``partial_trace`` holds every step recorded before the blow-up.
    """

    def __init__(self, message, partial_trace=None):
        super().__init__(message)
        self.partial_trace = partial_trace


class ConfigError(RegretLabError, ValueError):
    """A configuration is invalid. ``errors`` lists every problem found."""

    def __init__(self, errors):
        if isinstance(errors, str):
            errors = [errors]
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
