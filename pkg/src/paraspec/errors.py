"""Exception hierarchy. Every numerical failure carries a stable ``name``
that the CLI prints on stderr before exiting with code 3."""


class ParaspecError(Exception):
    """Base class for all library errors."""


class NumericalFailure(ParaspecError):
    """A computation could not reach its requested accuracy."""


class ConfigError(ParaspecError):
    """Invalid experiment configuration (CLI exit code 2)."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class IterationCapExceeded(NumericalFailure):
    pass


class UnknownObservable(ParaspecError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class QuadratureFailure(NumericalFailure):
    pass


class OdeStepFailure(NumericalFailure):
    pass


class DerivativeUnstable(NumericalFailure):
    pass


class PositivityViolated(NumericalFailure):
    pass


class InsufficientSamples(NumericalFailure):
    pass


class DimensionMismatch(ParaspecError, ValueError):
    pass


class GridTooCoarse(NumericalFailure):
    def __init__(self, message, n=None):
        self.n = n
        super().__init__(message if n is None else f"{message} (at n={n})")


class TooFewPoints(NumericalFailure):
    pass


class NonuniformGrid(NumericalFailure):
    pass


class MissingArtifact(ParaspecError):
    pass
