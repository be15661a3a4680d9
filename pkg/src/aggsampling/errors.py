"""Exception hierarchy shared by every module of the package."""


class GraphSamplingError(Exception):
    """Base class for all errors raised by aggsampling."""


class NumericalFailure(GraphSamplingError):
    """A computation was rejected by one of the conditioning gates."""


class DefectiveOrIllConditioned(NumericalFailure):
    pass


class SingularSystem(NumericalFailure):
    def __init__(self, message, condition_number=None):
        super().__init__(message)
        self.condition_number = condition_number


class SingularNoiseCovariance(SingularSystem):
    pass


class SingularNormalEquations(SingularSystem):
    pass


class NotPositiveDefinite(NumericalFailure):
    pass


class NoConvergence(NumericalFailure):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConditionsViolated(GraphSamplingError):
    """Recovery conditions failed; ``report`` holds the failing clause."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class DimensionMismatch(GraphSamplingError, ValueError):
    pass


class IndexOutOfRange(GraphSamplingError, IndexError):
    pass


class InvalidSupport(GraphSamplingError, ValueError):
    pass


class InvalidModel(GraphSamplingError, ValueError):
    pass


class ZeroColumn(GraphSamplingError, ValueError):
    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class BudgetExceeded(GraphSamplingError):
    pass


class Infeasible(GraphSamplingError):
    pass


class IsolatedNode(GraphSamplingError, ValueError):
    pass


class ConnectivityBudgetExceeded(GraphSamplingError):
    pass


class MalformedTable(GraphSamplingError, ValueError):
    pass


class IOFailure(GraphSamplingError, OSError):
    pass


class SchemaMismatch(GraphSamplingError, ValueError):
    pass
