"""Exception types shared across the package."""


class LeafPressureError(Exception):
    """Base class; ``code`` is a short machine-readable tag."""

    code = "error"

    def __init__(self, message, **details):
        super().__init__(message)
        self.details = details

    def record(self):
        return {"error": self.code, "message": str(self), **self.details}


class InvalidSystem(LeafPressureError):
    code = "system-invalid"


class DeterminantError(InvalidSystem):
    code = "determinant-not-unimodular"


class SingularMatrixError(InvalidSystem):
    code = "matrix-singular"


class PerturbationTooLarge(InvalidSystem):
    code = "perturbation-too-large"


class RootOfUnityError(InvalidSystem):
    code = "all-eigenvalues-roots-of-unity"


class SplittingError(LeafPressureError):
    code = "splitting-invalid"


class FrameDegenerate(LeafPressureError):
    code = "frame-degenerate"


class DimensionUnsupported(LeafPressureError):
    code = "dimension-unsupported"


class RefinementBudgetExceeded(LeafPressureError):
    code = "refinement-budget-exceeded"


class EmptyCloud(LeafPressureError):
    code = "empty-cloud"


class InsufficientData(LeafPressureError):
    code = "insufficient-data"


class PotentialNotConstant(LeafPressureError):
    code = "potential-not-constant"


class HistoryIncomplete(LeafPressureError):
    code = "history-incomplete"


class LabelExplosion(LeafPressureError):
    code = "label-explosion"


class PreconditionError(LeafPressureError):
    code = "precondition-violated"


class GridTooCoarse(LeafPressureError):
    code = "grid-too-coarse"


class ConfigError(LeafPressureError):
    code = "validation-error"


class ContractViolation(LeafPressureError):
    code = "contract-violation"


class ParseError(ConfigError):
    code = "parse-error"


class UnknownPreset(ConfigError):
    code = "unknown-preset"
