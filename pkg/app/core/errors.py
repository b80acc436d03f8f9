"""
Error types shared by every module.

Each error carries a machine-readable ``code`` and the process exit status the
CLI reports for it: 2 for invalid inputs, 3 for numerical contracts broken
while computing.
"""
from typing import Optional


class InterventionError(Exception):
    """Base class for all library errors"""

    exit_status = 1

    def __init__(self, code: str, detail: str):
        super().__init__(f"{code}: {detail}")
        self.code = code
        self.detail = detail

    def to_dict(self) -> dict:
        return {"error": self.code, "message": self.detail, "exit_status": self.exit_status}


class ValidationError(InterventionError):
    """Supplied data breaks an invariant of its type"""

    exit_status = 2


class NumericalError(InterventionError):
    """A numerical contract failed during computation"""

    exit_status = 3


# Validation failures
class NotHermitian(ValidationError):
    def __init__(self, detail: str):
        super().__init__("NotHermitian", detail)


class NotPositive(ValidationError):
    def __init__(self, detail: str):
        super().__init__("NotPositive", detail)


class BadTrace(ValidationError):
    def __init__(self, detail: str):
        super().__init__("BadTrace", detail)


class NonFinite(ValidationError):
    def __init__(self, detail: str):
        super().__init__("NonFinite", detail)


class DimMismatch(ValidationError):
    def __init__(self, detail: str):
        super().__init__("DimMismatch", detail)


class UnknownOutcome(ValidationError):
    def __init__(self, label: str, known: Optional[list] = None):
        detail = f"no outcome labelled {label!r}"
        if known:
            detail += f" (known: {', '.join(known)})"
        super().__init__("UnknownOutcome", detail)
        self.label = label


class HeterogeneousOutputDims(ValidationError):
    def __init__(self, detail: str):
        super().__init__("HeterogeneousOutputDims", detail)


class BadPadding(ValidationError):
    def __init__(self, detail: str):
        super().__init__("BadPadding", detail)


class NotIsometric(ValidationError):
    def __init__(self, deviation: float):
        super().__init__("NotIsometric", f"U U^dagger deviates from identity by {deviation:.6g}")
        self.deviation = deviation


class IncompleteIntervention(ValidationError):
    def __init__(self, deviation: float, where: str = "intervention"):
        super().__init__(
            "IncompleteIntervention",
            f"{where}: completeness sum A^dagger A = 1 violated, max deviation {deviation:.6g}",
        )
        self.deviation = deviation


class DimensionCapExceeded(ValidationError):
    def __init__(self, dim: int, cap: int):
        super().__init__("DimensionCapExceeded", f"dimension {dim} exceeds cap {cap}")


class NegativeTime(ValidationError):
    def __init__(self, detail: str):
        super().__init__("NegativeTime", detail)


class StepTooLarge(ValidationError):
    def __init__(self, detail: str):
        super().__init__("StepTooLarge", detail)


class SchemaError(ValidationError):
    def __init__(self, detail: str):
        super().__init__("SchemaError", detail)


class ScenarioError(ValidationError):
    def __init__(self, detail: str):
        super().__init__("ScenarioError", detail)


class OutputFailed(ValidationError):
    def __init__(self, detail: str):
        super().__init__("OutputFailed", detail)


# Numerical failures
class CompletionFailure(NumericalError):
    def __init__(self, detail: str):
        super().__init__("CompletionFailure", detail)


class PositivityLoss(NumericalError):
    def __init__(self, min_eigenvalue: float):
        super().__init__("PositivityLoss", f"minimum eigenvalue {min_eigenvalue:.6g} below tolerance")
        self.min_eigenvalue = min_eigenvalue


class ZeroProbabilityBranch(NumericalError):
    def __init__(self, label: str, probability: float):
        super().__init__("ZeroProbabilityBranch", f"cannot condition on {label!r} with probability {probability:.3g}")


class ProbabilityOutOfRange(NumericalError):
    def __init__(self, label: str, probability: float):
        super().__init__("ProbabilityOutOfRange", f"outcome {label!r} has probability {probability:.6g}")
