"""
Exception hierarchy for amp_cs.

Every exception carries an ``error_type`` string. The same strings are used by
the ``ReportError`` records that batch commands collect instead of raising.
"""

from typing import Any, Dict, List, Optional


class AmpCsError(Exception):
    error_type = "AMP_CS_ERROR"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}


class DimensionError(AmpCsError):
    error_type = "DIMENSION_MISMATCH"


class ParameterError(AmpCsError):
    error_type = "INVALID_PARAMETER"


class ContractError(AmpCsError):
    error_type = "CONTRACT_VIOLATION"


class SingularMatrixError(AmpCsError):
    error_type = "SINGULAR_MATRIX"


class DivergenceError(AmpCsError):
    error_type = "AMP_DIVERGED"

    def __init__(self, message: str, trace: List[float]):
        super().__init__(message, details={"iterations": len(trace)})
        self.trace = list(trace)


class NumericError(AmpCsError):
    error_type = "NON_FINITE"

    def __init__(self, message: str, stage: Optional[int] = None):
        super().__init__(message, details={"stage": stage})
        self.stage = stage


class DataError(AmpCsError):
    error_type = "DATA_ERROR"


class CheckpointError(AmpCsError):
    error_type = "CHECKPOINT_LOAD"

    def __init__(self, message: str, defect: str):
        super().__init__(message, details={"defect": defect})
        self.defect = defect


class StaleGradientError(AmpCsError):
    error_type = "STALE_GRADIENT"


def shape_mismatch(op: str, *shapes) -> DimensionError:
    """Build a DimensionError naming every offending shape."""
    listed = " vs ".join(str(tuple(s)) for s in shapes)
    return DimensionError(f"{op}: shape mismatch {listed}",
                          details={"op": op, "shapes": [tuple(s) for s in shapes]})
