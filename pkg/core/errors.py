"""
错误类型 - 所有领域错误与预算错误

CLI 根据错误族决定退出码: DomainError -> 2, BudgetExceeded -> 3。
"""

from typing import Any, Dict, Optional


class NilConeError(Exception):
    """所有项目错误的基类"""

    code = "nilcone_error"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details: Dict[str, Any] = details or {}

    def to_dict(self) -> Dict[str, Any]:
        """转换为结构化字典 (CLI 写入 stderr)"""
        return {
            "error": self.code,
            "type": type(self).__name__,
            "message": self.message,
            "details": self.details,
        }


class DomainError(NilConeError, ValueError):
    """输入或数学前提不成立"""

    code = "domain_error"


class AntisymmetryViolation(DomainError):
    code = "antisymmetry_violation"


class NotTwoStep(DomainError):
    code = "not_two_step"


class BadDimensions(DomainError):
    code = "bad_dimensions"


class DimensionMismatch(DomainError):
    code = "dimension_mismatch"


class InvalidNorm(DomainError):
    code = "invalid_norm"


class InvalidHorizontalSpace(DomainError):
    code = "invalid_horizontal_space"


class ZeroCovector(DomainError):
    code = "zero_covector"


class InfeasibleFiber(DomainError):
    code = "infeasible_fiber"


class NonUnitDirection(DomainError):
    code = "non_unit_direction"


class InvalidParameter(DomainError):
    code = "invalid_parameter"


class WitnessNotSingular(DomainError):
    code = "witness_not_singular"


class MomentaVanished(DomainError):
    code = "momenta_vanished"


class NoConvergence(DomainError):
    code = "no_convergence"


class SeedInfeasible(DomainError):
    code = "seed_infeasible"


class EstimatorGapTooWide(DomainError):
    code = "estimator_gap_too_wide"


class EmptyCloud(DomainError):
    code = "empty_cloud"


class InsufficientData(DomainError):
    code = "insufficient_data"


class LatticeError(DomainError):
    code = "lattice_error"


class SchemaError(DomainError):
    code = "schema_error"


class BudgetExceeded(NilConeError):
    """BFS 超出元素预算; 携带已完成的半径和部分结果"""

    code = "budget_exceeded"

    def __init__(
        self,
        message: str,
        completed_radius: int,
        partial: Any = None,
        details: Optional[Dict[str, Any]] = None,
    ):
        merged = {"completed_radius": completed_radius}
        merged.update(details or {})
        super().__init__(message, merged)
        self.completed_radius = completed_radius
        self.partial = partial
