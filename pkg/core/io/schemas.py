"""
文件格式 - 代数、范数、实验配置的 pydantic 模型
"""

import json
from pathlib import Path
from typing import Any, List, Optional, Type, TypeVar, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from app.config import settings
from app.constants import DiscrepancyMethod, LatticePreset, NormVariant
from core.errors import SchemaError

Number = Union[int, float]
ModelT = TypeVar("ModelT", bound=BaseModel)


class BracketEntry(BaseModel):
    """一条结构常数 c_ij^k (下标从 1 开始)"""

    model_config = ConfigDict(extra="forbid")

    i: int
    j: int
    k: int
    c: Number


class AlgebraSpec(BaseModel):
    """代数文件: {"n", "p", "brackets", "names"}"""

    model_config = ConfigDict(extra="forbid")

    n: int
    p: int
    brackets: List[BracketEntry] = Field(default_factory=list)
    names: Optional[List[str]] = None


class NormSpec(BaseModel):
    """范数文件; basis 可选 (n×q 列矩阵, 缺省为 V∞ 本身)"""

    model_config = ConfigDict(extra="forbid")

    variant: NormVariant
    vertices: Optional[List[List[float]]] = None
    gram: Optional[List[List[float]]] = None
    basis: Optional[List[List[float]]] = None

    @field_validator("variant", mode="before")
    @classmethod
    def _lower(cls, value: Any) -> Any:
        return value.lower() if isinstance(value, str) else value


class EstimatorSettings(BaseModel):
    """距离估计器参数"""

    model_config = ConfigDict(extra="forbid")

    segments: int = 16
    restarts: int = 2
    shooting_restarts: int = 8
    gap: float = Field(default_factory=lambda: settings.estimator_gap)


class ExperimentConfig(BaseModel):
    """收敛实验配置"""

    model_config = ConfigDict(extra="forbid")

    name: str = "experiment"
    lattice: LatticePreset
    dimension: Optional[int] = None
    algebra: Optional[str] = None
    generators: Union[str, List[List[int]]] = "standard"
    schedule: List[int]
    method: DiscrepancyMethod = DiscrepancyMethod.POINTWISE
    sample_size: Optional[int] = None
    full_sphere_limit: Optional[int] = None
    hausdorff_resolution: float = 0.1
    dump_clouds: bool = False
    estimator: EstimatorSettings = Field(default_factory=EstimatorSettings)
    seed: Optional[int] = None

    @field_validator("schedule")
    @classmethod
    def _increasing(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("schedule must not be empty")
        if any(n < 0 for n in value):
            raise ValueError("schedule radii must be nonnegative")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError("schedule must be strictly increasing")
        return value


def load_model(path: Union[str, Path], model: Type[ModelT]) -> ModelT:
    """读取 JSON 文件并校验; 任何格式问题都转成 SchemaError"""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            raw = json.load(f)
    except FileNotFoundError as e:
        raise SchemaError(f"file not found: {path}", {"path": str(path)}) from e
    except json.JSONDecodeError as e:
        raise SchemaError(f"invalid JSON in {path}: {e}", {"path": str(path)}) from e
    return parse_model(raw, model, source=str(path))


def parse_model(raw: Any, model: Type[ModelT], source: str = "<memory>") -> ModelT:
    """校验已解析的数据"""
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise SchemaError(
            f"{model.__name__} validation failed for {source}",
            {"path": source, "errors": e.errors(include_url=False, include_context=False)},
        ) from e
