"""
距离预言机 - 在锥上批量计算 d∞

ClosedFormOracle 用精确公式; EstimatorOracle 用组合估计器, 区间过宽的点被跳过并计数。
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional

import numpy as np

from app.constants import ESTIMATOR_GAP
from core.algebra.group import GroupElement
from core.control.closed_forms import closed_form_array, supports_closed_form
from core.control.estimates import (
    ConstantEstimate,
    estimate_central_cap,
    estimate_distance,
    estimate_K1,
)
from core.errors import DimensionMismatch
from core.geometry.horizontal import HorizontalSpace
from core.geometry.norms import L1Norm, Norm, PolytopeNorm
from core.io.schemas import EstimatorSettings
from core.lattice.lattice import GeneratingSet, Lattice

logger = logging.getLogger(__name__)


@dataclass
class DistanceBatch:
    """批量距离; skipped 处的值为 nan"""

    values: np.ndarray
    skipped: np.ndarray

    @property
    def skipped_count(self) -> int:
        return int(self.skipped.sum())


class DistanceOracle(ABC):
    """锥空间上 d∞ 的批量求值"""

    def __init__(self, space: HorizontalSpace):
        self.space = space

    @property
    @abstractmethod
    def is_exact(self) -> bool:
        ...

    def _check(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.space.algebra.n:
            raise DimensionMismatch(f"points need {self.space.algebra.n} coordinates")
        return points

    def distances(self, points: np.ndarray) -> DistanceBatch:
        return self._distances(self._check(points))

    @abstractmethod
    def _distances(self, points: np.ndarray) -> DistanceBatch:
        ...


class ClosedFormOracle(DistanceOracle):
    is_exact = True

    def __init__(self, space: HorizontalSpace):
        if not supports_closed_form(space):
            raise DimensionMismatch("no closed form for this space", {"space": repr(space)})
        super().__init__(space)

    def _distances(self, points: np.ndarray) -> DistanceBatch:
        values = closed_form_array(self.space, points)
        return DistanceBatch(values, np.zeros(len(values), dtype=bool))


class EstimatorOracle(DistanceOracle):
    """
    逐点组合估计, 区间宽度 < gap 时取中点

    帽常数与 K₁ 只估计一次, 在所有点之间共享。
    """

    is_exact = False

    def __init__(
        self,
        space: HorizontalSpace,
        settings: Optional[EstimatorSettings] = None,
        seed: int = 0,
        threads: int = 1,
    ):
        super().__init__(space)
        self.settings = settings or EstimatorSettings()
        self.seed = seed
        self.threads = threads
        self._cap: Optional[ConstantEstimate] = None
        self._k1: Optional[ConstantEstimate] = None

    @property
    def gap(self) -> float:
        return self.settings.gap if self.settings.gap is not None else ESTIMATOR_GAP

    def _constants(self) -> None:
        if self._cap is None:
            self._cap = estimate_central_cap(self.space, seed=self.seed)
            self._k1 = estimate_K1(self.space, samples=8, seed=self.seed, cap=self._cap)
            logger.info("estimator constants ready", extra={"cap": self._cap.value, "K1": self._k1.value})

    def _distances(self, points: np.ndarray) -> DistanceBatch:
        self._constants()
        values = np.full(len(points), np.nan)
        skipped = np.zeros(len(points), dtype=bool)
        for b, x in enumerate(points):
            est = estimate_distance(
                self.space,
                GroupElement.from_array(self.space.algebra, x),
                segments=self.settings.segments,
                path_restarts=self.settings.restarts,
                shooting_restarts=self.settings.shooting_restarts,
                seed=self.seed,
                threads=self.threads,
                cap=self._cap,
                k1=self._k1,
            )
            if est.gap < self.gap:
                values[b] = est.midpoint
            else:
                skipped[b] = True
        return DistanceBatch(values, skipped)


def cone_norm_of_generators(S: GeneratingSet) -> Norm:
    """单位球为 conv(π(S)) 的范数; π(S) 恰为 {±e_i} 时返回 L1"""
    proj = S.projections()
    proj = np.unique(proj[np.any(proj != 0, axis=1)], axis=0)
    p = S.lattice.p
    eye = np.eye(p)
    axes = np.unique(np.vstack([eye, -eye]), axis=0)
    if proj.shape == axes.shape and np.array_equal(proj, axes):
        return L1Norm(p)
    return PolytopeNorm(proj)


def cone_oracle(
    lattice: Lattice,
    S: GeneratingSet,
    settings: Optional[EstimatorSettings] = None,
    seed: int = 0,
    threads: int = 1,
) -> DistanceOracle:
    """渐近锥 (V∞, conv(π(S))) 上的预言机, 有闭式时用闭式"""
    space = HorizontalSpace.polarized(lattice.algebra, cone_norm_of_generators(S))
    if supports_closed_form(space):
        return ClosedFormOracle(space)
    return EstimatorOracle(space, settings, seed, threads)
