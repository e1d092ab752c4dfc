"""
球差异 - 放缩字球与锥单位球之间的两个可计算替代量

- 逐点: 球面 {ρ = n} 上 sup |ρ(g) - d∞(g)|
- Hausdorff: δ_{1/n}(B_ρ(n)) 与 B_{d∞}(1) 的点云在 d∞ 下的对称 Hausdorff 距离
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.spatial.distance import cdist
from scipy.stats import linregress

from app.constants import DiscrepancyMethod
from core.algebra.group import dilate_array, left_difference_array
from core.control.extremals import ExtremalFlow
from core.convergence.oracles import DistanceOracle
from core.errors import EmptyCloud, EstimatorGapTooWide, InsufficientData, InvalidParameter
from core.lattice.lattice import Element, GeneratingSet, Lattice
from core.lattice.word_metric import BallTable, bfs_ball

logger = logging.getLogger(__name__)


@dataclass
class PointwiseResult:
    n: int
    value: float
    samples: int
    skipped: int
    worst: Optional[Element] = None

    @property
    def skipped_fraction(self) -> float:
        total = self.samples + self.skipped
        return self.skipped / total if total else 0.0


def sample_sphere(
    table: BallTable,
    n: int,
    full_limit: int = 100_000,
    sample_size: int = 10_000,
    seed: int = 0,
) -> List[Element]:
    """球面不超过 full_limit 个元素时全取, 否则固定种子均匀抽取 sample_size 个"""
    sphere = table.sphere(n)
    if len(sphere) <= full_limit:
        return sphere
    rng = np.random.default_rng(seed)
    picks = np.sort(rng.choice(len(sphere), size=sample_size, replace=False))
    return [sphere[i] for i in picks]


def pointwise_discrepancy(
    L: Lattice,
    S: GeneratingSet,
    n: int,
    sample: int,
    oracle: DistanceOracle,
    table: Optional[BallTable] = None,
    full_limit: int = 100_000,
    budget: int = 200_000_000,
    seed: int = 0,
) -> PointwiseResult:
    """
    max_{ρ(g)=n} |n - d∞(embed g)|

    Raises:
        BudgetExceeded: BFS 超出预算
        EstimatorGapTooWide: 所有样本点都因区间过宽被跳过
    """
    if n < 0:
        raise InvalidParameter("radius must be nonnegative", {"n": n})
    if n == 0:
        return PointwiseResult(0, 0.0, 1, 0)
    if table is None or table.radius < n:
        table = bfs_ball(L, S, n, budget)
    points = sample_sphere(table, n, full_limit, sample, seed)
    batch = oracle.distances(L.embed_array(points))
    kept = ~batch.skipped
    if not np.any(kept):
        raise EstimatorGapTooWide(
            "every sampled point exceeded the estimator gap", {"n": n, "skipped": int(batch.skipped.sum())}
        )
    errors = np.abs(n - batch.values[kept])
    worst = int(np.argmax(errors))
    kept_points = [g for g, k in zip(points, kept) if k]
    return PointwiseResult(n, float(errors[worst]), int(kept.sum()), batch.skipped_count, kept_points[worst])


def scaled_ball_cloud(L: Lattice, table: BallTable, n: int) -> np.ndarray:
    """δ_{1/n}(embed(B_ρ(n)))"""
    if n <= 0:
        raise InvalidParameter("scaling radius must be positive", {"n": n})
    points = [g for g, length in table.lengths.items() if length <= n]
    return dilate_array(L.algebra, 1.0 / n, L.embed_array(points))


def _fiber_interval(oracle: DistanceOracle, base: np.ndarray, direction: np.ndarray, steps: int = 40) -> float:
    x = base.copy()
    hi = 1.0
    while oracle.distances(x + hi * direction).values[0] <= 1.0 and hi < 1e6:
        hi *= 2.0
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if oracle.distances(x + mid * direction).values[0] <= 1.0:
            lo = mid
        else:
            hi = mid
    return lo


def cone_ball_cloud(
    oracle: DistanceOracle,
    resolution: float = 0.1,
    samples: int = 4000,
    seed: int = 0,
) -> np.ndarray:
    """
    B_{d∞}(1) 的点云

    精确预言机: 水平网格 (步长 resolution), 每个网格点上沿中心方向二分出纤维端点,
    再以 resolution² 的步长填充纤维。否则取 T ∈ (0, 1] 的单位速度极值端点。
    """
    space = oracle.space
    A = space.algebra
    p, m = A.p, A.m
    if resolution <= 0:
        raise InvalidParameter("resolution must be positive", {"resolution": resolution})
    if not oracle.is_exact:
        rng = np.random.default_rng(seed)
        xi = rng.standard_normal((samples, A.n))
        dual = np.atleast_1d(space.norm.dual(xi[:, :p]))
        xi[:, :p] /= dual[:, None]
        T = rng.uniform(0.0, 1.0, samples)
        return np.vstack([np.zeros(A.n), ExtremalFlow(A, space.norm).endpoints(xi, T)])

    reach = 1.0 / float(np.min(np.atleast_1d(space.norm.evaluate(np.eye(p)))))
    axis = np.arange(-np.floor(reach / resolution), np.floor(reach / resolution) + 1) * resolution
    grid = np.array(np.meshgrid(*[axis] * p, indexing="ij")).reshape(p, -1).T
    grid = grid[np.atleast_1d(space.norm.evaluate(grid)) <= 1.0 + 1e-12]
    rows = []
    directions = np.eye(m) if m else np.zeros((0, 0))
    for a in grid:
        base = np.concatenate([a, np.zeros(m)])
        rows.append(base)
        for e in directions:
            step = np.concatenate([np.zeros(p), e])
            top = _fiber_interval(oracle, base, step)
            bottom = _fiber_interval(oracle, base, -step)
            for z in np.arange(-bottom, top + 1e-15, resolution ** 2):
                if z != 0:
                    rows.append(base + z * step)
            rows.extend([base + top * step, base - bottom * step])
    return np.unique(np.array(rows), axis=0)


def hausdorff_discrepancy(
    cloud_a: np.ndarray,
    cloud_b: np.ndarray,
    oracle: Optional[DistanceOracle] = None,
    chunk: int = 256,
) -> float:
    """
    对称 Hausdorff 距离; 给定精确预言机时用 d∞(a⁻¹b), 否则用指数坐标下的欧氏距离
    """
    A = np.atleast_2d(np.asarray(cloud_a, dtype=float))
    B = np.atleast_2d(np.asarray(cloud_b, dtype=float))
    if A.size == 0 or B.size == 0:
        raise EmptyCloud("Hausdorff distance needs two nonempty clouds")
    if oracle is None:
        D = cdist(A, B)
        return float(max(D.min(axis=1).max(), D.min(axis=0).max()))
    if not oracle.is_exact:
        raise InvalidParameter("pairwise Hausdorff distances need an exact oracle")
    algebra = oracle.space.algebra
    a_to_b = np.full(len(A), np.inf)
    b_to_a = np.full(len(B), np.inf)
    for start in range(0, len(A), chunk):
        block = A[start:start + chunk]
        diff = left_difference_array(algebra, block[:, None, :], B[None, :, :])
        D = oracle.distances(diff.reshape(-1, algebra.n)).values.reshape(len(block), len(B))
        a_to_b[start:start + chunk] = D.min(axis=1)
        b_to_a = np.minimum(b_to_a, D.min(axis=0))
    return float(max(a_to_b.max(), b_to_a.max()))


# 剖面与指数拟合

@dataclass
class ExponentFit:
    alpha: float
    stderr: float
    used: List[int]
    excluded: List[int]

    def to_dict(self) -> dict:
        return {"alpha": self.alpha, "stderr": self.stderr, "used": self.used, "excluded": self.excluded}


@dataclass
class DiscrepancyRow:
    n: int
    D: float
    samples: int
    skipped: int
    method: DiscrepancyMethod

    @property
    def scaled(self) -> float:
        return self.D / self.n if self.n else 0.0


@dataclass
class DiscrepancyProfile:
    """按 n 严格递增的差异剖面"""

    method: DiscrepancyMethod
    rows: List[DiscrepancyRow] = field(default_factory=list)
    fit: Optional[ExponentFit] = None
    scaled_fit: Optional[ExponentFit] = None

    def add(self, row: DiscrepancyRow) -> None:
        if self.rows and row.n <= self.rows[-1].n:
            raise InvalidParameter("profile radii must be strictly increasing", {"n": row.n})
        if row.D < 0:
            raise InvalidParameter("discrepancy must be nonnegative", {"D": row.D})
        self.rows.append(row)

    @property
    def radii(self) -> List[int]:
        return [r.n for r in self.rows]

    @property
    def values(self) -> List[float]:
        return [r.D for r in self.rows]

    @property
    def skipped_fraction(self) -> float:
        total = sum(r.samples + r.skipped for r in self.rows)
        return sum(r.skipped for r in self.rows) / total if total else 0.0

    @property
    def exact_agreement(self) -> bool:
        return bool(self.rows) and all(r.D == 0 for r in self.rows)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "n": [r.n for r in self.rows],
                "D": [r.D for r in self.rows],
                "scaled": [r.scaled for r in self.rows],
                "samples": [r.samples for r in self.rows],
                "skipped": [r.skipped for r in self.rows],
                "method": [r.method.value for r in self.rows],
            }
        )


def fit_exponent(
    profile: Union[DiscrepancyProfile, Sequence[Sequence[float]]],
    scaled: bool = False,
) -> ExponentFit:
    """
    log D(n) 对 log n 的最小二乘斜率取负; D(n) = 0 或 n = 0 的行被排除

    Raises:
        InsufficientData: 可用行少于 3
    """
    if isinstance(profile, DiscrepancyProfile):
        pairs = [(r.n, r.scaled if scaled else r.D) for r in profile.rows]
    else:
        pairs = [(int(n), float(D)) for n, D in profile]
    used = [(n, D) for n, D in pairs if n > 0 and D > 0]
    excluded = [n for n, D in pairs if not (n > 0 and D > 0)]
    if len(used) < 3:
        raise InsufficientData("exponent fit needs at least 3 rows with D > 0", {"usable": len(used)})
    n, D = np.array(used, dtype=float).T
    result = linregress(np.log(n), np.log(D))
    return ExponentFit(float(-result.slope), float(result.stderr), [int(x) for x in n], excluded)
