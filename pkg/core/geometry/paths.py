"""
水平路径 - 分段常值控制及其构造

路径由 (单位方向, 时长) 段组成, 方向用 V 坐标表示。二步群中折线端点可由 BCH 精确算出,
所以光滑曲线 (圆) 用细分折线表示。
"""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import linprog

from app.config import settings
from app.constants import UNIT_TOLERANCE
from core.algebra.group import GroupElement, bch_multiply, product_array
from core.algebra.structure import Scalar, is_exact_sequence
from core.errors import (
    DimensionMismatch,
    InvalidParameter,
    NonUnitDirection,
    SeedInfeasible,
)
from core.geometry.horizontal import HorizontalSpace, projected_norm
from core.geometry.norms import EllipsoidNorm

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PathSegment:
    """一段: exp(s·direction), s ∈ [0, duration]"""

    direction: Tuple[Scalar, ...]
    duration: Scalar

    @property
    def is_exact(self) -> bool:
        return is_exact_sequence(self.direction) and is_exact_sequence((self.duration,))

    def vector(self) -> np.ndarray:
        return np.array([float(x) for x in self.direction]) * float(self.duration)


def _exact_sqrt(value: Scalar) -> Optional[Fraction]:
    if not isinstance(value, (Fraction, Integral)):
        return None
    value = Fraction(value)
    num, den = math.isqrt(value.numerator), math.isqrt(value.denominator)
    if num * num == value.numerator and den * den == value.denominator:
        return Fraction(num, den)
    return None


class HorizontalPath:
    """
    水平路径

    Args:
        space: 水平子空间 (方向所在的 V 及其范数)
        segments: 段列表, duration>0 的段方向须为单位向量
        base: 起点, 缺省为单位元
    """

    def __init__(
        self,
        space: HorizontalSpace,
        segments: Iterable[PathSegment] = (),
        base: Optional[GroupElement] = None,
    ):
        self.space = space
        self.segments: Tuple[PathSegment, ...] = tuple(segments)
        self.base = base
        for seg in self.segments:
            if len(seg.direction) != space.q:
                raise DimensionMismatch(
                    f"segment direction needs {space.q} coefficients", {"got": len(seg.direction)}
                )
            if seg.duration < 0:
                raise InvalidParameter("segment durations must be nonnegative")
            if seg.duration > 0:
                value = space.norm.evaluate(np.array([float(x) for x in seg.direction]))
                if abs(value - 1.0) > UNIT_TOLERANCE:
                    raise NonUnitDirection(
                        "segment directions must have unit norm", {"norm": value}
                    )

    @classmethod
    def from_controls(
        cls,
        space: HorizontalSpace,
        controls: Iterable[Tuple[Sequence[float], float]],
        base: Optional[GroupElement] = None,
    ) -> "HorizontalPath":
        """(向量, 时长) -> 单位方向段; 零向量被丢弃"""
        segments = []
        for vector, duration in controls:
            v = np.asarray(vector, dtype=float)
            size = space.norm.evaluate(v)
            if size <= 0 or duration <= 0:
                continue
            segments.append(PathSegment(tuple(v / size), float(duration) * size))
        return cls(space, segments, base)

    @classmethod
    def from_increments(cls, space: HorizontalSpace, increments: np.ndarray) -> "HorizontalPath":
        """每行一个位移 W_s = duration·direction"""
        return cls.from_controls(space, ((w, 1.0) for w in np.asarray(increments, dtype=float)))

    @classmethod
    def straight(cls, space: HorizontalSpace, vector: Sequence[float]) -> "HorizontalPath":
        """t ↦ exp(t v/‖v‖), t ∈ [0, ‖v‖]"""
        return cls.from_controls(space, [(vector, 1.0)])

    @property
    def is_exact(self) -> bool:
        return all(seg.is_exact for seg in self.segments) and (self.base is None or self.base.is_exact)

    @property
    def length(self) -> Scalar:
        """Σ duration (方向为单位向量)"""
        if self.is_exact:
            return sum((Fraction(seg.duration) for seg in self.segments), Fraction(0))
        return float(sum(float(seg.duration) for seg in self.segments))

    def increments(self) -> np.ndarray:
        """每段在 n 中的位移, 形状 (k, n)"""
        if not self.segments:
            return np.zeros((0, self.space.algebra.n))
        return self.space.embed(np.array([seg.vector() for seg in self.segments]))

    def concatenate(self, other: "HorizontalPath") -> "HorizontalPath":
        if other.space is not self.space and other.space.q != self.space.q:
            raise DimensionMismatch("paths live in different horizontal spaces")
        return HorizontalPath(self.space, self.segments + other.segments, self.base)

    def merged(self, atol: float = 1e-12) -> "HorizontalPath":
        """合并方向相同的相邻段, 去掉零长度段"""
        out: List[PathSegment] = []
        for seg in self.segments:
            if seg.duration == 0:
                continue
            if out and np.allclose(
                np.array(out[-1].direction, dtype=float), np.array(seg.direction, dtype=float), atol=atol
            ):
                out[-1] = PathSegment(out[-1].direction, out[-1].duration + seg.duration)
            else:
                out.append(seg)
        return HorizontalPath(self.space, out, self.base)

    def to_frame(self) -> pd.DataFrame:
        """CSV 行: 方向各分量 + duration"""
        columns = [f"d{i + 1}" for i in range(self.space.q)]
        rows = [[float(x) for x in seg.direction] + [float(seg.duration)] for seg in self.segments]
        return pd.DataFrame(rows, columns=columns + ["duration"])

    def __len__(self) -> int:
        return len(self.segments)

    def __repr__(self) -> str:
        return f"HorizontalPath(segments={len(self.segments)}, length={float(self.length):.6g})"


def path_endpoint(c: HorizontalPath) -> GroupElement:
    """各段 exp(duration·direction) 依次左乘到起点"""
    A = c.space.algebra
    if c.is_exact:
        basis = [[Fraction(float(x)) for x in row] for row in c.space.basis]
        g = c.base or GroupElement.identity(A)
        for seg in c.segments:
            w = tuple(
                sum((basis[i][j] * Fraction(seg.direction[j]) for j in range(c.space.q)), Fraction(0))
                * Fraction(seg.duration)
                for i in range(A.n)
            )
            g = bch_multiply(g, GroupElement(A, w))
        return g
    end = GroupElement.from_array(A, product_array(A, c.increments()))
    if c.base is not None:
        end = bch_multiply(c.base.to_float(), end)
    return end


def subdivide(c: HorizontalPath, M: int) -> List[HorizontalPath]:
    """
    把路径按长度等分为 M 段

    Returns:
        M 条从单位元出发的子路径, 端点之积等于 c 的端点增量
    """
    if not isinstance(M, int) or M < 1:
        raise InvalidParameter("M must be a positive integer", {"M": M})
    t = c.length
    exact = c.is_exact
    boundaries = [(Fraction(k) * t / M) if exact else k * float(t) / M for k in range(M + 1)]
    boundaries[-1] = t
    sliver = 0 if exact else 1e-15 * max(float(t), 1.0)

    pieces: List[List[PathSegment]] = [[] for _ in range(M)]
    start = Fraction(0) if exact else 0.0
    k = 0
    for seg in c.segments:
        end = start + seg.duration
        while k < M:
            lo = max(start, boundaries[k])
            hi = min(end, boundaries[k + 1])
            if hi - lo > sliver:
                pieces[k].append(PathSegment(seg.direction, hi - lo))
            if boundaries[k + 1] <= end and k < M - 1:
                k += 1
            else:
                break
        start = end
    return [HorizontalPath(c.space, segs) for segs in pieces]


def count_irregular_segments(c: HorizontalPath, M: int, R: float) -> int:
    """
    |{i : ‖π(h_i)‖∞ < R·t/M}|, h_i 为第 i 个子路径的端点

    子路径长度 t/M 代替 d(h_i) (它是 d(h_i) 的上界)。
    """
    if not 0 < R <= 1:
        raise InvalidParameter("R must lie in (0, 1]", {"R": R})
    pieces = subdivide(c, M)
    threshold = float(R) * float(c.length) / M * (1.0 - 1e-9)
    count = 0
    for piece in pieces:
        h = path_endpoint(piece)
        w = np.array([float(x) for x in h.horizontal])
        if projected_norm(c.space, w) < threshold:
            count += 1
    return count


def _check_unit(space: HorizontalSpace, vector: Sequence[Scalar], name: str) -> None:
    value = space.norm.evaluate(np.array([float(x) for x in vector]))
    if abs(value - 1.0) > UNIT_TOLERANCE:
        raise NonUnitDirection(f"{name} must have unit norm", {name: value})


def box_path(space: HorizontalSpace, X: Sequence[Scalar], Y: Sequence[Scalar], r: Scalar) -> HorizontalPath:
    """
    四段路径 (-X,√r), (-Y,√r), (X,√r), (Y,√r)

    端点 exp(r[X, Y]), 长度 4√r。X, Y 与 r 都精确且 r 为完全平方时保持精确。
    """
    _check_unit(space, X, "X")
    _check_unit(space, Y, "Y")
    if r < 0:
        raise InvalidParameter("r must be nonnegative", {"r": str(r)})
    if r == 0:
        return HorizontalPath(space)
    root = _exact_sqrt(r)
    if root is not None and is_exact_sequence(X) and is_exact_sequence(Y):
        X = tuple(Fraction(x) for x in X)
        Y = tuple(Fraction(y) for y in Y)
        side: Scalar = root
    else:
        X = tuple(float(x) for x in X)
        Y = tuple(float(y) for y in Y)
        side = math.sqrt(float(r))
    neg = lambda v: tuple(-x for x in v)  # noqa: E731
    return HorizontalPath(
        space,
        [PathSegment(neg(X), side), PathSegment(neg(Y), side), PathSegment(X, side), PathSegment(Y, side)],
    )


def square_loop(space: HorizontalSpace, t: Scalar) -> HorizontalPath:
    """长度 t 的正方形闭路 (边长 t/4), 在 X_1, X_2 平面内"""
    if space.q < 2:
        raise DimensionMismatch("square loop needs two horizontal directions")
    e1 = [Fraction(0)] * space.q
    e2 = [Fraction(0)] * space.q
    e1[0] = Fraction(1)
    e2[1] = Fraction(1)
    if is_exact_sequence((t,)):
        side = Fraction(t) / 4
        if space.norm.evaluate(np.eye(space.q)[0]) == 1.0 and space.norm.evaluate(np.eye(space.q)[1]) == 1.0:
            return box_path(space, e1, e2, side * side)
    u1 = np.eye(space.q)[0] / space.norm.evaluate(np.eye(space.q)[0])
    u2 = np.eye(space.q)[1] / space.norm.evaluate(np.eye(space.q)[1])
    return box_path(space, u1, u2, (float(t) / 4) ** 2)


def polygonal_circle(space: HorizontalSpace, t: float, segments: Optional[int] = None) -> HorizontalPath:
    """
    半径 t/(2π) 的圆的内接正多边形, 从原点出发逆时针

    segments 缺省为每单位长度 settings.polygon_resolution 段 (取 4 的倍数)。多边形顶点落在圆上, 所以折线长度略小于 t。
    """
    if space.q < 2:
        raise DimensionMismatch("circle needs two horizontal directions")
    if t <= 0:
        raise InvalidParameter("t must be positive", {"t": t})
    if segments is None:
        segments = max(4, 4 * math.ceil(settings.polygon_resolution * float(t) / 4))
    if segments < 3:
        raise InvalidParameter("a polygon needs at least 3 sides", {"segments": segments})
    radius = float(t) / (2 * math.pi)
    theta = 2 * math.pi * np.arange(segments + 1) / segments
    pts = np.zeros((segments + 1, space.q))
    pts[:, 0] = radius * np.sin(theta)
    pts[:, 1] = radius * (1 - np.cos(theta))
    chords = np.diff(pts, axis=0)
    return HorizontalPath.from_controls(space, ((chord, 1.0) for chord in chords))


# 路径手术: 括号代表元与中心缺陷修正

def _central(space: HorizontalSpace, h: Union[GroupElement, np.ndarray]) -> np.ndarray:
    A = space.algebra
    if isinstance(h, GroupElement):
        if not h.is_central:
            raise InvalidParameter("defect must be central")
        return np.array([float(x) for x in h.central])
    h = np.asarray(h, dtype=float)
    if h.shape == (A.n,):
        if np.any(np.abs(h[: A.p]) > 1e-12):
            raise InvalidParameter("defect must be central")
        return h[A.p:]
    if h.shape != (A.m,):
        raise DimensionMismatch(f"central vector needs {A.m} coordinates")
    return h


def bracket_operator(space: HorizontalSpace, X: np.ndarray) -> np.ndarray:
    """Y ↦ [X, Y] 的中心部分, 形状 (m, q)"""
    P = space.top
    x = P @ np.asarray(X, dtype=float)
    return np.einsum("i,ijk,jb->kb", x, space.algebra.tensor, P)


@dataclass
class BracketSupport:
    """单位 Y 使 [X, Y] = s·direction, s 最大"""

    vector: np.ndarray
    value: float


def bracket_support(space: HorizontalSpace, X: np.ndarray, direction: np.ndarray) -> Optional[BracketSupport]:
    """max s s.t. [X, Y] = s·direction, ‖Y‖ <= 1; 不可达时返回 None"""
    B = bracket_operator(space, X)
    direction = np.asarray(direction, dtype=float)
    if not np.any(B):
        return None
    norm = space.norm
    if norm.is_polyhedral:
        V = norm.vertices
        K = len(V)
        res = linprog(
            c=np.concatenate([np.zeros(K), [-1.0]]),
            A_ub=np.concatenate([np.ones(K), [0.0]])[None, :],
            b_ub=[1.0],
            A_eq=np.hstack([B @ V.T, -direction[:, None]]),
            b_eq=np.zeros(len(direction)),
            bounds=[(0, None)] * (K + 1),
            method="highs",
        )
        if res.status != 0 or -res.fun <= 1e-14:
            return None
        Y = res.x[:K] @ V
        size = norm.evaluate(Y)
        return BracketSupport(Y / size, float(-res.fun) / size)
    G_inv = norm.gram_inv if isinstance(norm, EllipsoidNorm) else np.eye(space.q)
    S = B @ G_inv @ B.T
    y, *_ = np.linalg.lstsq(S, direction, rcond=None)
    Y0 = G_inv @ B.T @ y
    if np.linalg.norm(B @ Y0 - direction) > 1e-9 or not np.any(Y0):
        return None
    size = norm.evaluate(Y0)
    return BracketSupport(Y0 / size, 1.0 / size)


@dataclass
class CommutatorPair:
    """单位 X, Y 满足 [X, Y] = value·ĥ"""

    X: np.ndarray
    Y: np.ndarray
    value: float


def commutator_representatives(
    space: HorizontalSpace, h: Union[GroupElement, np.ndarray], max_rounds: int = 20
) -> Optional[CommutatorPair]:
    """
    单位 X, Y 使 [X, Y] ∈ ℝ₊h 且 ‖[X, Y]‖ 最大 (交替支撑上升)

    从单位球的顶点或坐标方向出发, 固定一个求另一个的最优支撑。
    """
    hc = _central(space, h)
    size = np.linalg.norm(hc)
    if size == 0:
        raise InvalidParameter("direction must be nonzero")
    direction = hc / size
    norm = space.norm
    if norm.is_polyhedral:
        starts = list(norm.vertices)
    else:
        eye = np.eye(space.q)
        starts = [e / norm.evaluate(e) for e in eye]

    best: Optional[CommutatorPair] = None
    for X in starts:
        value = 0.0
        Y = None
        for _ in range(max_rounds):
            sy = bracket_support(space, X, direction)
            if sy is None:
                break
            Y = sy.vector
            sx = bracket_support(space, Y, -direction)
            if sx is None or sx.value <= sy.value * (1 + 1e-12):
                value = sy.value
                break
            X, value = sx.vector, sx.value
        if Y is not None and value > 0 and (best is None or value > best.value * (1 + 1e-12)):
            best = CommutatorPair(np.array(X, dtype=float), np.array(Y, dtype=float), float(value))
    return best


def close_central_defect(space: HorizontalSpace, h: Union[GroupElement, np.ndarray]) -> HorizontalPath:
    """
    实现中心元 h 的盒形路径

    优先用单个盒子 (长度 4√r, r = ‖h‖/‖[X,Y]‖); 单个括号达不到 h 的方向时,
    把 h 分解到坐标括号上, 逐个拼接盒子。
    """
    hc = _central(space, h)
    size = float(np.linalg.norm(hc))
    if size <= 1e-15:
        return HorizontalPath(space)
    pair = commutator_representatives(space, hc)
    if pair is not None:
        return box_path(space, pair.X, pair.Y, size / pair.value)

    logger.debug("single commutator cannot reach defect, decomposing", extra={"defect": hc.tolist()})
    norm = space.norm
    units = [e / norm.evaluate(e) for e in np.eye(space.q)]
    pairs = [(a, b) for a in range(space.q) for b in range(a + 1, space.q)]
    columns = np.array([bracket_operator(space, units[a]) @ units[b] for a, b in pairs]).T
    if columns.size == 0:
        raise SeedInfeasible("horizontal space has no brackets")
    alpha, *_ = np.linalg.lstsq(columns, hc, rcond=None)
    if np.linalg.norm(columns @ alpha - hc) > 1e-9 * max(1.0, size):
        raise SeedInfeasible("defect is not in the span of brackets", {"defect": hc.tolist()})
    path = HorizontalPath(space)
    for (a, b), coef in zip(pairs, alpha):
        if abs(coef) <= 1e-15:
            continue
        X, Y = (units[a], units[b]) if coef > 0 else (units[b], units[a])
        path = path.concatenate(box_path(space, X, Y, abs(coef)))
    return path


@dataclass
class StraightenedPath:
    """拉直结果: M 个大段, 每段由 m 条直线段组成"""

    pieces: List[HorizontalPath]
    defect: GroupElement
    piece_endpoints: List[GroupElement]

    @property
    def path(self) -> HorizontalPath:
        space = self.pieces[0].space
        out = HorizontalPath(space)
        for piece in self.pieces:
            out = out.concatenate(piece)
        return out


def straighten_path(c: HorizontalPath, M: int, m: int = 1) -> StraightenedPath:
    """
    把 c 分成 M·m 段, 每段换成锥范数下方向 π(h_ij) 的直线段

    Returns:
        锥空间中的拉直路径 c̃ (按 M 个大段分组), 中心缺陷 h = g̃⁻¹g, 以及大段端点 h_i
    """
    if not isinstance(m, int) or m < 1:
        raise InvalidParameter("m must be a positive integer", {"m": m})
    cone = c.space.cone_space()
    A = c.space.algebra
    fine = [path_endpoint(piece).to_float() for piece in subdivide(c, M * m)]

    pieces: List[HorizontalPath] = []
    coarse: List[GroupElement] = []
    for i in range(M):
        group = fine[i * m:(i + 1) * m]
        piece = HorizontalPath(cone)
        for h in group:
            piece = piece.concatenate(HorizontalPath.straight(cone, h.as_array()[: A.p]))
        pieces.append(piece)
        coarse.append(GroupElement.from_array(A, product_array(A, np.array([h.as_array() for h in group]))))

    g = GroupElement.from_array(A, product_array(A, np.array([h.as_array() for h in coarse])))
    straight = StraightenedPath(pieces, GroupElement.identity(A, exact=False), coarse)
    g_tilde = path_endpoint(straight.path)
    straight.defect = bch_multiply(g_tilde.inverse(), g)
    return straight


@dataclass
class CorrectionResult:
    """共轭修正结果"""

    path: HorizontalPath
    r: float
    irregular: List[int]
    defect: GroupElement


def conjugation_correction(c: HorizontalPath, M: int, R: float, m: int = 1) -> CorrectionResult:
    """
    在拉直路径上用共轭 (-rX_i)·c̃_i·(rX_i) 吸收中心缺陷

    对正则段 i (‖π(h_i)‖∞ >= R·t/M) 选单位 X_i 使 [π(h_i), X_i] ∈ ℝ₊h,
    公共的 r 使修正后的路径恰好结束于 c 的端点。
    """
    if not 0 < R <= 1:
        raise InvalidParameter("R must lie in (0, 1]", {"R": R})
    straightened = straighten_path(c, M, m)
    cone = straightened.pieces[0].space
    p = cone.algebra.p
    threshold = R * float(c.length) / M * (1.0 - 1e-9)
    hc = np.array([float(x) for x in straightened.defect.central])
    size = float(np.linalg.norm(hc))

    irregular: List[int] = []
    supports: List[Optional[BracketSupport]] = []
    for i, h_i in enumerate(straightened.piece_endpoints):
        w = h_i.as_array()[:p]
        if projected_norm(cone, w) < threshold:
            irregular.append(i)
            supports.append(None)
        elif size > 1e-15:
            supports.append(bracket_support(cone, w, hc / size))
        else:
            supports.append(None)

    if size <= 1e-15:
        return CorrectionResult(straightened.path, 0.0, irregular, straightened.defect)

    total = sum(s.value for s in supports if s is not None)
    if total <= 0:
        raise SeedInfeasible("no regular piece can absorb the central defect", {"defect": hc.tolist()})
    r = size / total

    path = HorizontalPath(cone)
    for piece, support in zip(straightened.pieces, supports):
        if support is None:
            path = path.concatenate(piece)
            continue
        path = path.concatenate(HorizontalPath.straight(cone, -r * support.vector))
        path = path.concatenate(piece)
        path = path.concatenate(HorizontalPath.straight(cone, r * support.vector))
    return CorrectionResult(path, r, irregular, straightened.defect)
