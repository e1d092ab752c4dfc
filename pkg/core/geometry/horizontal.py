"""
水平子空间 - V ⊂ n 及其投影范数

V 由 n×q 基矩阵的列张成, 范数作用在 q 个系数上。π|_V 必须满射到 V∞,
投影范数 ‖w‖∞ = min{‖v‖ : π(v) = w} 的单位球是 π(B)。
"""

from functools import cached_property
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from core.algebra.group import GroupElement
from core.algebra.structure import NilpotentAlgebra
from core.errors import DimensionMismatch, InfeasibleFiber, InvalidHorizontalSpace
from core.geometry.norms import (
    EllipsoidNorm,
    L1Norm,
    L2Norm,
    Norm,
    PolytopeNorm,
)

_LP_TOL = 1e-9


class HorizontalSpace:
    """
    水平子空间 (V, ‖·‖)

    Args:
        algebra: 所在代数
        basis: n×q 列矩阵, 缺省为 V∞ 的坐标基
        norm: q 维系数上的范数
    """

    def __init__(self, algebra: NilpotentAlgebra, norm: Norm, basis: Optional[Sequence[Sequence[float]]] = None):
        self.algebra = algebra
        if basis is None:
            B = np.zeros((algebra.n, algebra.p))
            B[: algebra.p, : algebra.p] = np.eye(algebra.p)
        else:
            B = np.asarray(basis, dtype=float)
        if B.ndim != 2 or B.shape[0] != algebra.n:
            raise InvalidHorizontalSpace(
                "basis must be an n x q column matrix", {"n": algebra.n, "shape": list(B.shape)}
            )
        if norm.dim != B.shape[1]:
            raise DimensionMismatch(
                "norm dimension must match the number of basis columns",
                {"q": B.shape[1], "norm_dim": norm.dim},
            )
        if np.linalg.matrix_rank(B[: algebra.p]) < algebra.p:
            raise InvalidHorizontalSpace("pi restricted to V is not surjective onto V_inf")
        B.flags.writeable = False
        self.basis = B
        self.norm = norm

    @classmethod
    def polarized(cls, algebra: NilpotentAlgebra, norm: Norm) -> "HorizontalSpace":
        """V = V∞"""
        return cls(algebra, norm)

    @property
    def q(self) -> int:
        return self.basis.shape[1]

    @property
    def top(self) -> np.ndarray:
        """π ∘ basis, 形状 (p, q)"""
        return self.basis[: self.algebra.p]

    @cached_property
    def is_polarized(self) -> bool:
        p = self.algebra.p
        return self.q == p and np.array_equal(self.top, np.eye(p)) and not np.any(self.basis[p:])

    def embed(self, direction: np.ndarray) -> np.ndarray:
        """V 坐标 -> n 维向量, 支持批量 (..., q)"""
        direction = np.asarray(direction, dtype=float)
        if direction.shape[-1] != self.q:
            raise DimensionMismatch(f"expected {self.q} coefficients", {"got": int(direction.shape[-1])})
        return direction @ self.basis.T

    @cached_property
    def cone_norm(self) -> Norm:
        """V∞ 上单位球为 π(B) 的范数"""
        if self.is_polarized:
            return self.norm
        P = self.top
        if self.norm.is_polyhedral:
            return PolytopeNorm(self.norm.vertices @ P.T)
        if isinstance(self.norm, L2Norm):
            return EllipsoidNorm(np.linalg.inv(P @ P.T))
        if isinstance(self.norm, EllipsoidNorm):
            return EllipsoidNorm(np.linalg.inv(P @ self.norm.gram_inv @ P.T))
        raise InvalidHorizontalSpace(f"no cone norm for {self.norm!r}")

    def cone_space(self) -> "HorizontalSpace":
        """渐近锥 (V∞, ‖·‖∞)"""
        if self.is_polarized:
            return self
        return HorizontalSpace.polarized(self.algebra, self.cone_norm)

    def __repr__(self) -> str:
        return f"HorizontalSpace(n={self.algebra.n}, p={self.algebra.p}, q={self.q}, norm={self.norm!r})"


def _fiber_lp(H: HorizontalSpace, w: np.ndarray) -> Tuple[float, np.ndarray]:
    """min Σλ s.t. Σ λ_i π(v_i) = w, λ >= 0 (v_i 为单位球顶点)"""
    V = H.norm.vertices
    A_eq = H.top @ V.T
    res = linprog(
        c=np.ones(len(V)),
        A_eq=A_eq,
        b_eq=w,
        bounds=[(0, None)] * len(V),
        method="highs",
    )
    if res.status != 0:
        raise InfeasibleFiber("fiber LP is infeasible", {"target": w.tolist(), "status": int(res.status)})
    lam = np.asarray(res.x)
    return float(res.fun), lam @ V


def _fiber_least_norm(H: HorizontalSpace, w: np.ndarray) -> Tuple[float, np.ndarray]:
    P = H.top
    G_inv = H.norm.gram_inv if isinstance(H.norm, EllipsoidNorm) else np.eye(H.q)
    S = P @ G_inv @ P.T
    try:
        y = np.linalg.solve(S, w)
    except np.linalg.LinAlgError as e:
        raise InfeasibleFiber("fiber system is singular") from e
    v = G_inv @ P.T @ y
    return float(np.sqrt(max(w @ y, 0.0))), v


def _lift(H: HorizontalSpace, w: np.ndarray) -> Tuple[float, np.ndarray]:
    w = np.asarray(w, dtype=float)
    if w.shape != (H.algebra.p,):
        raise DimensionMismatch(f"expected {H.algebra.p} horizontal coordinates", {"got": list(w.shape)})
    if not np.any(w):
        return 0.0, np.zeros(H.q)
    if H.is_polarized:
        return H.norm.evaluate(w), w.copy()
    if H.norm.is_polyhedral:
        return _fiber_lp(H, w)
    return _fiber_least_norm(H, w)


def projected_norm(H: HorizontalSpace, w: np.ndarray) -> float:
    """‖w‖∞ = min{‖v‖ : v ∈ V, π(v) = w}"""
    return _lift(H, w)[0]


def lift_min_norm(H: HorizontalSpace, g: GroupElement) -> np.ndarray:
    """Y_g ∈ V: π(Y_g) = π(g) 且 ‖Y_g‖ = ‖π(g)‖∞ (V 坐标)"""
    return _lift(H, np.array([float(x) for x in g.horizontal]))[1]


def vertex_weights(vertices: np.ndarray, v: np.ndarray) -> np.ndarray:
    """v = Σ λ_i vertices_i, λ >= 0, Σλ 最小 (= 多面体范数值)"""
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        return np.zeros(len(vertices))
    res = linprog(
        c=np.ones(len(vertices)),
        A_eq=vertices.T,
        b_eq=v,
        bounds=[(0, None)] * len(vertices),
        method="highs",
    )
    if res.status != 0:
        raise InfeasibleFiber("vertex decomposition failed", {"vector": v.tolist()})
    return np.asarray(res.x)


def standard_l1(algebra: NilpotentAlgebra) -> HorizontalSpace:
    return HorizontalSpace.polarized(algebra, L1Norm(algebra.p))


def standard_l2(algebra: NilpotentAlgebra) -> HorizontalSpace:
    return HorizontalSpace.polarized(algebra, L2Norm(algebra.p))
