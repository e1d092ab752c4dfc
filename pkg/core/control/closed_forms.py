"""
闭式距离 - Heisenberg 群 (L1/L2) 及其与欧氏因子的乘积, 交换群

只覆盖可以精确写出的情形; 其余返回 None, 由估计器处理。
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import brentq

from core.algebra.group import GroupElement
from core.errors import DimensionMismatch
from core.geometry.horizontal import HorizontalSpace, projected_norm
from core.geometry.norms import L1Norm, L2Norm

_TWO_PI = 2.0 * math.pi


def _chord_excess(phi: float) -> float:
    """φ - sin φ, 小 φ 用级数避免相消"""
    if phi < 1e-3:
        p2 = phi * phi
        return phi * p2 / 6.0 * (1.0 - p2 / 20.0 * (1.0 - p2 / 42.0))
    return phi - math.sin(phi)


def heisenberg_l2_distance(x: float, y: float, z: float) -> float:
    """
    [X, Y] = Z, 欧氏范数下单位元到 (x, y, z) 的距离

    测地线是弦长 r、转角 φ 的圆弧: |z|/r² = (φ - sin φ) / (8 sin²(φ/2)),
    长度 rφ / (2 sin(φ/2))。
    """
    r = math.hypot(x, y)
    Z = abs(z)
    if Z == 0:
        return r
    if r == 0:
        return 2.0 * math.sqrt(math.pi * Z)
    mu = Z / (r * r)
    if mu < 1e-10:
        phi = 12.0 * mu
    else:
        def gap(phi: float) -> float:
            s = math.sin(phi / 2.0)
            return _chord_excess(phi) - 8.0 * mu * s * s

        hi = _TWO_PI * (1.0 - 1e-15)
        if gap(hi) <= 0:
            return 2.0 * math.sqrt(math.pi * Z)
        phi = brentq(gap, min(6.0 * mu, 1e-3), hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return r * phi / (2.0 * math.sin(phi / 2.0))


def heisenberg_l1_distance(x: float, y: float, z: float) -> float:
    """[X, Y] = Z, L1 范数下单位元到 (x, y, z) 的距离"""
    M = max(abs(x), abs(y))
    m = min(abs(x), abs(y))
    Z = abs(z)
    if Z <= M * m / 2.0:
        return M + m
    if Z <= M * M - M * m / 2.0:
        return M + 2.0 * Z / M
    return 4.0 * math.sqrt(Z + M * m / 2.0) - M - m


def heisenberg_l1_array(x: np.ndarray, y: np.ndarray, z: np.ndarray) -> np.ndarray:
    """heisenberg_l1_distance 的向量化版本"""
    ax, ay, Z = np.abs(x), np.abs(y), np.abs(z)
    M = np.maximum(ax, ay)
    m = np.minimum(ax, ay)
    with np.errstate(divide="ignore", invalid="ignore"):
        middle = M + 2.0 * Z / M
    far = 4.0 * np.sqrt(Z + M * m / 2.0) - M - m
    return np.where(Z <= M * m / 2.0, M + m, np.where(Z <= M * M - M * m / 2.0, middle, far))


@dataclass(frozen=True)
class SingleBracket:
    """唯一的非零括号 [X_a, X_b] = c·Z_k (0 起始下标)"""

    a: int
    b: int
    k: int
    c: float


def single_bracket(space: HorizontalSpace) -> Optional[SingleBracket]:
    A = space.algebra
    entries = [(i, j, k, c) for (i, j, k), c in A.entries.items() if i < j and c != 0]
    if len(entries) != 1 or A.m != 1:
        return None
    i, j, k, c = entries[0]
    return SingleBracket(i, j, k, float(c))


def supports_closed_form(space: HorizontalSpace) -> bool:
    """是否有精确距离公式"""
    A = space.algebra
    if A.is_abelian:
        return True
    if not space.is_polarized or type(space.norm) not in (L1Norm, L2Norm):
        return False
    return single_bracket(space) is not None


def closed_form_distance(space: HorizontalSpace, g: GroupElement) -> Optional[float]:
    """
    d∞(g), 仅限交换群或 ℝᵏ × h₃ (极化, 坐标 L1 或 L2)

    Returns:
        距离, 无公式时 None
    """
    if g.algebra != space.algebra:
        raise DimensionMismatch("element and space belong to different algebras")
    if not supports_closed_form(space):
        return None
    return float(closed_form_array(space, g.as_array()[None])[0])


def closed_form_array(space: HorizontalSpace, coords: np.ndarray) -> np.ndarray:
    """批量闭式距离 (B, n) -> (B,); 调用方先检查 supports_closed_form"""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    A = space.algebra
    if A.is_abelian:
        if space.is_polarized:
            return np.atleast_1d(space.norm.evaluate(coords[:, : A.p]))
        return np.array([projected_norm(space, row[: A.p]) for row in coords])
    sb = single_bracket(space)
    p = A.p
    x, y, z = coords[:, sb.a], coords[:, sb.b], coords[:, p + sb.k] / sb.c
    others = np.delete(coords[:, :p], [sb.a, sb.b], axis=1)
    if isinstance(space.norm, L1Norm):
        return heisenberg_l1_array(x, y, z) + np.abs(others).sum(axis=1)
    core = np.array([heisenberg_l2_distance(a, b, c) for a, b, c in zip(x, y, z)])
    return np.hypot(np.linalg.norm(others, axis=1), core)
