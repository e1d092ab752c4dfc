"""
群运算 - 指数坐标下的 BCH 乘法

二步情形 BCH 截断为 log(gh) = log g + log h + ½[log g, log h],
所以精确模式 (分数) 只需要加法、乘法和 ½。
"""

from dataclasses import dataclass
from fractions import Fraction
from numbers import Integral
from typing import Any, Sequence, Tuple, Union

import numpy as np

from core.algebra.structure import (
    NilpotentAlgebra,
    Scalar,
    as_fraction,
    bracket,
    is_exact_sequence,
)
from core.errors import DimensionMismatch, InvalidParameter

HALF = Fraction(1, 2)


@dataclass(frozen=True)
class GroupElement:
    """群元素 = 李代数中的指数坐标 (x_1, ..., x_n)"""

    algebra: NilpotentAlgebra
    coords: Tuple[Scalar, ...]

    def __post_init__(self) -> None:
        if len(self.coords) != self.algebra.n:
            raise DimensionMismatch(
                f"expected {self.algebra.n} coordinates, got {len(self.coords)}",
                {"n": self.algebra.n, "got": len(self.coords)},
            )

    @classmethod
    def identity(cls, algebra: NilpotentAlgebra, exact: bool = True) -> "GroupElement":
        zero: Scalar = Fraction(0) if exact else 0.0
        return cls(algebra, (zero,) * algebra.n)

    @classmethod
    def exact(cls, algebra: NilpotentAlgebra, coords: Sequence[Any]) -> "GroupElement":
        """分数坐标 (十进制浮点数按字面值转换)"""
        return cls(algebra, tuple(as_fraction(x) for x in coords))

    @classmethod
    def from_array(cls, algebra: NilpotentAlgebra, coords: Sequence[float]) -> "GroupElement":
        return cls(algebra, tuple(float(x) for x in np.asarray(coords, dtype=float)))

    @property
    def is_exact(self) -> bool:
        return is_exact_sequence(self.coords)

    @property
    def horizontal(self) -> Tuple[Scalar, ...]:
        return self.coords[: self.algebra.p]

    @property
    def central(self) -> Tuple[Scalar, ...]:
        return self.coords[self.algebra.p:]

    @property
    def is_identity(self) -> bool:
        return all(x == 0 for x in self.coords)

    @property
    def is_central(self) -> bool:
        return all(x == 0 for x in self.horizontal)

    def as_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.coords])

    def to_float(self) -> "GroupElement":
        return GroupElement.from_array(self.algebra, self.as_array())

    def __mul__(self, other: "GroupElement") -> "GroupElement":
        return bch_multiply(self, other)

    def inverse(self) -> "GroupElement":
        return bch_inverse(self)

    def __str__(self) -> str:
        return "(" + ", ".join(str(x) for x in self.coords) + ")"


@dataclass(frozen=True)
class HorizontalVector:
    """V∞ 中的向量 (p 个系数)"""

    coeffs: Tuple[Scalar, ...]

    @property
    def p(self) -> int:
        return len(self.coeffs)

    def as_array(self) -> np.ndarray:
        return np.array([float(x) for x in self.coeffs])

    def __add__(self, other: "HorizontalVector") -> "HorizontalVector":
        if other.p != self.p:
            raise DimensionMismatch("horizontal dimensions differ", {"left": self.p, "right": other.p})
        return HorizontalVector(tuple(a + b for a, b in zip(self.coeffs, other.coeffs)))


def _same_algebra(g: GroupElement, h: GroupElement) -> None:
    if g.algebra != h.algebra:
        raise DimensionMismatch("elements belong to different algebras")


def bch_multiply(g: GroupElement, h: GroupElement) -> GroupElement:
    """log(gh) = log g + log h + ½[log g, log h]"""
    _same_algebra(g, h)
    A = g.algebra
    if g.is_exact and h.is_exact:
        br = bracket(A, g.coords, h.coords)
        return GroupElement(A, tuple(a + b + HALF * c for a, b, c in zip(g.coords, h.coords, br)))
    return GroupElement.from_array(A, bch_multiply_array(A, g.as_array(), h.as_array()))


def bch_inverse(g: GroupElement) -> GroupElement:
    """g⁻¹ = -log g (X 与 -X 对易)"""
    return GroupElement(g.algebra, tuple(-x for x in g.coords))


def group_commutator(g: GroupElement, h: GroupElement) -> GroupElement:
    """g⁻¹h⁻¹gh; 在二步群中等于 exp([log g, log h])"""
    return bch_multiply(bch_multiply(bch_inverse(g), bch_inverse(h)), bch_multiply(g, h))


def dilate(t: Union[int, float, Fraction], g: GroupElement) -> GroupElement:
    """δ_t: 水平坐标乘 t, 中心坐标乘 t²"""
    if t <= 0:
        raise InvalidParameter("dilation factor must be positive", {"t": str(t)})
    p = g.algebra.p
    if g.is_exact and isinstance(t, (Fraction, Integral)):
        factor = Fraction(t)
        return GroupElement(
            g.algebra,
            tuple(x * factor if i < p else x * factor * factor for i, x in enumerate(g.coords)),
        )
    return GroupElement.from_array(g.algebra, dilate_array(g.algebra, float(t), g.as_array()))


def project_pi(g: GroupElement) -> HorizontalVector:
    """π(g): log g 的前 p 个坐标"""
    return HorizontalVector(g.horizontal)


# 数组版本 (最后一维为 n, 可批量)

def bch_multiply_array(algebra: NilpotentAlgebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return a + b + 0.5 * algebra.bracket_array(a, b)


def left_difference_array(algebra: NilpotentAlgebra, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """a⁻¹b = b - a - ½[a, b]"""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return b - a - 0.5 * algebra.bracket_array(a, b)


def dilate_array(algebra: NilpotentAlgebra, t: float, a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out[..., : algebra.p] *= t
    out[..., algebra.p:] *= t * t
    return out


def product_array(algebra: NilpotentAlgebra, increments: np.ndarray) -> np.ndarray:
    """
    exp(w_1)···exp(w_k) 的对数: Σ w_s + ½ Σ_t [P_t, w_t], P_t 为前缀和

    increments 形状 (..., k, n)
    """
    w = np.asarray(increments, dtype=float)
    prefix = np.cumsum(w, axis=-2) - w
    return w.sum(axis=-2) + 0.5 * algebra.bracket_array(prefix, w).sum(axis=-2)
