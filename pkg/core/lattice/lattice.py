"""
整点格 - 整数坐标下的群律及到指数坐标的嵌入

(a, z)(a', z') = (a + a', z + z' + β(a, a')),  β(a, a')_k = Σ_{i<j} c_ij^k a_i a'_j

嵌入 z ↦ z - ½ Σ_{i<j} c_ij^k a_i a_j 是到 BCH 乘法的同态。
"""

import logging
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from typing import Callable, Dict, Iterable, List, Sequence, Tuple, Union

import numpy as np

from app.constants import GeneratorPreset, LatticePreset
from core.algebra.group import GroupElement
from core.algebra.structure import NilpotentAlgebra, abelian, heisenberg, r_times_heisenberg
from core.errors import DimensionMismatch, LatticeError

logger = logging.getLogger(__name__)

Element = Tuple[int, ...]


def _upper_triangle(C: np.ndarray) -> np.ndarray:
    """只保留 i < j 的结构常数"""
    mask = np.triu(np.ones(C.shape[:2], dtype=bool), k=1)
    return C * mask[:, :, None]


@dataclass(frozen=True)
class Lattice:
    """整数坐标的格 Γ ⊂ N"""

    algebra: NilpotentAlgebra
    preset: LatticePreset = LatticePreset.CUSTOM
    name: str = "custom"

    def __post_init__(self) -> None:
        for i, j, k, c in self.algebra.constants:
            if c.denominator != 1:
                raise LatticeError(
                    "lattice laws need integer structure constants",
                    {"entry": [i, j, k], "c": str(c)},
                )

    @classmethod
    def from_algebra(cls, algebra: NilpotentAlgebra, name: str = "custom") -> "Lattice":
        return cls(algebra, LatticePreset.CUSTOM, name)

    @property
    def n(self) -> int:
        return self.algebra.n

    @property
    def p(self) -> int:
        return self.algebra.p

    @cached_property
    def _pairs(self) -> Tuple[Tuple[int, int, int, int], ...]:
        """(i, j, k, c), i < j, 0-based, k 为中心下标"""
        return tuple(
            (i, j, k, int(c)) for (i, j, k), c in sorted(self.algebra.entries.items()) if i < j
        )

    def identity(self) -> Element:
        return (0,) * self.n

    def _check(self, g: Sequence[int]) -> None:
        if len(g) != self.n:
            raise DimensionMismatch(f"lattice element needs {self.n} coordinates", {"got": len(g)})

    def beta(self, a: Sequence[int], b: Sequence[int]) -> List[int]:
        out = [0] * self.algebra.m
        for i, j, k, c in self._pairs:
            out[k] += c * a[i] * b[j]
        return out

    def multiply(self, g: Sequence[int], h: Sequence[int]) -> Element:
        self._check(g)
        self._check(h)
        p = self.p
        beta = self.beta(g, h)
        return tuple(
            [g[i] + h[i] for i in range(p)] + [g[p + k] + h[p + k] + beta[k] for k in range(self.algebra.m)]
        )

    def inverse(self, g: Sequence[int]) -> Element:
        self._check(g)
        p = self.p
        q = self.beta(g, g)
        return tuple([-g[i] for i in range(p)] + [-g[p + k] + q[k] for k in range(self.algebra.m)])

    def commutator(self, g: Sequence[int], h: Sequence[int]) -> Element:
        """g⁻¹h⁻¹gh"""
        return self.multiply(self.multiply(self.inverse(g), self.inverse(h)), self.multiply(g, h))

    def embed(self, g: Sequence[int]) -> GroupElement:
        """到指数坐标的精确嵌入"""
        self._check(g)
        p = self.p
        q = self.beta(g, g)
        coords = [Fraction(g[i]) for i in range(p)] + [
            Fraction(g[p + k]) - Fraction(q[k], 2) for k in range(self.algebra.m)
        ]
        return GroupElement(self.algebra, tuple(coords))

    def embed_array(self, elements: Iterable[Sequence[int]]) -> np.ndarray:
        """批量浮点嵌入 (B, n)"""
        X = np.array(list(elements), dtype=float).reshape(-1, self.n)
        p = self.p
        if self.algebra.m:
            X[:, p:] -= 0.5 * np.einsum("bi,bj,ijk->bk", X[:, :p], X[:, :p], _upper_triangle(self.algebra.tensor))
        return X

    def right_multiplier(self, s: Sequence[int]) -> Callable[[Element], Element]:
        """g ↦ g·s 的快速闭包 (BFS 内循环)"""
        self._check(s)
        p, m = self.p, self.algebra.m
        coef = [[0] * m for _ in range(p)]
        for i, j, k, c in self._pairs:
            coef[i][k] += c * s[j]
        terms = [(i, k, coef[i][k]) for i in range(p) for k in range(m) if coef[i][k]]
        shift = tuple(s)

        def step(g: Element) -> Element:
            out = [a + b for a, b in zip(g, shift)]
            for i, k, c in terms:
                out[p + k] += c * g[i]
            return tuple(out)

        return step

    def __str__(self) -> str:
        return self.name


def make_lattice(preset: Union[str, LatticePreset], dimension: int = 2) -> Lattice:
    """内置格: zd (ℤᵈ), h3z (整 Heisenberg 群), zxh3z (坐标 x, y, w, z, [x, y] = z)"""
    preset = LatticePreset(preset.lower() if isinstance(preset, str) else preset)
    if preset is LatticePreset.ZD:
        if dimension < 1:
            raise LatticeError("dimension must be positive", {"dimension": dimension})
        return Lattice(abelian(dimension), preset, f"Z{dimension}")
    if preset is LatticePreset.H3Z:
        return Lattice(heisenberg(), preset, "H3Z")
    if preset is LatticePreset.ZXH3Z:
        return Lattice(r_times_heisenberg(), preset, "ZxH3Z")
    raise LatticeError("custom lattices are built from an algebra file")


@dataclass(frozen=True)
class GeneratingSet:
    """对称生成集; 自动取对称闭包并去掉单位元"""

    lattice: Lattice
    elements: Tuple[Element, ...]
    name: str = "custom"

    @classmethod
    def build(cls, lattice: Lattice, elements: Iterable[Sequence[int]], name: str = "custom") -> "GeneratingSet":
        seen: Dict[Element, None] = {}
        for s in elements:
            s = tuple(int(x) for x in s)
            if len(s) != lattice.n:
                raise DimensionMismatch(f"generator needs {lattice.n} coordinates", {"generator": list(s)})
            for t in (s, lattice.inverse(s)):
                if any(t):
                    seen[t] = None
        if not seen:
            raise LatticeError("generating set is empty")
        return cls(lattice, tuple(sorted(seen)), name)

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def is_symmetric(self) -> bool:
        members = set(self.elements)
        return all(self.lattice.inverse(s) in members for s in self.elements)

    def projections(self) -> np.ndarray:
        """π(S), 形状 (|S|, p)"""
        return np.array([s[: self.lattice.p] for s in self.elements], dtype=float)


def standard_generators(lattice: Lattice) -> GeneratingSet:
    """水平坐标单位向量"""
    eye = np.eye(lattice.n, dtype=int)[: lattice.p]
    return GeneratingSet.build(lattice, eye.tolist(), GeneratorPreset.STANDARD.value)


def make_generators(lattice: Lattice, spec: Union[str, Sequence[Sequence[int]]]) -> GeneratingSet:
    """
    生成集: 预设名或整数向量列表

    ZxH3Z 的 skew 预设在标准生成元之外加入 w·[x, y] = (0, 0, 1, 1)。
    """
    if not isinstance(spec, str):
        return GeneratingSet.build(lattice, spec)
    preset = GeneratorPreset(spec.lower())
    if preset in (GeneratorPreset.STANDARD, GeneratorPreset.PRODUCT):
        gens = standard_generators(lattice)
        return GeneratingSet(lattice, gens.elements, preset.value)
    if lattice.preset is not LatticePreset.ZXH3Z:
        raise LatticeError("skew generators are defined for ZxH3Z only", {"lattice": lattice.name})
    base = [list(s) for s in standard_generators(lattice).elements]
    return GeneratingSet.build(lattice, base + [[0, 0, 1, 1]], preset.value)
