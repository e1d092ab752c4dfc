"""
范数 - 水平空间上的范数及对偶支撑

每个范数可以对形状 (..., q) 的数组批量求值。多面体范数 (L1, Linf, Polytope)
暴露单位球顶点, 对偶支撑在最优顶点中取字典序最小者。
"""

import itertools
import json
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Optional, Sequence, Union

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from app.constants import TIE_TOLERANCE, NormVariant
from core.errors import DimensionMismatch, InvalidNorm, ZeroCovector
from core.io.schemas import NormSpec, load_model, parse_model


def _lexicographic_min(candidates: np.ndarray) -> np.ndarray:
    order = np.lexsort(candidates.T[::-1])
    return candidates[order[0]]


class Norm(ABC):
    """ℝ^q 上的范数"""

    variant: NormVariant

    def __init__(self, dim: int):
        if dim < 1:
            raise InvalidNorm("norm dimension must be positive", {"dim": dim})
        self.dim = dim

    def _check(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        if v.shape[-1] != self.dim:
            raise DimensionMismatch(
                f"norm expects {self.dim} coordinates, got {v.shape[-1]}",
                {"dim": self.dim, "got": int(v.shape[-1])},
            )
        return v

    def __call__(self, v: np.ndarray) -> Union[float, np.ndarray]:
        return self.evaluate(v)

    def evaluate(self, v: np.ndarray) -> Union[float, np.ndarray]:
        v = self._check(v)
        out = self._evaluate(v)
        return float(out) if np.ndim(out) == 0 else out

    def dual(self, xi: np.ndarray) -> Union[float, np.ndarray]:
        """对偶范数 max_{‖u‖<=1} <xi, u>"""
        xi = self._check(xi)
        out = self._dual(xi)
        return float(out) if np.ndim(out) == 0 else out

    def dual_support(self, xi: np.ndarray) -> np.ndarray:
        """单位球面上使 <xi, u> 最大的 u"""
        xi = self._check(xi)
        if xi.ndim != 1:
            raise DimensionMismatch("dual_support takes a single covector")
        if not np.any(xi):
            raise ZeroCovector("dual support of the zero covector is undefined")
        return self._dual_support(xi)

    @property
    def is_polyhedral(self) -> bool:
        return self.vertices is not None

    @property
    def vertices(self) -> Optional[np.ndarray]:
        """单位球顶点 (K, q); 非多面体返回 None"""
        return None

    def to_spec(self) -> dict:
        return {"variant": self.variant.value}

    @abstractmethod
    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _dual(self, xi: np.ndarray) -> np.ndarray:
        ...

    @abstractmethod
    def _dual_support(self, xi: np.ndarray) -> np.ndarray:
        ...

    def __repr__(self) -> str:
        return f"{type(self).__name__}(dim={self.dim})"


class PolyhedralNorm(Norm):
    """单位球为对称多面体的范数"""

    def _dual(self, xi: np.ndarray) -> np.ndarray:
        return np.max(xi @ self.vertices.T, axis=-1)

    def _dual_support(self, xi: np.ndarray) -> np.ndarray:
        values = self.vertices @ xi
        best = values.max()
        tol = TIE_TOLERANCE * max(1.0, abs(best))
        return _lexicographic_min(self.vertices[values >= best - tol]).copy()


class L1Norm(PolyhedralNorm):
    variant = NormVariant.L1

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.abs(v).sum(axis=-1)

    def _dual(self, xi: np.ndarray) -> np.ndarray:
        return np.abs(xi).max(axis=-1)

    @property
    def vertices(self) -> np.ndarray:
        eye = np.eye(self.dim)
        return np.vstack([eye, -eye])


class LinfNorm(PolyhedralNorm):
    variant = NormVariant.LINF

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.abs(v).max(axis=-1)

    def _dual(self, xi: np.ndarray) -> np.ndarray:
        return np.abs(xi).sum(axis=-1)

    def _dual_support(self, xi: np.ndarray) -> np.ndarray:
        # 零分量两侧等价, 字典序取 -1
        tol = TIE_TOLERANCE * max(1.0, float(np.abs(xi).max()))
        return np.where(xi > tol, 1.0, -1.0)

    @property
    def vertices(self) -> np.ndarray:
        return np.array(list(itertools.product((-1.0, 1.0), repeat=self.dim)))


class L2Norm(Norm):
    variant = NormVariant.L2

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt((v * v).sum(axis=-1))

    def _dual(self, xi: np.ndarray) -> np.ndarray:
        return self._evaluate(xi)

    def _dual_support(self, xi: np.ndarray) -> np.ndarray:
        return xi / np.linalg.norm(xi)


class EllipsoidNorm(Norm):
    """‖v‖ = sqrt(vᵀ G v), G 对称正定"""

    variant = NormVariant.ELLIPSOID

    def __init__(self, gram: Sequence[Sequence[float]]):
        G = np.asarray(gram, dtype=float)
        if G.ndim != 2 or G.shape[0] != G.shape[1]:
            raise InvalidNorm("gram matrix must be square", {"shape": list(G.shape)})
        super().__init__(G.shape[0])
        if not np.allclose(G, G.T, atol=1e-12):
            raise InvalidNorm("gram matrix must be symmetric")
        try:
            np.linalg.cholesky(G)
        except np.linalg.LinAlgError as e:
            raise InvalidNorm("gram matrix must be positive definite") from e
        self.gram = 0.5 * (G + G.T)
        self.gram_inv = np.linalg.inv(self.gram)

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", v, self.gram, v), 0.0))

    def _dual(self, xi: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(np.einsum("...i,ij,...j->...", xi, self.gram_inv, xi), 0.0))

    def _dual_support(self, xi: np.ndarray) -> np.ndarray:
        u = self.gram_inv @ xi
        return u / self._dual(xi)

    def to_spec(self) -> dict:
        return {"variant": self.variant.value, "gram": self.gram.tolist()}


class PolytopeNorm(PolyhedralNorm):
    """单位球为给定顶点的凸包 (须关于原点对称且张成 ℝ^q)"""

    variant = NormVariant.POLYTOPE

    def __init__(self, vertices: Sequence[Sequence[float]]):
        pts = np.asarray(vertices, dtype=float)
        if pts.ndim != 2 or len(pts) == 0:
            raise InvalidNorm("polytope needs a nonempty vertex list")
        super().__init__(pts.shape[1])
        pts = np.unique(np.round(pts, 15), axis=0)
        scale = max(1.0, float(np.abs(pts).max()))
        for v in pts:
            if not np.any(np.all(np.abs(pts + v) <= 1e-9 * scale, axis=1)):
                raise InvalidNorm("polytope must be origin-symmetric", {"vertex": v.tolist()})
        if np.linalg.matrix_rank(pts) < self.dim:
            raise InvalidNorm("polytope vertices must span the space")

        if self.dim == 1:
            radius = float(np.abs(pts).max())
            self._vertices = np.array([[-radius], [radius]])
            self._facets = np.array([[1.0 / radius], [-1.0 / radius]])
        else:
            try:
                hull = ConvexHull(pts)
            except QhullError as e:
                raise InvalidNorm(f"convex hull failed: {e}") from e
            self._vertices = pts[np.sort(hull.vertices)]
            # a·x + b <= 0 内部, 原点在内部所以 b < 0
            normals, offsets = hull.equations[:, :-1], hull.equations[:, -1]
            self._facets = normals / (-offsets[:, None])

    @property
    def vertices(self) -> np.ndarray:
        return self._vertices

    def _evaluate(self, v: np.ndarray) -> np.ndarray:
        return np.maximum(np.max(v @ self._facets.T, axis=-1), 0.0)

    def to_spec(self) -> dict:
        return {"variant": self.variant.value, "vertices": self._vertices.tolist()}


def norm_eval(N: Norm, v: np.ndarray) -> float:
    """范数值"""
    return N.evaluate(v)


def dual_support(N: Norm, xi: np.ndarray) -> np.ndarray:
    """单位球面上 <xi, ·> 的最大点, 并列时取字典序最小的顶点"""
    return N.dual_support(xi)


def make_norm(
    variant: Union[str, NormVariant],
    dim: Optional[int] = None,
    vertices: Optional[Sequence[Sequence[float]]] = None,
    gram: Optional[Sequence[Sequence[float]]] = None,
) -> Norm:
    """按名称构造范数"""
    variant = NormVariant(variant.lower() if isinstance(variant, str) else variant)
    if variant is NormVariant.POLYTOPE:
        if vertices is None:
            raise InvalidNorm("polytope norm requires vertices")
        return PolytopeNorm(vertices)
    if variant is NormVariant.ELLIPSOID:
        if gram is None:
            raise InvalidNorm("ellipsoid norm requires a gram matrix")
        return EllipsoidNorm(gram)
    if dim is None:
        raise InvalidNorm(f"{variant.value} norm requires a dimension")
    return {NormVariant.L1: L1Norm, NormVariant.L2: L2Norm, NormVariant.LINF: LinfNorm}[variant](dim)


def norm_from_spec(spec: NormSpec, dim: Optional[int] = None) -> Norm:
    return make_norm(spec.variant, dim, spec.vertices, spec.gram)


def load_norm(path: Union[str, Path], dim: Optional[int] = None) -> Norm:
    """读取范数文件; l1/l2/linf 的维数由调用方给出"""
    return norm_from_spec(load_model(path, NormSpec), dim)


def parse_norm(text_or_path: str, dim: int) -> Norm:
    """CLI 参数: 文件路径, JSON 字符串, 或 l1/l2/linf 名称"""
    key = text_or_path.strip()
    if key.lower() in {v.value for v in (NormVariant.L1, NormVariant.L2, NormVariant.LINF)}:
        return make_norm(key, dim)
    if key.startswith("{"):
        return norm_from_spec(parse_model(json.loads(key), NormSpec), dim)
    return load_norm(key, dim)


def same_norm(a: Norm, b: Any) -> bool:
    """两个范数是否同类且参数一致"""
    if not isinstance(b, Norm) or a.variant is not b.variant or a.dim != b.dim:
        return False
    if a.variant is NormVariant.POLYTOPE:
        return a.vertices.shape == b.vertices.shape and np.allclose(a.vertices, b.vertices)
    if a.variant is NormVariant.ELLIPSOID:
        return np.allclose(a.gram, b.gram)
    return True
