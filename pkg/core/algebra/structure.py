"""
结构常数 - 二步幂零李代数的唯一数据来源

基 X_1..X_p 张成 V∞, X_{p+1}..X_n 张成中心 [n,n]。常数 c_ij^k 下标从 1 开始,
内部一律保存为有理数, 浮点运算使用缓存的稠密张量 C[i, j, k-p-1]。
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from numbers import Integral, Rational
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
import sympy

from core.errors import (
    AntisymmetryViolation,
    BadDimensions,
    DimensionMismatch,
    InvalidParameter,
    NotTwoStep,
)
from core.io.schemas import AlgebraSpec, BracketEntry, load_model

Scalar = Union[Fraction, float]
RawEntry = Union[BracketEntry, Dict[str, Any], Sequence[Any]]


def as_fraction(value: Any) -> Fraction:
    """把整数/分数/十进制浮点数转换为精确分数 (0.1 -> 1/10)"""
    if isinstance(value, bool):
        raise InvalidParameter(f"not a number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (Integral, np.integer)):
        return Fraction(int(value))
    if isinstance(value, Rational):
        return Fraction(value.numerator, value.denominator)
    if isinstance(value, (float, np.floating)):
        if not math.isfinite(float(value)):
            raise InvalidParameter(f"non-finite constant: {value!r}")
        return Fraction(repr(float(value)))
    if isinstance(value, str):
        try:
            return Fraction(value)
        except ValueError as e:
            raise InvalidParameter(f"not a number: {value!r}") from e
    raise InvalidParameter(f"not a number: {value!r}")


def is_exact_sequence(values: Iterable[Any]) -> bool:
    """全部元素为整数或分数时视为精确模式"""
    return all(
        isinstance(v, (Fraction, Integral, np.integer)) and not isinstance(v, bool)
        for v in values
    )


@dataclass(frozen=True)
class NilpotentAlgebra:
    """
    二步幂零李代数

    constants 保存反对称闭包后的非零常数 (i, j, k, c), 下标从 1 开始, 已排序。
    只能通过 validate_structure 构造。
    """

    n: int
    p: int
    constants: Tuple[Tuple[int, int, int, Fraction], ...]
    names: Tuple[str, ...] = ()

    @property
    def m(self) -> int:
        """中心维数 n - p"""
        return self.n - self.p

    @property
    def is_abelian(self) -> bool:
        return not self.constants

    @cached_property
    def entries(self) -> Dict[Tuple[int, int, int], Fraction]:
        """0-based (i, j, k) -> c, k 为中心内的下标 0..m-1"""
        return {(i - 1, j - 1, k - self.p - 1): c for i, j, k, c in self.constants}

    @cached_property
    def tensor(self) -> np.ndarray:
        """稠密结构张量 C[i, j, k] = c_{i+1, j+1}^{p+k+1}, 形状 (p, p, m)"""
        C = np.zeros((self.p, self.p, self.m))
        for (i, j, k), c in self.entries.items():
            C[i, j, k] = float(c)
        C.flags.writeable = False
        return C

    def constant(self, i: int, j: int, k: int) -> Fraction:
        """c_ij^k (1-based); 未存储的条目为 0"""
        return self.entries.get((i - 1, j - 1, k - self.p - 1), Fraction(0))

    def label(self, index: int) -> str:
        """坐标名 (0-based)"""
        if self.names:
            return self.names[index]
        return f"x{index + 1}"

    def bracket(self, a: Sequence[Any], b: Sequence[Any]) -> Union[Tuple[Fraction, ...], np.ndarray]:
        """[a, b]; 两个输入都精确时返回分数元组, 否则返回浮点数组"""
        return bracket(self, a, b)

    def bracket_array(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """向量化括号, 最后一维为 n, 其余维广播"""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        shape = np.broadcast_shapes(a.shape, b.shape)
        out = np.zeros(shape)
        if self.m:
            out[..., self.p:] = np.einsum(
                "...i,...j,ijk->...k", a[..., : self.p], b[..., : self.p], self.tensor
            )
        return out

    def scaled(self, factor: Any) -> "NilpotentAlgebra":
        """所有结构常数乘以同一个正数"""
        f = as_fraction(factor)
        if f <= 0:
            raise InvalidParameter("scale factor must be positive", {"factor": str(f)})
        return validate_structure(
            [(i, j, k, c * f) for i, j, k, c in self.constants if i < j], self.n, self.p, self.names
        )

    def to_spec(self) -> Dict[str, Any]:
        """转换为代数文件格式 (只写 i<j 的条目)"""
        spec: Dict[str, Any] = {
            "n": self.n,
            "p": self.p,
            "brackets": [
                {"i": i, "j": j, "k": k, "c": int(c) if c.denominator == 1 else float(c)}
                for i, j, k, c in self.constants
                if i < j
            ],
        }
        if self.names:
            spec["names"] = list(self.names)
        return spec


def _unpack(entry: RawEntry) -> Tuple[int, int, int, Any]:
    if isinstance(entry, BracketEntry):
        return entry.i, entry.j, entry.k, entry.c
    if isinstance(entry, dict):
        try:
            return int(entry["i"]), int(entry["j"]), int(entry["k"]), entry["c"]
        except KeyError as e:
            raise BadDimensions(f"bracket entry missing key {e}", {"entry": entry}) from e
    if len(entry) != 4:
        raise BadDimensions("bracket entry must be (i, j, k, c)", {"entry": list(entry)})
    i, j, k, c = entry
    return int(i), int(j), int(k), c


def validate_structure(
    raw: Iterable[RawEntry],
    n: int,
    p: int,
    names: Optional[Sequence[str]] = None,
) -> NilpotentAlgebra:
    """
    校验结构常数并补全反对称闭包

    Args:
        raw: (i, j, k, c) 条目, 下标从 1 开始
        n: 总维数
        p: 水平维数

    Returns:
        校验通过的代数

    Raises:
        BadDimensions: 维数或下标越界
        NotTwoStep: i>p, j>p 或 k<=p 的条目
        AntisymmetryViolation: 同时给出 c_ij^k 与 c_ji^k 且不互为相反数, 或 c_ii^k 非零
    """
    if not (isinstance(n, int) and isinstance(p, int)) or not 1 <= p <= n:
        raise BadDimensions("dimensions must satisfy 1 <= p <= n", {"n": n, "p": p})
    if names is not None and len(names) != n:
        raise BadDimensions("names must list one label per coordinate", {"n": n, "names": list(names)})

    given: Dict[Tuple[int, int, int], Fraction] = {}
    for entry in raw:
        i, j, k, c = _unpack(entry)
        for index in (i, j, k):
            if not 1 <= index <= n:
                raise BadDimensions(
                    f"index {index} out of range 1..{n}", {"entry": [i, j, k], "n": n}
                )
        if i > p or j > p or k <= p:
            raise NotTwoStep(
                "brackets must pair horizontal indices and land in the center",
                {"entry": [i, j, k], "p": p},
            )
        value = as_fraction(c)
        if i == j:
            if value != 0:
                raise AntisymmetryViolation(
                    f"c_{i}{i}^{k} must vanish", {"entry": [i, j, k], "c": str(value)}
                )
            continue
        key = (i, j, k)
        if key in given and given[key] != value:
            raise AntisymmetryViolation(
                f"conflicting values for c_{i}{j}^{k}", {"entry": [i, j, k]}
            )
        given[key] = value

    closed: Dict[Tuple[int, int, int], Fraction] = {}
    for (i, j, k), value in given.items():
        mirror = given.get((j, i, k))
        if mirror is not None and mirror != -value:
            raise AntisymmetryViolation(
                f"c_{i}{j}^{k} = {value} but c_{j}{i}^{k} = {mirror}",
                {"entry": [i, j, k], "c": str(value), "mirror": str(mirror)},
            )
        if value != 0:
            closed[(i, j, k)] = value
            closed[(j, i, k)] = -value

    constants = tuple(sorted((i, j, k, c) for (i, j, k), c in closed.items()))
    return NilpotentAlgebra(n=n, p=p, constants=constants, names=tuple(names or ()))


def _check_dim(algebra: NilpotentAlgebra, *vectors: Sequence[Any]) -> None:
    for v in vectors:
        size = np.shape(v)[-1] if isinstance(v, np.ndarray) else len(v)
        if size != algebra.n:
            raise DimensionMismatch(
                f"expected {algebra.n} coordinates, got {size}", {"n": algebra.n, "got": size}
            )


def bracket(
    algebra: NilpotentAlgebra, a: Sequence[Any], b: Sequence[Any]
) -> Union[Tuple[Fraction, ...], np.ndarray]:
    """[a, b]_k = Σ_{i,j<=p} a_i b_j c_ij^k (k>p), 其余分量为 0"""
    _check_dim(algebra, a, b)
    if is_exact_sequence(a) and is_exact_sequence(b) and not isinstance(a, np.ndarray):
        out = [Fraction(0)] * algebra.n
        for (i, j, k), c in algebra.entries.items():
            out[algebra.p + k] += a[i] * b[j] * c
        return tuple(out)
    return algebra.bracket_array(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


def change_horizontal_basis(algebra: NilpotentAlgebra, P: Sequence[Sequence[Any]]) -> NilpotentAlgebra:
    """
    换水平基 X'_a = Σ_b P[b][a] X_b, 中心基不变

    新常数 c'_ab^k = Σ_{c,d} P[c][a] P[d][b] c_cd^k。P 必须可逆。
    """
    p = algebra.p
    matrix = [[as_fraction(x) for x in row] for row in P]
    if len(matrix) != p or any(len(row) != p for row in matrix):
        raise DimensionMismatch(f"basis change must be {p}x{p}", {"p": p})
    if sympy.Matrix(matrix).det() == 0:
        raise InvalidParameter("basis change matrix is singular")

    raw: List[Tuple[int, int, int, Fraction]] = []
    for k in range(algebra.m):
        for a in range(p):
            for b in range(a + 1, p):
                value = sum(
                    (matrix[c][a] * matrix[d][b] * coef
                     for (c, d, kk), coef in algebra.entries.items() if kk == k),
                    Fraction(0),
                )
                if value:
                    raw.append((a + 1, b + 1, p + k + 1, value))
    return validate_structure(raw, algebra.n, p, algebra.names)


def algebra_from_spec(spec: AlgebraSpec) -> NilpotentAlgebra:
    return validate_structure(spec.brackets, spec.n, spec.p, spec.names)


def load_algebra(path: Union[str, Path]) -> NilpotentAlgebra:
    """读取代数 JSON 文件"""
    return algebra_from_spec(load_model(path, AlgebraSpec))


# 预置代数

def heisenberg() -> NilpotentAlgebra:
    """h3: [X, Y] = Z"""
    return validate_structure([(1, 2, 3, 1)], 3, 2, ("x", "y", "z"))


def r_times_heisenberg() -> NilpotentAlgebra:
    """R x h3: 水平 X, Y, W, 中心 Z, [X, Y] = Z"""
    return validate_structure([(1, 2, 4, 1)], 4, 3, ("x", "y", "w", "z"))


def heisenberg_product() -> NilpotentAlgebra:
    """h3 x h3: [X1, X2] = Z1, [X3, X4] = Z2"""
    return validate_structure(
        [(1, 2, 5, 1), (3, 4, 6, 1)], 6, 4, ("x1", "y1", "x2", "y2", "z1", "z2")
    )


def abelian(d: int) -> NilpotentAlgebra:
    """R^d, 无括号"""
    return validate_structure([], d, d)


PRESETS = {
    "h3": heisenberg,
    "r_x_h3": r_times_heisenberg,
    "h3_x_h3": heisenberg_product,
}


def resolve_algebra(name_or_path: Union[str, Path]) -> NilpotentAlgebra:
    """预置名 (h3, r_x_h3, h3_x_h3, abelian<d>) 或文件路径"""
    key = str(name_or_path)
    if key in PRESETS:
        return PRESETS[key]()
    if key.startswith("abelian") and key[len("abelian"):].isdigit():
        return abelian(int(key[len("abelian"):]))
    return load_algebra(name_or_path)
