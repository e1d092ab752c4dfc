"""
非奇异性判定 - 结构常数秩判据

M(u)_{k,a} = Σ_i u_i c_{ia}^k 是 (n-p)×p 矩阵, 对 u 线性。群非奇异当且仅当
对所有 u ≠ 0 都有 rank M(u) = n - p。在单位球面上最小化 σ_min(M(u)):

- 先探测坐标轴 (给出规范的奇异见证)
- 中心一维时 σ_min 在球面上的最小值就是一个 p×p 矩阵的最小奇异值 (精确)
- 一般情形: 低差异采样 + 多起点局部下降 + Lipschitz 覆盖界
- 不能判定且常数有理、p <= 3 时, 用 sympy 求极大子式的公共实零点
"""

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Sequence

import numpy as np
import sympy
from scipy.optimize import minimize
from scipy.spatial import cKDTree
from scipy.stats import norm as gaussian
from scipy.stats import qmc

from app.constants import (
    ABNORMAL_TOLERANCE,
    COVERING_PROBES,
    COVERING_SAFETY,
    FIBONACCI_MAX_DIM,
    NONSINGULAR_THRESHOLD,
    SINGULAR_THRESHOLD,
    Verdict,
)
from core.algebra.structure import NilpotentAlgebra
from core.control.extremals import (
    ExtremalFlow,
    ExtremalState,
    Trajectory,
    momenta_array,
)
from core.errors import DimensionMismatch, InvalidHorizontalSpace, WitnessNotSingular
from core.geometry.horizontal import HorizontalSpace, projected_norm
from core.geometry.norms import EllipsoidNorm, Norm
from core.geometry.paths import HorizontalPath, PathSegment

logger = logging.getLogger(__name__)


# 球面采样

def sphere_points(dim: int, count: int, seed: int = 0) -> np.ndarray:
    """
    单位球面上的确定性点集

    dim=1: ±1; dim=2: 等距圆周; dim=3: Fibonacci 格点; 更高维: Sobol 序列经正态分位数映射后归一化。
    """
    if dim < 1:
        raise DimensionMismatch("sphere dimension must be positive", {"dim": dim})
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(count) / count
        return np.column_stack([np.cos(angles), np.sin(angles)])
    if dim == FIBONACCI_MAX_DIM:
        i = np.arange(count) + 0.5
        polar = np.arccos(1.0 - 2.0 * i / count)
        azimuth = np.pi * (1.0 + math.sqrt(5.0)) * i
        return np.column_stack([
            np.cos(azimuth) * np.sin(polar),
            np.sin(azimuth) * np.sin(polar),
            np.cos(polar),
        ])
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = sampler.random(count)
    g = gaussian.ppf(np.clip(u, 1e-12, 1 - 1e-12))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def covering_radius(points: np.ndarray, seed: int = 0, probes: int = COVERING_PROBES) -> float:
    """点集在球面上的覆盖半径 (弦距离); 圆周情形精确, 其余按随机探针估计 (可能偏小)"""
    dim = points.shape[1]
    if dim == 1:
        return 0.0
    if dim == 2:
        return 2.0 * math.sin(math.pi / len(points) / 2.0)
    rng = np.random.default_rng(seed)
    probe = rng.standard_normal((probes, dim))
    probe /= np.linalg.norm(probe, axis=1, keepdims=True)
    dist, _ = cKDTree(points).query(probe)
    return float(dist.max())


# 奇异性矩阵

def singularity_matrix(A: NilpotentAlgebra, u: Sequence[float]) -> np.ndarray:
    """M(u), 形状 (n-p, p); 支持批量 (..., p) -> (..., n-p, p)"""
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != A.p:
        raise DimensionMismatch(f"u must have {A.p} components", {"got": int(u.shape[-1])})
    return np.einsum("...i,iak->...ka", u, A.tensor)


def covector_matrix(A: NilpotentAlgebra, xi: np.ndarray) -> np.ndarray:
    """B(ξ)_{a,i} = Σ_k ξ_k c_ia^k, 满足 ξᵀM(u) = B(ξ)u"""
    return np.einsum("k,iak->ai", np.asarray(xi, dtype=float), A.tensor)


def sigma_min(A: NilpotentAlgebra, u: np.ndarray) -> np.ndarray:
    """批量 σ_min(M(u)); n-p > p 时恒为 0"""
    M = singularity_matrix(A, u)
    if A.m > A.p:
        return np.zeros(M.shape[:-2])
    return np.linalg.svd(M, compute_uv=False)[..., -1]


def _least_left_vector(M: np.ndarray) -> np.ndarray:
    U, _, _ = np.linalg.svd(M)
    return U[:, -1]


def _normalize_sign(v: np.ndarray) -> np.ndarray:
    v = np.where(np.abs(v) < 1e-15, 0.0, v)
    nz = np.flatnonzero(np.abs(v) > 1e-12)
    if len(nz) and v[nz[0]] < 0:
        v = -v
    return v


def witness_residual(A: NilpotentAlgebra, u: np.ndarray, xi: np.ndarray) -> float:
    """‖ξᵀM(u)‖ (u, ξ 已归一化)"""
    return float(np.linalg.norm(xi @ singularity_matrix(A, u)))


def polish_witness(A: NilpotentAlgebra, u: np.ndarray, rounds: int = 50) -> Dict[str, Any]:
    """
    交替投影: ξ 取 M(u) 的最小左奇异向量, u 投影到 ker B(ξ)

    Returns:
        {"u", "xi", "residual"}
    """
    u = np.asarray(u, dtype=float)
    u = u / np.linalg.norm(u)
    xi = _least_left_vector(singularity_matrix(A, u))
    residual = witness_residual(A, u, xi)
    for _ in range(rounds):
        if residual <= SINGULAR_THRESHOLD * 1e-2:
            break
        B = covector_matrix(A, xi)
        _, s, Vt = np.linalg.svd(B)
        tol = max(B.shape) * np.finfo(float).eps * max(1.0, s[0] if len(s) else 0.0)
        rank = int(np.sum(s > tol))
        null = Vt[rank:]
        if len(null) == 0:
            break
        projected = null.T @ (null @ u)
        size = np.linalg.norm(projected)
        if size <= 1e-12:
            break
        u_new = projected / size
        xi_new = _least_left_vector(singularity_matrix(A, u_new))
        new_residual = witness_residual(A, u_new, xi_new)
        if new_residual >= residual:
            break
        u, xi, residual = u_new, xi_new, new_residual
    return {"u": _normalize_sign(u), "xi": _normalize_sign(xi), "residual": residual}


# 报告

@dataclass
class SingularityReport:
    """判定结果; Undecidable 是值而不是错误"""

    verdict: Verdict
    epsilon: Optional[float] = None
    witness: Optional[np.ndarray] = None
    covector: Optional[np.ndarray] = None
    observed_min: Optional[float] = None
    certified_bound: Optional[float] = None
    bound_kind: str = "certified"
    samples: int = 0
    restarts: int = 0
    method: str = ""
    trace: Dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> Optional[Dict[str, float]]:
        if self.verdict is not Verdict.UNDECIDABLE:
            return None
        return {"observed_min": self.observed_min, "certified_bound": self.certified_bound, "bound_kind": self.bound_kind}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "verdict": self.verdict.value,
            "epsilon": self.epsilon,
            "witness": None if self.witness is None else self.witness.tolist(),
            "covector": None if self.covector is None else self.covector.tolist(),
            "observed_min": self.observed_min,
            "certified_bound": self.certified_bound,
            "bound_kind": self.bound_kind,
            "gap": self.gap,
            "samples": self.samples,
            "restarts": self.restarts,
            "method": self.method,
            "trace": self.trace,
        }


def _singular(A: NilpotentAlgebra, u: np.ndarray, method: str, **kwargs: Any) -> Optional[SingularityReport]:
    polished = polish_witness(A, u)
    if polished["residual"] > SINGULAR_THRESHOLD:
        return None
    return SingularityReport(
        Verdict.SINGULAR,
        witness=polished["u"],
        covector=polished["xi"],
        observed_min=polished["residual"],
        method=method,
        **kwargs,
    )


def _axis_probe(A: NilpotentAlgebra) -> Optional[SingularityReport]:
    for i, e in enumerate(np.eye(A.p)):
        if sigma_min(A, e) <= SINGULAR_THRESHOLD:
            logger.debug(f"axis e{i + 1} is singular")
            return _singular(A, e, "axis")
    return None


def _spectral_one_center(A: NilpotentAlgebra, nonsingular: float, singular: float) -> SingularityReport:
    """n-p = 1: min_{|u|=1} |uᵀC| = σ_min(C)"""
    C = A.tensor[:, :, 0]
    U, s, _ = np.linalg.svd(C)
    value = float(s[-1])
    if value <= singular:
        report = _singular(A, U[:, -1], "spectral")
        if report is not None:
            return report
    if value > nonsingular:
        return SingularityReport(
            Verdict.NONSINGULAR, epsilon=value, observed_min=value, certified_bound=value, method="spectral"
        )
    return SingularityReport(
        Verdict.UNDECIDABLE, observed_min=value, certified_bound=value, method="spectral"
    )


def _descend(A: NilpotentAlgebra, start: np.ndarray) -> tuple:
    def objective(v: np.ndarray) -> float:
        size = np.linalg.norm(v)
        if size == 0:
            return float("inf")
        return float(sigma_min(A, v / size))

    res = minimize(objective, start, method="Nelder-Mead", options={"xatol": 1e-13, "fatol": 1e-15, "maxiter": 400 * A.p})
    u = res.x / np.linalg.norm(res.x)
    return float(sigma_min(A, u)), u


def classify(
    A: NilpotentAlgebra,
    samples: int = 100_000,
    restarts: int = 64,
    seed: int = 0,
    threads: int = 1,
    nonsingular_threshold: float = NONSINGULAR_THRESHOLD,
    singular_threshold: float = SINGULAR_THRESHOLD,
    exact_fallback: bool = True,
) -> SingularityReport:
    """
    判定 A 是否非奇异

    Args:
        samples: 球面采样点数
        restarts: 局部下降的起点数 (取采样中最小的若干点)
        seed: Sobol 与覆盖探针的种子
        threads: 下降的并行度 (结果与调度无关)
    """
    if A.m == 0:
        # 交换群: 没有中心元需要表示
        return SingularityReport(Verdict.NONSINGULAR, method="vacuous")
    if A.p < A.m:
        report = _singular(A, np.eye(A.p)[0], "dimension", trace={"p": A.p, "center": A.m})
        if report is not None:
            return report
    probe = _axis_probe(A)
    if probe is not None:
        return probe
    if A.m == 1:
        return _spectral_one_center(A, nonsingular_threshold, singular_threshold)

    points = sphere_points(A.p, samples, seed)
    values = sigma_min(A, points)
    sample_min = float(values.min())
    h = covering_radius(points, seed)
    exact_cover = A.p <= 2
    if not exact_cover:
        # 探针只给出覆盖半径的下估计
        h *= COVERING_SAFETY
    bound_kind = "certified" if exact_cover else "sampled"
    lipschitz = float(np.linalg.norm(A.tensor))
    certified = sample_min - lipschitz * h

    order = np.argsort(values, kind="stable")[:restarts]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(lambda i: _descend(A, points[i]), order))
    best_value, best_u = sample_min, points[order[0]] if len(order) else points[0]
    for value, u in results:
        if value < best_value:
            best_value, best_u = value, u

    trace = {
        "sample_min": sample_min,
        "descent_min": best_value,
        "lipschitz": lipschitz,
        "covering_radius": h,
        "covering_exact": exact_cover,
    }
    common = dict(samples=len(points), restarts=len(order), bound_kind=bound_kind, trace=trace)
    logger.info("sphere search finished", extra=trace)

    if best_value <= singular_threshold * 1e4:
        report = _singular(A, best_u, "descent", **common)
        if report is not None:
            return report
    if certified > nonsingular_threshold:
        return SingularityReport(
            Verdict.NONSINGULAR, epsilon=certified, observed_min=best_value,
            certified_bound=certified, method="sampling", **common,
        )
    if exact_fallback and A.p <= 3:
        exact = exact_rank_drop(A)
        if exact is not None:
            trace["exact"] = True
            if exact["singular"]:
                report = _singular(A, np.asarray(exact["witness"], dtype=float), "exact", **common)
                if report is not None:
                    return report
            else:
                return SingularityReport(
                    Verdict.NONSINGULAR, epsilon=max(certified, best_value if best_value > 0 else 0.0),
                    observed_min=best_value, certified_bound=certified, method="exact", **common,
                )
    return SingularityReport(
        Verdict.UNDECIDABLE, observed_min=best_value, certified_bound=certified, method="sampling", **common
    )


def exact_rank_drop(A: NilpotentAlgebra, max_degree: int = 4) -> Optional[Dict[str, Any]]:
    """
    有理常数, p <= 3: 在仿射图 u = (0,…,0,1,u_{i+1},…) 上求全部 (n-p) 阶子式的公共实零点

    Returns:
        {"singular": bool, "witness": 有理向量或 None}; 次数过高或求解失败时 None
    """
    p, m = A.p, A.m
    if p > 3 or m > p:
        return None
    syms = sympy.symbols(f"u1:{p + 1}", real=True)
    M = sympy.zeros(m, p)
    for (i, a, k), c in A.entries.items():
        M[k, a] += sympy.Rational(c.numerator, c.denominator) * syms[i]
    minors = [M.extract(list(range(m)), list(cols)).det() for cols in itertools.combinations(range(p), m)]
    minors = [sympy.expand(expr) for expr in minors if sympy.expand(expr) != 0]
    if not minors:
        return {"singular": True, "witness": [1] + [0] * (p - 1)}
    if max(sympy.Poly(expr, *syms).total_degree() for expr in minors) > max_degree:
        return None

    for lead in range(p):
        fixed = {syms[j]: 0 for j in range(lead)}
        fixed[syms[lead]] = 1
        free = syms[lead + 1:]
        system = [expr.subs(fixed) for expr in minors]
        system = [expr for expr in system if expr != 0]
        if not system:
            return {"singular": True, "witness": [fixed.get(s, 0) for s in syms]}
        if any(expr.is_number for expr in system):
            continue
        try:
            solutions = sympy.solve(system, free, dict=True)
        except (NotImplementedError, ValueError):
            return None
        for sol in solutions:
            point = [sympy.sympify(fixed.get(s, sol.get(s, 0))) for s in syms]
            point = [v.subs({s: 0 for s in free}) for v in point]
            if all(v.is_real for v in point):
                return {"singular": True, "witness": [float(v) for v in point]}
    return {"singular": False, "witness": None}


# 异常极值

@dataclass
class PMPResiduals:
    ode: float
    hamiltonian: float
    momenta: float


@dataclass
class AbnormalExtremal:
    """λ(t) = (exp(tX₀), (0, ξ*)), ν = 0"""

    space: HorizontalSpace
    u: np.ndarray
    xi_c: np.ndarray

    @property
    def algebra(self) -> NilpotentAlgebra:
        return self.space.algebra

    @property
    def covector(self) -> np.ndarray:
        return np.concatenate([np.zeros(self.algebra.p), self.xi_c])

    @property
    def state(self) -> ExtremalState:
        return ExtremalState(np.zeros(self.algebra.n), self.covector, nu=0.0)

    def position(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        x = np.zeros((len(t), self.algebra.n))
        x[:, : self.algebra.p] = t[:, None] * self.u
        return x

    def path(self, T: float = 1.0) -> HorizontalPath:
        return HorizontalPath(self.space, [PathSegment(tuple(float(v) for v in self.u), T)])

    def trajectory(self, T: float = 1.0, samples: int = 100) -> Trajectory:
        flow = ExtremalFlow(self.algebra, self.space.norm)
        return flow.trajectory(self.state, T, samples, control=self.u)

    def pmp_residuals(self, T: float = 1.0, samples: int = 100) -> PMPResiduals:
        """
        沿样本时刻检查:

        - 状态方程 ẋ = X_u(x) 与余态方程 ξ̇_j = -½ Σ ξ_k u_i c_ji^k 的残差
        - 最大化 Hamilton 量 max_w h_w(λ) + ν (应恒为 0)
        """
        A = self.algebra
        p = A.p
        times = np.linspace(0.0, T, samples)
        x = self.position(times)
        xi = np.broadcast_to(self.covector, x.shape)
        velocity = np.zeros_like(x)
        velocity[:, :p] = self.u
        field_ = np.zeros_like(x)
        field_[:, :p] = self.u
        if A.m:
            field_[:, p:] = 0.5 * np.einsum("bi,j,ijk->bk", x[:, :p], self.u, A.tensor)
        costate = -0.5 * np.einsum("k,i,jik->j", self.xi_c, self.u, A.tensor)
        ode = max(float(np.abs(velocity - field_).max()), float(np.abs(costate).max()))
        h = momenta_array(A, x, xi)
        hamiltonian = float(np.max(np.abs(self.space.norm.dual(h))))
        return PMPResiduals(ode, hamiltonian, float(np.abs(h).max()))


def abnormal_from_witness(
    A: NilpotentAlgebra,
    H: HorizontalSpace,
    u: Sequence[float],
    xi: Sequence[float],
    tolerance: float = SINGULAR_THRESHOLD,
) -> AbnormalExtremal:
    """
    由奇异对 (u*, ξ*) 构造异常极值

    Raises:
        WitnessNotSingular: ‖ξ*ᵀM(u*)‖ > tolerance (归一化后)
    """
    if H.algebra != A:
        raise DimensionMismatch("space belongs to a different algebra")
    if not H.is_polarized:
        raise InvalidHorizontalSpace("abnormal extremals are built on the polarized space (use cone_space())")
    u = np.asarray(u, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if u.shape != (A.p,) or xi.shape != (A.m,):
        raise DimensionMismatch("witness shapes do not match the algebra", {"p": A.p, "center": A.m})
    if not np.any(u) or not np.any(xi):
        raise WitnessNotSingular("witness vectors must be nonzero")
    residual = witness_residual(A, u / np.linalg.norm(u), xi / np.linalg.norm(xi))
    if residual > tolerance:
        raise WitnessNotSingular("witness does not certify a rank drop", {"residual": residual})
    u_unit = u / projected_norm(H, u)
    extremal = AbnormalExtremal(H, u_unit, xi / np.linalg.norm(xi))
    check = extremal.pmp_residuals()
    if max(check.ode, check.hamiltonian) > ABNORMAL_TOLERANCE:
        raise WitnessNotSingular("constructed extremal violates the PMP", {"ode": check.ode, "hamiltonian": check.hamiltonian})
    return extremal


# 中心方向的内切常数

def _min_dual_over_center(A: NilpotentAlgebra, N: Norm, X: np.ndarray, etas: Optional[np.ndarray]) -> float:
    M = singularity_matrix(A, X)
    if A.m == 1:
        return float(N.dual(M[0]))
    if N.is_polyhedral:
        return float(np.min(np.atleast_1d(N.dual(etas @ M))))
    G_inv = N.gram_inv if isinstance(N, EllipsoidNorm) else np.eye(A.p)
    return float(math.sqrt(max(np.linalg.eigvalsh(M @ G_inv @ M.T)[0], 0.0)))


def estimate_L0(A: NilpotentAlgebra, N: Norm, samples: int = 2000, seed: int = 0) -> float:
    """
    min over N-单位 X 与欧氏单位中心方向 η 的 N*(Y ↦ <η, [X, Y]>)

    为 0 当且仅当 A 奇异。
    """
    if N.dim != A.p:
        raise DimensionMismatch("norm dimension must equal p")
    if A.m == 0:
        return 0.0
    etas = sphere_points(A.m, max(samples, 64), seed) if A.m > 1 else None
    directions = sphere_points(A.p, samples, seed)
    directions = directions / np.atleast_1d(N.evaluate(directions))[:, None]
    values = np.array([_min_dual_over_center(A, N, X, etas) for X in directions])

    def objective(v: np.ndarray) -> float:
        size = N.evaluate(v)
        return float("inf") if size == 0 else _min_dual_over_center(A, N, v / size, etas)

    best = float(values.min())
    for i in np.argsort(values, kind="stable")[:8]:
        res = minimize(objective, directions[i], method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-12})
        best = min(best, float(res.fun))
    return max(best, 0.0)
