"""
距离估计 - 下界、上界与估计常数

d∞ 的估计总在锥空间 (V∞, ‖·‖∞) 上进行:

- 下界: 投影界 ‖π(g)‖∞; 中心帽 κ 给出 d∞(z) >= √(‖z‖/κ); K₁ 给出 √(‖g_c‖/K₁)
- 上界: 打靶 (极值的时间 T) 与 k 段折线的直接优化, 取较小者
- K₁, L, K₂, K 只是采样得到的估计值, 不是严格上确界
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from app.constants import ENDPOINT_TOLERANCE, WITNESS_TIE_TOLERANCE
from core.algebra.group import GroupElement, product_array
from core.control.closed_forms import closed_form_array, supports_closed_form
from core.control.extremals import ExtremalFlow, Trajectory
from core.control.nonsingular import sphere_points
from core.control.shooting import solve_shooting
from core.errors import InvalidParameter, NoConvergence, SeedInfeasible
from core.geometry.horizontal import HorizontalSpace, lift_min_norm, projected_norm, vertex_weights
from core.geometry.norms import EllipsoidNorm
from core.geometry.paths import (
    HorizontalPath,
    close_central_defect,
    commutator_representatives,
    path_endpoint,
)

logger = logging.getLogger(__name__)

_SMOOTHING = 1e-9


@dataclass
class DistanceEstimate:
    """d∞(g) 的区间 [lower, upper]; upper 由 witness (或 trajectory) 实现"""

    target: GroupElement
    lower: float
    upper: float
    lower_method: str
    upper_method: str
    witness: Optional[HorizontalPath] = None
    trajectory: Optional[Trajectory] = None
    covector: Optional[np.ndarray] = None
    clipped: bool = False
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": [float(x) for x in self.target.coords],
            "lower": self.lower,
            "upper": self.upper,
            "gap": self.gap,
            "methods": {"lower": self.lower_method, "upper": self.upper_method},
            "clipped": self.clipped,
            "covector": None if self.covector is None else self.covector.tolist(),
            "witness_segments": None if self.witness is None else len(self.witness),
            "diagnostics": self.diagnostics,
        }


@dataclass
class ConstantEstimate:
    """采样估计的常数"""

    value: float
    samples: int
    method: str
    details: Dict[str, Any] = field(default_factory=dict)


# 路径优化

class PathOptimizer:
    """
    在 k 段水平折线上最小化长度, 端点约束 E(W) = g

    E(W) = Σ w_s + ½ Σ_t [P_t, w_t], w_s = B W_s。对 w_s 的导数为
    I + ½[0; K(R_s)], R_s = 后缀和 - 前缀和, K(R)_{c,i} = Σ_j c_ij^c R_j。
    """

    def __init__(self, space: HorizontalSpace, target: GroupElement):
        self.space = space
        self.algebra = space.algebra
        self.target = target.as_array()
        self.basis = space.basis
        self.top = space.top

    def endpoint(self, W: np.ndarray) -> np.ndarray:
        return product_array(self.algebra, W @ self.basis.T)

    def jacobian(self, W: np.ndarray) -> np.ndarray:
        """(n, k·q)"""
        A = self.algebra
        p = A.p
        k, q = W.shape
        wh = W @ self.top.T
        prefix = np.cumsum(wh, axis=0) - wh
        suffix = wh.sum(axis=0) - np.cumsum(wh, axis=0)
        K = np.einsum("ijc,sj->sci", A.tensor, suffix - prefix)
        J = np.broadcast_to(self.basis, (k, A.n, q)).copy()
        if A.m:
            J[:, p:, :] += 0.5 * np.einsum("sci,ib->scb", K, self.top)
        return J.transpose(1, 0, 2).reshape(A.n, k * q)

    def error(self, W: np.ndarray) -> float:
        return float(np.linalg.norm(self.endpoint(W) - self.target))

    def length(self, W: np.ndarray) -> float:
        return float(np.sum(self.space.norm.evaluate(W)))

    def repair(self, W: np.ndarray, rounds: int = 30) -> np.ndarray:
        """Gauss-Newton 最小范数修正到可行"""
        W = W.copy()
        scale = max(1.0, float(np.linalg.norm(self.target)))
        for _ in range(rounds):
            r = self.target - self.endpoint(W)
            if np.linalg.norm(r) <= 1e-13 * scale:
                break
            step, *_ = np.linalg.lstsq(self.jacobian(W), r, rcond=None)
            W = W + step.reshape(W.shape)
        return W

    def seed(self, segments: int) -> np.ndarray:
        """直线提升到 π(g), 再接中心缺陷的盒形路径, 按长度细分到 k 段"""
        A = self.algebra
        Y = lift_min_norm(self.space, GroupElement.from_array(A, self.target))
        straight = HorizontalPath.straight(self.space, Y) if np.any(Y) else HorizontalPath(self.space)
        defect = self.target - path_endpoint(straight).as_array()
        defect[: A.p] = 0.0
        box = close_central_defect(self.space, defect)
        pieces = np.array([seg.vector() for seg in straight.concatenate(box).segments])
        if len(pieces) == 0:
            return np.zeros((max(segments, 1), self.space.q))
        lengths = np.atleast_1d(self.space.norm.evaluate(pieces))
        counts = np.ones(len(pieces), dtype=int)
        extra = segments - len(pieces)
        if extra > 0:
            share = np.floor(extra * lengths / lengths.sum()).astype(int)
            counts += share
            leftover = extra - int(share.sum())
            for i in np.argsort(-lengths, kind="stable")[:leftover]:
                counts[i] += 1
        return np.concatenate([np.repeat(w[None] / c, c, axis=0) for w, c in zip(pieces, counts)])

    def _solve_polyhedral(self, W0: np.ndarray, maxiter: int) -> np.ndarray:
        V = self.space.norm.vertices
        k, K = len(W0), len(V)
        lam0 = np.array([vertex_weights(V, w) for w in W0]).ravel()

        def constraint(lam: np.ndarray) -> np.ndarray:
            return self.endpoint(lam.reshape(k, K) @ V) - self.target

        def constraint_jac(lam: np.ndarray) -> np.ndarray:
            J = self.jacobian(lam.reshape(k, K) @ V).reshape(self.algebra.n, k, -1)
            return np.einsum("nsq,vq->nsv", J, V).reshape(self.algebra.n, k * K)

        res = minimize(
            lambda lam: float(lam.sum()),
            lam0,
            jac=lambda lam: np.ones_like(lam),
            constraints=[{"type": "eq", "fun": constraint, "jac": constraint_jac}],
            bounds=[(0.0, None)] * (k * K),
            method="SLSQP",
            options={"maxiter": maxiter, "ftol": 1e-14},
        )
        return res.x.reshape(k, K) @ V

    def _solve_smooth(self, W0: np.ndarray, maxiter: int) -> np.ndarray:
        shape = W0.shape
        G = self.space.norm.gram if isinstance(self.space.norm, EllipsoidNorm) else np.eye(self.space.q)

        def objective(x: np.ndarray) -> Tuple[float, np.ndarray]:
            W = x.reshape(shape)
            GW = W @ G
            size = np.sqrt(np.einsum("sq,sq->s", W, GW) + _SMOOTHING ** 2)
            return float(size.sum()), (GW / size[:, None]).ravel()

        res = minimize(
            objective,
            W0.ravel(),
            jac=True,
            constraints=[{
                "type": "eq",
                "fun": lambda x: self.endpoint(x.reshape(shape)) - self.target,
                "jac": lambda x: self.jacobian(x.reshape(shape)),
            }],
            method="SLSQP",
            options={"maxiter": maxiter, "ftol": 1e-14},
        )
        return res.x.reshape(shape)

    def optimize(self, W0: np.ndarray, maxiter: int = 500) -> np.ndarray:
        if self.space.norm.is_polyhedral:
            W = self._solve_polyhedral(W0, maxiter)
        else:
            W = self._solve_smooth(W0, maxiter)
        return self.repair(W)


def distance_upper_via_paths(
    H: HorizontalSpace,
    g: GroupElement,
    segments: int = 64,
    restarts: int = 4,
    seed: int = 0,
    threads: int = 1,
) -> DistanceEstimate:
    """
    k 段折线长度最小化给出的上界 (在 H 自身的路径上)

    起点 0 为种子路径本身, 其余起点在种子上加扰动; 结果与种子比较取短者。

    Raises:
        SeedInfeasible: 中心缺陷无法用括号实现
    """
    if segments < 1:
        raise InvalidParameter("segments must be positive", {"segments": segments})
    lower = projected_norm(H, g.as_array()[: H.algebra.p])
    if g.is_identity:
        return DistanceEstimate(g, 0.0, 0.0, "identity", "identity", HorizontalPath(H))
    problem = PathOptimizer(H, g)
    W_seed = problem.seed(segments)
    scale = max(problem.length(W_seed) / len(W_seed), 1e-6)
    rng = np.random.default_rng(seed)
    starts = [W_seed] + [
        W_seed + 0.25 * scale * rng.standard_normal(W_seed.shape) for _ in range(restarts)
    ]

    def run(W0: np.ndarray) -> Optional[np.ndarray]:
        try:
            W = problem.optimize(W0)
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.debug(f"path optimization failed: {e}")
            return None
        return W if problem.error(W) <= ENDPOINT_TOLERANCE else None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(run, starts))

    best, best_length = W_seed, problem.length(W_seed)
    for W in results:
        if W is not None and problem.length(W) < best_length * (1 - 1e-12):
            best, best_length = W, problem.length(W)
    witness = HorizontalPath.from_increments(H, best).merged()
    logger.info(
        "path optimization finished",
        extra={"segments": len(W_seed), "seed_length": problem.length(W_seed), "length": best_length},
    )
    return DistanceEstimate(
        g,
        min(lower, float(witness.length)),
        float(witness.length),
        "projection",
        "paths",
        witness,
        diagnostics={"segments": len(witness), "endpoint_error": problem.error(best)},
    )


# 估计常数

def _upper_function(cone: HorizontalSpace, segments: int = 16) -> Callable[[np.ndarray], float]:
    """锥距离的上界求值器: 有闭式时用闭式, 否则用路径优化"""
    if supports_closed_form(cone):
        return lambda x: float(closed_form_array(cone, x[None])[0])

    def upper(x: np.ndarray) -> float:
        g = GroupElement.from_array(cone.algebra, x)
        return distance_upper_via_paths(cone, g, segments=segments, restarts=0).upper

    return upper


def _central_element(cone: HorizontalSpace, zeta: np.ndarray) -> np.ndarray:
    x = np.zeros(cone.algebra.n)
    x[cone.algebra.p:] = zeta
    return x


def estimate_central_cap(H: HorizontalSpace, directions: int = 64, seed: int = 0) -> ConstantEstimate:
    """κ = sup{‖z‖ : z 中心, d∞(z) <= 1} = max_ζ 1/d∞(ζ)² (ζ 为欧氏单位中心方向)"""
    cone = H.cone_space()
    A = cone.algebra
    if A.m == 0 or A.is_abelian:
        return ConstantEstimate(0.0, 0, "abelian")
    upper = _upper_function(cone)
    zetas = sphere_points(A.m, directions, seed)
    caps = np.array([1.0 / upper(_central_element(cone, z)) ** 2 for z in zetas])
    method = "closed_form" if supports_closed_form(cone) else "paths"
    return ConstantEstimate(float(caps.max()), len(zetas), method, {"min_cap": float(caps.min())})


def _fiber_extent(upper: Callable[[np.ndarray], float], x: np.ndarray, direction: np.ndarray, steps: int) -> float:
    """max s >= 0 使 x·exp(s·direction) 的上界 <= 1 (二分)"""
    if upper(x) > 1.0 + 1e-9:
        return 0.0
    hi = 1.0
    for _ in range(30):
        if upper(x + hi * direction) > 1.0 + 1e-9:
            break
        hi *= 2.0
    lo = 0.0
    for _ in range(steps):
        mid = 0.5 * (lo + hi)
        if upper(x + mid * direction) <= 1.0 + 1e-9:
            lo = mid
        else:
            hi = mid
    return lo


def estimate_K1(
    H: HorizontalSpace,
    samples: int = 32,
    seed: int = 0,
    cap: Optional[ConstantEstimate] = None,
) -> ConstantEstimate:
    """
    K₁ = sup{‖x⁻¹y‖ : x, y ∈ B(1), x⁻¹y 中心} 的下估计

    先取单位元上方的纤维 (cap(ζ) + cap(-ζ)), 再在单位速度极值端点 x 上沿中心方向二分,
    只接受上界 <= 1 的点。对样本数单调不减。给出 cap 时 κ 本身也是下界 (x = id, y = 帽顶点)。
    """
    cone = H.cone_space()
    A = cone.algebra
    if A.m == 0 or A.is_abelian:
        return ConstantEstimate(0.0, 0, "abelian")
    upper = _upper_function(cone)
    exact = supports_closed_form(cone)
    steps = 40 if exact else 12

    zetas = sphere_points(A.m, 16, seed) if A.m > 1 else np.array([[1.0]])
    best = 0.0
    for z in zetas:
        plus = 1.0 / upper(_central_element(cone, z)) ** 2
        minus = 1.0 / upper(_central_element(cone, -z)) ** 2
        best = max(best, plus + minus)
    if cap is not None:
        best = max(best, cap.value)
    fiber = best

    rng = np.random.default_rng(seed)
    flow = ExtremalFlow(A, cone.norm)
    for _ in range(samples):
        xi = rng.standard_normal(A.n)
        zeta = rng.standard_normal(A.m)
        zeta /= np.linalg.norm(zeta)
        dual = float(cone.norm.dual(xi[: A.p]))
        if dual <= 1e-12:
            continue
        xi[: A.p] /= dual
        x = flow.endpoints(xi[None], np.array([1.0]))[0]
        direction = _central_element(cone, zeta)
        extent = _fiber_extent(upper, x, direction, steps) + _fiber_extent(upper, x, -direction, steps)
        best = max(best, extent)
    logger.debug("K1 estimate", extra={"fiber": fiber, "value": best, "samples": samples})
    return ConstantEstimate(best, samples, "fiber+extremal", {"fiber": fiber, "exact_upper": exact})


def estimate_L(H: HorizontalSpace, directions: int = 64, seed: int = 0) -> ConstantEstimate:
    """L = inf_ζ max{‖[X, Y]‖ : X, Y 单位, [X, Y] ∈ ℝ₊ζ}"""
    cone = H.cone_space()
    A = cone.algebra
    if A.m == 0:
        return ConstantEstimate(0.0, 0, "abelian")
    zetas = sphere_points(A.m, directions, seed)
    values = []
    for z in zetas:
        pair = commutator_representatives(cone, z)
        values.append(0.0 if pair is None else pair.value)
    return ConstantEstimate(float(min(values)), len(zetas), "commutator_representatives")


def k2_from_pair(d: float, d_inf: float) -> float:
    """满足 d/K₂ - K₂ <= d∞ <= K₂·d + K₂ 的最小 K₂ (至少为 1)"""
    return max(1.0, d_inf / (d + 1.0), 0.5 * (-d_inf + math.sqrt(d_inf * d_inf + 4.0 * d)))


def estimate_K2(
    H: HorizontalSpace,
    points: Sequence[GroupElement],
    segments: int = 16,
    seed: int = 0,
) -> ConstantEstimate:
    """
    由样本点上的 (d, d∞) 估计 K₂; 极化空间上 d = d∞, 恰为 1
    """
    if H.is_polarized:
        return ConstantEstimate(1.0, len(points), "polarized")
    value = 1.0
    for g in points:
        d = distance_upper_via_paths(H, g, segments=segments, restarts=0, seed=seed).upper
        d_inf = estimate_distance(H, g, segments=segments, path_restarts=0, shooting_restarts=4, seed=seed).midpoint
        value = max(value, k2_from_pair(d, d_inf))
    return ConstantEstimate(value, len(points), "sampled_pairs")


def estimate_K(k1: float, k2: float, L: float) -> float:
    """K = 64·K₁·K₂²/L"""
    if L <= 0:
        raise InvalidParameter("L must be positive (singular groups have no such constant)", {"L": L})
    return 64.0 * k1 * k2 * k2 / L


# 下界与组合估计

@dataclass
class LowerBound:
    value: float
    method: str


def distance_lower_bound(
    H: HorizontalSpace,
    g: GroupElement,
    cap: Optional[ConstantEstimate] = None,
    k1: Optional[ConstantEstimate] = None,
    seed: int = 0,
) -> LowerBound:
    """
    max(‖π(g)‖∞, 中心界)

    中心元用帽常数 κ: √(‖z‖/κ); 其余用 K₁ (x = exp(Y_g) 时 x⁻¹g = (0, g_c)): √(‖g_c‖/K₁)。
    """
    A = H.algebra
    x = g.as_array()
    projection = projected_norm(H, x[: A.p])
    central = float(np.linalg.norm(x[A.p:])) if A.m else 0.0
    if central == 0.0 or A.is_abelian:
        return LowerBound(projection, "projection")
    if g.is_central:
        cap = cap or estimate_central_cap(H, seed=seed)
        if cap.value <= 0:
            return LowerBound(projection, "projection")
        bound, method = math.sqrt(central / cap.value), "central_cap"
    else:
        k1 = k1 or estimate_K1(H, seed=seed, cap=cap)
        if k1.value <= 0:
            return LowerBound(projection, "projection")
        bound, method = math.sqrt(central / k1.value), "K1"
    if bound > projection:
        return LowerBound(bound, method)
    return LowerBound(projection, "projection")


def estimate_distance(
    H: HorizontalSpace,
    g: GroupElement,
    segments: int = 64,
    path_restarts: int = 4,
    shooting_restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    cap: Optional[ConstantEstimate] = None,
    k1: Optional[ConstantEstimate] = None,
    tolerance: float = ENDPOINT_TOLERANCE,
) -> DistanceEstimate:
    """
    d∞(g) 的组合估计

    上界取打靶与路径优化中较小者 (相差在 1e-7 相对误差内时保留折线见证),
    下界大于上界时截断并标记 clipped。
    """
    cone = H.cone_space()
    if g.is_identity:
        return DistanceEstimate(g, 0.0, 0.0, "identity", "identity", HorizontalPath(cone))
    lower = distance_lower_bound(cone, g, cap=cap, k1=k1, seed=seed)

    candidates: List[DistanceEstimate] = []
    diagnostics: Dict[str, Any] = {}
    try:
        candidates.append(
            distance_upper_via_paths(cone, g, segments=segments, restarts=path_restarts, seed=seed, threads=threads)
        )
    except SeedInfeasible as e:
        diagnostics["paths"] = e.message
    try:
        shot = solve_shooting(cone, g, restarts=shooting_restarts, seed=seed, threads=threads, tolerance=tolerance)
        path = shot.path(cone)
        candidates.append(
            DistanceEstimate(
                g, lower.value, shot.T, lower.method, "shooting",
                witness=path,
                trajectory=None if path is not None else shot.trajectory(cone),
                covector=shot.covector,
                diagnostics={"shooting_error": shot.error, "converged": shot.converged},
            )
        )
    except NoConvergence as e:
        diagnostics["shooting"] = e.details
    if not candidates:
        raise SeedInfeasible("no upper bound could be produced", diagnostics)

    best = candidates[0]
    for cand in candidates[1:]:
        if cand.upper < best.upper * (1 - WITNESS_TIE_TOLERANCE):
            best = cand
    diagnostics.update(best.diagnostics)
    diagnostics["uppers"] = {c.upper_method: c.upper for c in candidates}

    value, clipped = lower.value, False
    if value > best.upper:
        value, clipped = best.upper, True
        logger.warning("lower bound exceeds upper bound, clipping", extra={"lower": lower.value, "upper": best.upper})
    return DistanceEstimate(
        g, value, best.upper, lower.method, best.upper_method,
        witness=best.witness,
        trajectory=best.trajectory,
        covector=best.covector,
        clipped=clipped,
        diagnostics=diagnostics,
    )


def shoot(
    H: HorizontalSpace,
    target: GroupElement,
    restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    tolerance: float = ENDPOINT_TOLERANCE,
) -> DistanceEstimate:
    """
    只用打靶的估计: upper = T, lower 为 distance_lower_bound

    Raises:
        NoConvergence: 所有起点都未达到端点容差
    """
    cone = H.cone_space()
    if target.is_identity:
        return DistanceEstimate(target, 0.0, 0.0, "identity", "identity", HorizontalPath(cone))
    shot = solve_shooting(cone, target, restarts=restarts, seed=seed, threads=threads, tolerance=tolerance)
    lower = distance_lower_bound(cone, target, seed=seed)
    path = shot.path(cone)
    value = min(lower.value, shot.T)
    return DistanceEstimate(
        target, value, shot.T, lower.method, "shooting",
        witness=path,
        trajectory=None if path is not None else shot.trajectory(cone),
        covector=shot.covector,
        clipped=lower.value > shot.T,
        diagnostics={"shooting_error": shot.error, "converged": shot.converged, "restart": shot.restart},
    )
