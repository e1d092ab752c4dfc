"""
两点打靶 - 时间最优问题的边值求解

未知量 (a, ξ_c, T), 初始水平余向量 ξ_h = a / N*(a) 使 Hamilton 量为 1 (单位速度法极值)。
残差为端点与目标之差, 中心坐标按 1/(1+|g_k|) 加权。多起点阻尼最小二乘 (trf),
雅可比矩阵用一次批量流计算的前向差分。
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from scipy.optimize import least_squares

from app.constants import (
    CENTRAL_MOMENTUM_RANGE,
    ENDPOINT_TOLERANCE,
    MAX_POLISH_CANDIDATES,
    SHOOTING_T_MIN,
)
from core.algebra.group import GroupElement
from core.control.extremals import ExtremalFlow, ExtremalState, Trajectory
from core.errors import InvalidHorizontalSpace, MomentaVanished, NoConvergence
from core.geometry.horizontal import HorizontalSpace
from core.geometry.paths import HorizontalPath

logger = logging.getLogger("shooting")


@dataclass
class ShootingResult:
    """收敛的打靶解"""

    T: float
    covector: np.ndarray
    error: float
    restart: int
    attempts: int
    converged: int

    def trajectory(self, space: HorizontalSpace, steps: int = 2048) -> Trajectory:
        flow = ExtremalFlow(space.algebra, space.norm)
        return flow.trajectory(ExtremalState(np.zeros(space.algebra.n), self.covector), self.T, steps)

    def path(self, space: HorizontalSpace) -> Optional[HorizontalPath]:
        """多面体范数下的精确分段直线路径; 光滑范数返回 None"""
        if not space.norm.is_polyhedral:
            return None
        return self.trajectory(space, steps=1).to_path(space).merged()


@dataclass
class _Attempt:
    restart: int
    params: np.ndarray
    error: float


class ShootingProblem:
    """
    单位元到 target 的打靶问题

    Args:
        space: 极化水平空间
        target: 目标元素
    """

    def __init__(self, space: HorizontalSpace, target: GroupElement):
        if not space.is_polarized:
            raise InvalidHorizontalSpace("shooting runs on the polarized space (use cone_space())")
        self.space = space
        self.algebra = space.algebra
        self.flow = ExtremalFlow(space.algebra, space.norm)
        self.target = target.as_array()
        p = self.algebra.p
        self.weights = np.ones(self.algebra.n)
        self.weights[p:] = 1.0 / (1.0 + np.abs(self.target[p:]))

    def covectors(self, params: np.ndarray) -> np.ndarray:
        """(B, p+m+1) -> (B, n) 初始余向量"""
        p = self.algebra.p
        params = np.atleast_2d(params)
        a = params[:, :p]
        dual = np.atleast_1d(self.space.norm.dual(a))
        dual = np.where(dual > 0, dual, 1.0)
        return np.concatenate([a / dual[:, None], params[:, p:-1]], axis=1)

    def endpoints(self, params: np.ndarray) -> np.ndarray:
        params = np.atleast_2d(params)
        return self.flow.endpoints(self.covectors(params), params[:, -1])

    def residual(self, params: np.ndarray) -> np.ndarray:
        try:
            end = self.endpoints(params)[0]
        except MomentaVanished:
            return np.full(self.algebra.n, 1e6)
        return self.weights * (end - self.target)

    def jacobian(self, params: np.ndarray) -> np.ndarray:
        k = len(params)
        steps = 1e-7 * np.maximum(1.0, np.abs(params))
        batch = np.repeat(params[None], k + 1, axis=0)
        batch[1:] += np.diag(steps)
        try:
            ends = self.endpoints(batch)
        except MomentaVanished:
            return np.eye(self.algebra.n, k)
        return (self.weights[:, None] * (ends[1:] - ends[0]).T) / steps[None, :]

    def error(self, params: np.ndarray) -> float:
        try:
            return float(np.linalg.norm(self.endpoints(params)[0] - self.target))
        except MomentaVanished:
            return float("inf")

    def initial_guesses(self, restarts: int, rng: np.random.Generator) -> np.ndarray:
        """水平部分取 π(g) 方向加扰动, 中心部分对数均匀并带随机符号, 最后一个起点 ξ_c = 0"""
        A = self.algebra
        p, m = A.p, A.m
        horizontal = self.target[:p]
        central = self.target[p:]
        scale = float(self.space.norm.evaluate(horizontal)) + 2.0 * float(np.sqrt(np.linalg.norm(central)))
        lo, hi = np.log(CENTRAL_MOMENTUM_RANGE[0]), np.log(CENTRAL_MOMENTUM_RANGE[1])
        guesses = np.empty((restarts, p + m + 1))
        for r in range(restarts):
            if np.any(horizontal):
                a = horizontal / np.linalg.norm(horizontal) + 0.3 * rng.standard_normal(p)
            else:
                a = rng.standard_normal(p)
            xi_c = rng.choice([-1.0, 1.0], size=m) * np.exp(rng.uniform(lo, hi, size=m))
            if r == restarts - 1:
                xi_c = np.zeros(m)
            T = max(scale, 1e-3) * float(np.exp(rng.uniform(np.log(0.8), np.log(1.25))))
            guesses[r] = np.concatenate([a, xi_c, [T]])
        return guesses

    def solve_from(self, restart: int, guess: np.ndarray, max_nfev: int = 200) -> _Attempt:
        lower = np.full(len(guess), -np.inf)
        lower[-1] = SHOOTING_T_MIN
        guess = guess.copy()
        guess[-1] = max(guess[-1], SHOOTING_T_MIN * 2)
        try:
            res = least_squares(
                self.residual,
                guess,
                jac=self.jacobian,
                bounds=(lower, np.full(len(guess), np.inf)),
                method="trf",
                xtol=1e-15,
                ftol=1e-15,
                gtol=1e-15,
                max_nfev=max_nfev,
            )
            params = res.x
        except (ValueError, np.linalg.LinAlgError) as e:
            logger.debug(f"restart {restart} failed: {e}")
            return _Attempt(restart, guess, float("inf"))
        return _Attempt(restart, params, self.error(params))


def solve_shooting(
    space: HorizontalSpace,
    target: GroupElement,
    restarts: int = 32,
    seed: int = 0,
    threads: int = 1,
    tolerance: float = ENDPOINT_TOLERANCE,
) -> ShootingResult:
    """
    多起点打靶, 返回收敛解中 T 最小者 (并列按起点编号)

    Raises:
        NoConvergence: 没有起点达到端点容差
    """
    if target.is_identity:
        return ShootingResult(0.0, np.zeros(space.algebra.n), 0.0, -1, 0, 0)
    problem = ShootingProblem(space, target)
    rng = np.random.default_rng(seed)
    guesses = problem.initial_guesses(restarts, rng)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        attempts: List[_Attempt] = list(pool.map(lambda r: problem.solve_from(r, guesses[r]), range(restarts)))

    # 未达容差但接近的候选再精修一次
    near = sorted(
        (a for a in attempts if tolerance < a.error <= 1e-3),
        key=lambda a: (a.params[-1], a.restart),
    )[:MAX_POLISH_CANDIDATES]
    polished = {a.restart: problem.solve_from(a.restart, a.params, max_nfev=400) for a in near}
    attempts = [polished.get(a.restart, a) if polished.get(a.restart, a).error < a.error else a for a in attempts]

    good = sorted((a for a in attempts if a.error <= tolerance), key=lambda a: (a.params[-1], a.restart))
    logger.info(
        "shooting finished",
        extra={"restarts": restarts, "converged": len(good), "best_error": min(a.error for a in attempts)},
    )
    if not good:
        raise NoConvergence(
            "no restart reached the endpoint tolerance",
            {"restarts": restarts, "best_error": min(a.error for a in attempts), "tolerance": tolerance},
        )
    best = good[0]
    return ShootingResult(
        float(best.params[-1]),
        problem.covectors(best.params)[0],
        best.error,
        best.restart,
        restarts,
        len(good),
    )
