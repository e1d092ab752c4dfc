"""
极值曲线 - 极化二步群上的 Hamilton 流

状态为 (x, ξ), 控制 u 由 (PMP3) 取为水平动量 h 的对偶支撑。记 Ω_ij = Σ_k ξ_k c_ji^k,
则 ẋ_h = u, ẋ_c = ½[x_h, u], ḣ = Ω u, 中心动量 ξ_c 守恒。

- 多面体范数: 控制分段常值, 两次切换之间 x 与 h 都是 t 的仿射函数, 按事件精确推进。
- 光滑范数 (L2/椭球): 定步长 RK4 采样轨迹; 端点也可以用矩阵指数精确计算 (打靶用)。
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.linalg import expm

from app.constants import ABNORMAL_TOLERANCE, TIE_TOLERANCE
from core.algebra.group import GroupElement
from core.algebra.structure import NilpotentAlgebra
from core.errors import DimensionMismatch, InvalidParameter, MomentaVanished
from core.geometry.horizontal import HorizontalSpace
from core.geometry.norms import EllipsoidNorm, Norm
from core.geometry.paths import HorizontalPath, PathSegment

logger = logging.getLogger(__name__)

_MAX_SWITCHES = 100_000
_VANISH = 1e-12


@dataclass
class ExtremalState:
    """PMP 状态 (x, ξ, ν), ν ∈ {0, -1}"""

    x: np.ndarray
    xi: np.ndarray
    nu: float = -1.0
    t: float = 0.0

    def __post_init__(self) -> None:
        self.x = np.asarray(self.x, dtype=float)
        self.xi = np.asarray(self.xi, dtype=float)
        if self.x.shape != self.xi.shape or self.x.ndim != 1:
            raise DimensionMismatch("x and xi must be vectors of equal length")
        if self.nu > 0:
            raise InvalidParameter("abnormal multiplier must be nonpositive", {"nu": self.nu})
        if self.nu == 0 and not np.any(self.xi):
            raise InvalidParameter("(nu, xi) must not vanish together")

    @property
    def is_abnormal(self) -> bool:
        return self.nu == 0


def momenta_array(algebra: NilpotentAlgebra, x: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """h_i = ξ_i + ½ Σ_j Σ_k x_j ξ_k c_ji^k, 支持批量"""
    p = algebra.p
    x = np.asarray(x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    h = np.array(xi[..., :p], copy=True)
    if algebra.m:
        h = h + 0.5 * np.einsum("...j,jik,...k->...i", x[..., :p], algebra.tensor, xi[..., p:])
    return h


def horizontal_momenta(algebra: NilpotentAlgebra, state: ExtremalState) -> np.ndarray:
    """p 个水平动量 h_i(λ) = <λ, X_i(x)>"""
    if state.x.shape[0] != algebra.n:
        raise DimensionMismatch(f"state must have {algebra.n} coordinates")
    return momenta_array(algebra, state.x, state.xi)


def omega_matrix(algebra: NilpotentAlgebra, xi_c: np.ndarray) -> np.ndarray:
    """Ω_ij = Σ_k ξ_k c_ji^k, 支持批量 (..., m) -> (..., p, p)"""
    return np.einsum("jik,...k->...ij", algebra.tensor, np.asarray(xi_c, dtype=float))


def covector_from_momenta(algebra: NilpotentAlgebra, x: np.ndarray, h: np.ndarray, xi_c: np.ndarray) -> np.ndarray:
    """由 (x, h, ξ_c) 还原 ξ"""
    p = algebra.p
    xi_h = np.asarray(h, dtype=float) - 0.5 * np.einsum(
        "...j,jik,...k->...i", np.asarray(x)[..., :p], algebra.tensor, xi_c
    )
    return np.concatenate([xi_h, np.broadcast_to(xi_c, xi_h.shape[:-1] + (algebra.m,))], axis=-1)


@dataclass
class Trajectory:
    """采样轨迹 (t, x, ξ, u, h)"""

    algebra: NilpotentAlgebra
    norm: Norm
    times: np.ndarray
    x: np.ndarray
    xi: np.ndarray
    u: np.ndarray
    h: np.ndarray
    nu: float
    switch_times: List[float] = field(default_factory=list)
    pieces: List[Tuple[float, np.ndarray]] = field(default_factory=list)

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0]) if len(self.times) else 0.0

    @property
    def endpoint(self) -> GroupElement:
        return GroupElement.from_array(self.algebra, self.x[-1])

    def hamiltonian(self) -> np.ndarray:
        """max_u h_u(λ(t)) + ν"""
        return np.asarray(self.norm.dual(self.h)) + self.nu

    def hamiltonian_drift(self) -> float:
        values = np.asarray(self.norm.dual(self.h))
        return float(np.max(np.abs(values - values[0]))) if len(values) else 0.0

    def to_path(self, space: HorizontalSpace) -> HorizontalPath:
        """分段常值控制的轨迹转换为路径 (多面体情形精确)"""
        if not self.pieces:
            raise InvalidParameter("trajectory has no piecewise-constant control record")
        return HorizontalPath(
            space,
            [PathSegment(tuple(float(v) for v in u), float(dt)) for dt, u in self.pieces if dt > 0],
        )

    def to_frame(self) -> pd.DataFrame:
        """CSV: t, x1..xn, xi1..xin, u1..up"""
        n, p = self.algebra.n, self.algebra.p
        frame = pd.DataFrame({"t": self.times})
        for i in range(n):
            frame[f"x{i + 1}"] = self.x[:, i]
        for i in range(n):
            frame[f"xi{i + 1}"] = self.xi[:, i]
        for i in range(p):
            frame[f"u{i + 1}"] = self.u[:, i]
        return frame


class ExtremalFlow:
    """
    (A, N) 上的极值流

    Args:
        algebra: 代数 (极化: V = V∞)
        norm: V∞ 上的范数
    """

    def __init__(self, algebra: NilpotentAlgebra, norm: Norm):
        if norm.dim != algebra.p:
            raise DimensionMismatch("norm dimension must equal p", {"p": algebra.p, "dim": norm.dim})
        self.algebra = algebra
        self.norm = norm
        self.vertices = norm.vertices
        self.gram_inv = norm.gram_inv if isinstance(norm, EllipsoidNorm) else np.eye(algebra.p)

    # 控制律

    def support_rows(self, h: np.ndarray) -> np.ndarray:
        """光滑范数的批量对偶支撑"""
        u = h @ self.gram_inv.T
        dual = np.sqrt(np.maximum(np.einsum("bi,bi->b", h, u), 0.0))
        if np.any(dual <= _VANISH):
            raise MomentaVanished("horizontal momenta vanished along a normal extremal")
        return u / dual[:, None]

    def _switch_choice(self, h: np.ndarray, growth: np.ndarray) -> np.ndarray:
        """切换时刻: 并列顶点中取增长最快者, 再按字典序"""
        values = self.vertices @ h
        best = values.max()
        tied = np.flatnonzero(values >= best - TIE_TOLERANCE * max(1.0, abs(best)))
        rates = self.vertices[tied] @ growth
        top = tied[rates >= rates.max() - TIE_TOLERANCE * max(1.0, abs(rates.max()))]
        candidates = self.vertices[top]
        return candidates[np.lexsort(candidates.T[::-1])[0]]

    # 多面体: 事件驱动

    def _polyhedral_pieces(
        self, x0: np.ndarray, h0: np.ndarray, xi_c: np.ndarray, T: float
    ) -> List[Tuple[float, np.ndarray, np.ndarray, np.ndarray]]:
        """返回 (起始时刻, 起点 x, 起点 h, 控制 u) 列表及终点"""
        A = self.algebra
        p = A.p
        Omega = omega_matrix(A, xi_c)
        x = np.array(x0, dtype=float)
        h = np.array(h0, dtype=float)
        u = self.norm.dual_support(h)
        t = 0.0
        pieces = []
        stalls = 0
        for _ in range(_MAX_SWITCHES):
            g = Omega @ u
            a = self.vertices @ h
            b = self.vertices @ g
            a_u, b_u = float(u @ h), float(u @ g)
            faster = b > b_u + TIE_TOLERANCE * max(1.0, abs(b_u))
            dt = T - t
            if np.any(faster):
                s = np.maximum((a_u - a[faster]) / (b[faster] - b_u), 0.0)
                dt = min(dt, float(s.min()))
            if dt <= 0:
                stalls += 1
                if stalls > 2:
                    # 滑动模式: 保持当前控制推进一小步
                    dt = min(T - t, 1e-9 * max(T, 1.0))
            else:
                stalls = 0
            pieces.append((t, x.copy(), h.copy(), u.copy()))
            x_h = x[:p].copy()
            x[:p] = x_h + dt * u
            if A.m:
                x[p:] += 0.5 * dt * np.einsum("i,j,ijk->k", x_h, u, A.tensor)
            h = h + dt * g
            t += dt
            if t >= T - 1e-15 * max(T, 1.0):
                break
            u = self._switch_choice(h, g)
        else:
            logger.warning("switch limit reached", extra={"T": T, "switches": _MAX_SWITCHES})
        pieces.append((T, x.copy(), h.copy(), u.copy()))
        return pieces

    # 光滑范数: 矩阵指数

    def _smooth_exact(self, x0: np.ndarray, h0: np.ndarray, xi_c: np.ndarray, T: np.ndarray) -> np.ndarray:
        """
        批量精确端点

        z = (h, x_h) 满足线性方程 ż = Lz; x_c 的增量是 z 的二次型积分, 用块矩阵指数求出。
        """
        A = self.algebra
        p, m = A.p, A.m
        B = len(T)
        Gi = self.gram_inv
        dual = np.sqrt(np.maximum(np.einsum("bi,ij,bj->b", h0, Gi, h0), 0.0))
        if np.any(dual <= _VANISH):
            raise MomentaVanished("horizontal momenta vanished along a normal extremal")
        Omega = omega_matrix(A, xi_c)
        L = np.zeros((B, 2 * p, 2 * p))
        L[:, :p, :p] = Omega @ Gi / dual[:, None, None]
        L[:, p:, :p] = Gi[None] / dual[:, None, None]
        z0 = np.concatenate([h0, x0[:, :p]], axis=1)
        out = np.array(x0, dtype=float, copy=True)
        if m == 0:
            zT = np.einsum("bij,bj->bi", expm(L * T[:, None, None]), z0)
            out[:, :p] = zT[:, p:]
            return out

        size = 4 * p
        block = np.zeros((B, m, size, size))
        block[:, :, : 2 * p, : 2 * p] = -np.swapaxes(L, 1, 2)[:, None]
        block[:, :, 2 * p:, 2 * p:] = L[:, None]
        # Q_k: x_hᵀ C_k G⁻¹ h / δ
        Q = np.zeros((B, m, 2 * p, 2 * p))
        Q[:, :, p:, :p] = np.einsum("ijk,jl->kil", A.tensor, Gi)[None] / dual[:, None, None, None]
        block[:, :, : 2 * p, 2 * p:] = Q
        F = expm(block * T[:, None, None, None])
        F12 = F[:, :, : 2 * p, 2 * p:]
        F22 = F[:, 0, 2 * p:, 2 * p:]
        W = np.einsum("bji,bkjl->bkil", F22, F12)
        zT = np.einsum("bij,bj->bi", F22, z0)
        out[:, :p] = zT[:, p:]
        out[:, p:] += 0.5 * np.einsum("bi,bkij,bj->bk", z0, W, z0)
        return out

    # 公共接口

    def endpoints(self, xi0: np.ndarray, T: np.ndarray, x0: Optional[np.ndarray] = None) -> np.ndarray:
        """
        批量端点

        Args:
            xi0: 初始余向量 (B, n)
            T: 时间 (B,)
            x0: 起点 (B, n), 缺省为单位元

        Returns:
            (B, n) 端点
        """
        A = self.algebra
        xi0 = np.atleast_2d(np.asarray(xi0, dtype=float))
        T = np.broadcast_to(np.asarray(T, dtype=float), (len(xi0),)).copy()
        x0 = np.zeros_like(xi0) if x0 is None else np.atleast_2d(np.asarray(x0, dtype=float))
        h0 = momenta_array(A, x0, xi0)
        xi_c = xi0[:, A.p:]
        if self.vertices is not None:
            return np.array([
                self._polyhedral_pieces(x0[b], h0[b], xi_c[b], float(T[b]))[-1][1]
                for b in range(len(xi0))
            ])
        return self._smooth_exact(x0, h0, xi_c, T)

    def trajectory(
        self,
        state: ExtremalState,
        T: float,
        steps: int,
        control: Optional[np.ndarray] = None,
    ) -> Trajectory:
        """采样轨迹; control 给定时使用该常值控制 (异常极值)"""
        if T < 0:
            raise InvalidParameter("T must be nonnegative", {"T": T})
        if steps < 1:
            raise InvalidParameter("steps must be positive", {"steps": steps})
        A = self.algebra
        times = np.linspace(0.0, T, steps + 1)
        xi_c = state.xi[A.p:]
        h0 = momenta_array(A, state.x, state.xi)
        if control is not None:
            u = np.asarray(control, dtype=float)
            pieces = [(0.0, state.x.copy(), h0, u), (T, None, None, u)]
            return self._sample_pieces(state, pieces, times, T, piecewise=[(T, u)])
        if self.vertices is not None:
            pieces = self._polyhedral_pieces(state.x, h0, xi_c, T)
            record = [
                (pieces[i + 1][0] - pieces[i][0], pieces[i][3]) for i in range(len(pieces) - 1)
            ]
            return self._sample_pieces(state, pieces, times, T, piecewise=record)
        return self._rk4(state, h0, T, steps)

    def _sample_pieces(self, state, pieces, times, T, piecewise) -> Trajectory:
        A = self.algebra
        p = A.p
        xi_c = state.xi[p:]
        Omega = omega_matrix(A, xi_c)
        starts = np.array([piece[0] for piece in pieces[:-1]])
        xs, hs, us = [], [], []
        for t in times:
            i = max(int(np.searchsorted(starts, t, side="right")) - 1, 0)
            t0, x0, h0, u = pieces[i]
            s = t - t0
            x = np.array(x0, copy=True)
            x[:p] = x0[:p] + s * u
            if A.m:
                x[p:] = x0[p:] + 0.5 * s * np.einsum("i,j,ijk->k", x0[:p], u, A.tensor)
            xs.append(x)
            hs.append(h0 + s * (Omega @ u))
            us.append(u)
        x = np.array(xs)
        h = np.array(hs)
        switch_times = [float(piece[0]) for piece in pieces[1:-1]]
        return Trajectory(
            A, self.norm, times, x, covector_from_momenta(A, x, h, xi_c), np.array(us), h,
            state.nu, switch_times, [(float(dt), np.asarray(u)) for dt, u in piecewise],
        )

    def _rk4(self, state: ExtremalState, h0: np.ndarray, T: float, steps: int) -> Trajectory:
        A = self.algebra
        n, p = A.n, A.p
        Omega = omega_matrix(A, state.xi[p:])
        dt = T / steps

        def rhs(y: np.ndarray) -> np.ndarray:
            u = self.support_rows(y[None, n:])[0]
            dy = np.zeros_like(y)
            dy[:p] = u
            if A.m:
                dy[p:n] = 0.5 * np.einsum("i,j,ijk->k", y[:p], u, A.tensor)
            dy[n:] = Omega @ u
            return dy

        y = np.concatenate([state.x, h0])
        ys = [y.copy()]
        for _ in range(steps):
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * dt * k1)
            k3 = rhs(y + 0.5 * dt * k2)
            k4 = rhs(y + dt * k3)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            ys.append(y.copy())
        Y = np.array(ys)
        x, h = Y[:, :n], Y[:, n:]
        u = self.support_rows(h)
        times = np.linspace(0.0, T, steps + 1)
        return Trajectory(
            A, self.norm, times, x, covector_from_momenta(A, x, h, state.xi[p:]), u, h, state.nu
        )


def integrate_extremal(
    algebra: NilpotentAlgebra,
    norm: Norm,
    state: ExtremalState,
    T: float,
    steps: int = 2048,
) -> Trajectory:
    """
    从 state 出发积分法极值 (控制由对偶支撑给出)

    Raises:
        MomentaVanished: 光滑范数下 h 变为 0
    """
    return ExtremalFlow(algebra, norm).trajectory(state, T, steps)


@dataclass
class AbnormalityCheck:
    abnormal: bool
    residual: float
    degenerate: bool = False


def is_abnormal(trajectory: Trajectory, tolerance: float = ABNORMAL_TOLERANCE) -> AbnormalityCheck:
    """所有采样点上 max |h_i| <= tolerance 时为异常; 零长度轨迹视为异常并标记退化"""
    if trajectory.duration == 0 or len(trajectory.times) < 2:
        return AbnormalityCheck(True, 0.0, degenerate=True)
    residual = float(np.max(np.abs(trajectory.h))) if trajectory.h.size else 0.0
    return AbnormalityCheck(residual <= tolerance, residual)
