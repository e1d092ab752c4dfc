"""
字度量 - Cayley 图上的广度优先搜索

整数元组作为哈希键, 每层一次合并; 超出元素预算时抛出 BudgetExceeded 并附带已完成半径的部分结果。
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.stats import linregress

from core.errors import BudgetExceeded, InsufficientData, InvalidParameter
from core.lattice.lattice import Element, GeneratingSet, Lattice

logger = logging.getLogger("bfs")


@dataclass
class BallTable:
    """半径 radius 内所有元素的字长"""

    lattice: Lattice
    generators: GeneratingSet
    radius: int
    lengths: Dict[Element, int] = field(default_factory=dict)
    sphere_sizes: List[int] = field(default_factory=list)

    def __contains__(self, g: Sequence[int]) -> bool:
        return tuple(g) in self.lengths

    def __len__(self) -> int:
        return len(self.lengths)

    def ball_size(self, r: int) -> int:
        """|B(r)|"""
        if r > self.radius:
            raise InvalidParameter("radius beyond the computed table", {"r": r, "radius": self.radius})
        return int(sum(self.sphere_sizes[: r + 1]))

    def ball_sizes(self) -> List[int]:
        return list(np.cumsum(self.sphere_sizes).astype(int))

    def sphere(self, r: int) -> List[Element]:
        """字长恰为 r 的元素, 按坐标排序"""
        return sorted(g for g, length in self.lengths.items() if length == r)

    def elements(self) -> Iterator[Element]:
        return iter(self.lengths)

    def to_frame(self) -> pd.DataFrame:
        """坐标列 + word_length, 按 (字长, 坐标) 排序"""
        names = [self.lattice.algebra.label(i) for i in range(self.lattice.n)]
        rows = sorted(self.lengths.items(), key=lambda item: (item[1], item[0]))
        frame = pd.DataFrame([list(g) for g, _ in rows], columns=names)
        frame["word_length"] = [length for _, length in rows]
        return frame

    def summary(self) -> dict:
        return {
            "lattice": self.lattice.name,
            "generators": self.generators.name,
            "radius": self.radius,
            "sphere_sizes": self.sphere_sizes,
            "ball_sizes": self.ball_sizes(),
        }


def _multipliers(L: Lattice, S: GeneratingSet):
    return [L.right_multiplier(s) for s in S]


def bfs_ball(L: Lattice, S: GeneratingSet, n: int, budget: int = 200_000_000) -> BallTable:
    """
    B_ρ(n) 的精确字长表

    Raises:
        BudgetExceeded: 元素数超过 budget; partial 为已完成半径的表
    """
    if n < 0:
        raise InvalidParameter("radius must be nonnegative", {"radius": n})
    steps = _multipliers(L, S)
    e = L.identity()
    lengths: Dict[Element, int] = {e: 0}
    spheres = [1]
    frontier = [e]
    for r in range(1, n + 1):
        layer: List[Element] = []
        for g in frontier:
            for step in steps:
                h = step(g)
                if h not in lengths:
                    lengths[h] = r
                    layer.append(h)
            if len(lengths) > budget:
                for h in layer:
                    del lengths[h]
                partial = BallTable(L, S, r - 1, lengths, spheres)
                logger.warning("element budget exhausted", extra={"radius": r - 1, "budget": budget})
                raise BudgetExceeded(
                    "BFS element budget exhausted", r - 1, partial, {"budget": budget, "requested_radius": n}
                )
        spheres.append(len(layer))
        frontier = layer
        logger.debug(f"radius {r}: sphere {len(layer)}, ball {len(lengths)}")
    return BallTable(L, S, n, lengths, spheres)


def word_length(
    L: Lattice,
    S: GeneratingSet,
    g: Sequence[int],
    table: Optional[BallTable] = None,
    budget: int = 200_000_000,
) -> int:
    """
    ρ_S(g); 表中已有时直接查表, 否则双向 BFS

    Raises:
        BudgetExceeded: 两侧访问元素总数超过 budget
    """
    g = tuple(int(x) for x in g)
    if table is not None and g in table.lengths:
        return table.lengths[g]
    e = L.identity()
    if g == e:
        return 0
    steps = _multipliers(L, S)
    seen = ({e: 0}, {g: 0})
    fronts = ([e], [g])
    depth = [0, 0]
    while fronts[0] and fronts[1]:
        side = 0 if len(fronts[0]) <= len(fronts[1]) else 1
        mine, other = seen[side], seen[1 - side]
        depth[side] += 1
        best = None
        layer: List[Element] = []
        for x in fronts[side]:
            for step in steps:
                y = step(x)
                if y in mine:
                    continue
                mine[y] = depth[side]
                if y in other:
                    total = depth[side] + other[y]
                    best = total if best is None else min(best, total)
                layer.append(y)
        if best is not None:
            return best
        if len(seen[0]) + len(seen[1]) > budget:
            raise BudgetExceeded("bidirectional BFS budget exhausted", sum(depth), None, {"budget": budget})
        if side == 0:
            fronts = (layer, fronts[1])
        else:
            fronts = (fronts[0], layer)
    raise InvalidParameter("element is not reachable from the generating set", {"element": list(g)})


@dataclass
class GrowthFit:
    degree: float
    intercept: float
    stderr: float
    radii: List[int]


def growth_degree(table: BallTable, n_min: int, n_max: int) -> GrowthFit:
    """log|B(n)| 对 log n 的最小二乘斜率"""
    if n_max > table.radius:
        raise InvalidParameter("n_max beyond the computed table", {"n_max": n_max, "radius": table.radius})
    radii = [r for r in range(max(n_min, 1), n_max + 1)]
    if len(radii) < 2:
        raise InsufficientData("growth fit needs at least two radii")
    sizes = np.array([table.ball_size(r) for r in radii], dtype=float)
    result = linregress(np.log(radii), np.log(sizes))
    return GrowthFit(float(result.slope), float(result.intercept), float(result.stderr), radii)
