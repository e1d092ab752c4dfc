"""
收敛实验 - 按半径表计算差异剖面, 拟合衰减指数并写出结果文件

输出目录内容:
    profile.csv   n, D, scaled, samples, skipped, method
    fit.json      指数拟合、可靠性标记、球大小与可复现性头部
    journal.json  各阶段事件
    cloud_n.csv   (可选) Hausdorff 模式下放缩字球的点云
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np
import pandas as pd

from app.config import settings
from app.constants import ARTIFACT_NAMES, DiscrepancyMethod, LatticePreset
from core.algebra.structure import resolve_algebra
from core.convergence.discrepancy import (
    DiscrepancyProfile,
    DiscrepancyRow,
    ExponentFit,
    cone_ball_cloud,
    fit_exponent,
    hausdorff_discrepancy,
    pointwise_discrepancy,
    scaled_ball_cloud,
)
from core.convergence.oracles import DistanceOracle, cone_oracle
from core.errors import BudgetExceeded, EstimatorGapTooWide, InsufficientData, InvalidParameter
from core.io.artifacts import reproducibility_header, write_frame, write_json
from core.io.schemas import ExperimentConfig
from core.lattice.lattice import GeneratingSet, Lattice, make_generators, make_lattice
from core.lattice.word_metric import BallTable, bfs_ball
from core.services.run_journal import RunJournal, StageEvent

logger = logging.getLogger(__name__)


@dataclass
class ExperimentResult:
    """一次实验的结果与写出的文件"""

    profile: DiscrepancyProfile
    header: Dict[str, Any]
    unreliable: bool
    artifacts: Dict[str, Path] = field(default_factory=dict)
    notes: Dict[str, Any] = field(default_factory=dict)

    @property
    def exact_agreement(self) -> bool:
        return self.profile.exact_agreement

    def to_dict(self) -> Dict[str, Any]:
        return {
            "header": self.header,
            "method": self.profile.method,
            "rows": len(self.profile.rows),
            "fit": self.profile.fit,
            "scaled_fit": self.profile.scaled_fit,
            "exact_agreement": self.exact_agreement,
            "unreliable": self.unreliable,
            "skipped_fraction": self.profile.skipped_fraction,
            "artifacts": {k: str(v) for k, v in self.artifacts.items()},
            "notes": self.notes,
        }


def build_lattice(config: ExperimentConfig) -> Lattice:
    """配置中的格: 预置名, 或 custom + 代数文件"""
    if config.lattice is LatticePreset.CUSTOM:
        if not config.algebra:
            raise InvalidParameter("custom lattices need an algebra file", {"lattice": "custom"})
        return Lattice.from_algebra(resolve_algebra(config.algebra), name=Path(config.algebra).stem)
    return make_lattice(config.lattice, config.dimension or 2)


def _row(
    config: ExperimentConfig,
    L: Lattice,
    S: GeneratingSet,
    n: int,
    table: BallTable,
    oracle: DistanceOracle,
    cone_cloud: Optional[np.ndarray],
    seed: int,
    budget: int,
) -> DiscrepancyRow:
    if config.method is DiscrepancyMethod.POINTWISE:
        result = pointwise_discrepancy(
            L,
            S,
            n,
            config.sample_size or settings.sphere_sample_size,
            oracle,
            table=table,
            full_limit=config.full_sphere_limit or settings.full_sphere_limit,
            budget=budget,
            seed=seed,
        )
        return DiscrepancyRow(n, result.value, result.samples, result.skipped, config.method)

    cloud = scaled_ball_cloud(L, table, n)
    metric = oracle if oracle.is_exact else None
    value = hausdorff_discrepancy(cloud, cone_cloud, metric)
    return DiscrepancyRow(n, value, len(cloud), 0, config.method)


def _fits(profile: DiscrepancyProfile, notes: Dict[str, Any]) -> None:
    if profile.exact_agreement:
        notes["fit"] = "exact agreement: D(n) = 0 for every radius"
        return
    for attr, scaled in (("fit", False), ("scaled_fit", True)):
        try:
            fit: Optional[ExponentFit] = fit_exponent(profile, scaled=scaled)
        except InsufficientData as e:
            fit = None
            notes[attr] = e.message
        setattr(profile, attr, fit)


def _write(
    output_dir: Path,
    profile: DiscrepancyProfile,
    header: Dict[str, Any],
    unreliable: bool,
    notes: Dict[str, Any],
    table: Optional[BallTable],
    journal: RunJournal,
    artifacts: Dict[str, Path],
) -> None:
    frame_header = {"tool": header["tool"], "version": header["version"], "seed": header["seed"],
                    "config_digest": header["config_digest"]}
    artifacts["profile"] = write_frame(output_dir / ARTIFACT_NAMES["profile"], profile.to_frame(), frame_header)
    artifacts["fit"] = write_json(
        output_dir / ARTIFACT_NAMES["fit"],
        {
            "header": header,
            "method": profile.method,
            "alpha": profile.fit.alpha if profile.fit else None,
            "stderr": profile.fit.stderr if profile.fit else None,
            "fit": profile.fit,
            "scaled_fit": profile.scaled_fit,
            "exact_agreement": profile.exact_agreement,
            "unreliable": unreliable,
            "skipped_fraction": profile.skipped_fraction,
            "balls": table.summary() if table is not None else None,
            "notes": notes,
        },
    )
    journal.record("output", StageEvent.ARTIFACT_WRITTEN, "profile and fit written",
                   {"profile": str(artifacts["profile"]), "fit": str(artifacts["fit"])})
    artifacts["journal"] = journal.export(output_dir / ARTIFACT_NAMES["journal"], header)


def run_experiment(
    config: ExperimentConfig,
    output_dir: Union[str, Path],
    seed: Optional[int] = None,
    threads: int = 1,
    budget: Optional[int] = None,
) -> ExperimentResult:
    """
    端到端收敛实验

    Args:
        config: 实验配置
        output_dir: 结果目录
        seed: 覆盖配置中的种子
        threads: 估计器并行上限
        budget: BFS 元素预算

    Raises:
        BudgetExceeded: BFS 超出预算; 已完成半径的部分剖面已写出
    """
    output_dir = Path(output_dir)
    seed = seed if seed is not None else (config.seed if config.seed is not None else settings.seed)
    budget = budget or settings.bfs_budget
    if config.method is DiscrepancyMethod.HAUSDORFF and config.schedule[0] == 0:
        raise InvalidParameter("Hausdorff profiles need positive radii", {"schedule": config.schedule})

    header = reproducibility_header("converge", seed, config.model_dump(mode="json"))
    journal = RunJournal(run=config.name)
    profile = DiscrepancyProfile(config.method)
    notes: Dict[str, Any] = {}
    artifacts: Dict[str, Path] = {}

    L = build_lattice(config)
    S = make_generators(L, config.generators)
    oracle = cone_oracle(L, S, config.estimator, seed, threads)
    logger.info(
        f"experiment {config.name}: {L} with {len(S)} generators",
        extra={"method": config.method.value, "exact_oracle": oracle.is_exact, "schedule": config.schedule},
    )
    journal.record("setup", StageEvent.STAGE_COMPLETED, "lattice, generators and oracle ready",
                   {"lattice": L.name, "generators": [list(s) for s in S], "exact_oracle": oracle.is_exact})

    radius = config.schedule[-1]
    journal.record("bfs", StageEvent.STAGE_STARTED, f"BFS to radius {radius}", {"budget": budget})
    failure: Optional[BudgetExceeded] = None
    try:
        table: Optional[BallTable] = bfs_ball(L, S, radius, budget)
    except BudgetExceeded as e:
        failure = e
        table = e.partial
        journal.record("bfs", StageEvent.BUDGET_EXHAUSTED, "BFS budget exhausted",
                       dict(e.details), radius=e.completed_radius, status="failed")
    else:
        journal.record("bfs", StageEvent.STAGE_COMPLETED, "BFS finished", {"ball": len(table)}, radius=radius)

    cone_cloud = None
    if config.method is DiscrepancyMethod.HAUSDORFF:
        cone_cloud = cone_ball_cloud(oracle, config.hausdorff_resolution, seed=seed)
        journal.record("cloud", StageEvent.STAGE_COMPLETED, "cone unit ball sampled", {"points": len(cone_cloud)})

    for n in config.schedule:
        if table is None or n > table.radius:
            break
        try:
            row = _row(config, L, S, n, table, oracle, cone_cloud, seed, budget)
        except EstimatorGapTooWide as e:
            journal.record("discrepancy", StageEvent.STAGE_FAILED, e.message, e.details, radius=n, status="failed")
            notes.setdefault("failed_radii", []).append(n)
            continue
        profile.add(row)
        if row.skipped:
            journal.record("discrepancy", StageEvent.POINTS_SKIPPED, f"{row.skipped} points skipped",
                           {"samples": row.samples, "skipped": row.skipped}, radius=n, status="skipped")
        journal.record("discrepancy", StageEvent.STAGE_COMPLETED, f"D({n}) = {row.D:.6g}", {"D": row.D}, radius=n)
        logger.info(f"radius {n}: D = {row.D:.6g}", extra={"samples": row.samples, "skipped": row.skipped})
        if config.dump_clouds and config.method is DiscrepancyMethod.HAUSDORFF:
            cloud = scaled_ball_cloud(L, table, n)
            names = [L.algebra.label(i) for i in range(L.n)]
            artifacts[f"cloud_{n}"] = write_frame(
                output_dir / ARTIFACT_NAMES["cloud"].format(n=n), pd.DataFrame(cloud, columns=names)
            )

    unreliable = profile.skipped_fraction > settings.unreliable_fraction or bool(notes.get("failed_radii"))
    if unreliable:
        journal.record("discrepancy", StageEvent.WARNING, "run flagged unreliable",
                       {"skipped_fraction": profile.skipped_fraction}, status="failed")
        logger.warning("run flagged unreliable", extra={"skipped_fraction": profile.skipped_fraction})

    _fits(profile, notes)
    if failure is not None:
        notes["partial"] = {"completed_radius": failure.completed_radius, "requested_radius": radius}
    _write(output_dir, profile, header, unreliable, notes, table, journal, artifacts)

    if failure is not None:
        raise failure
    return ExperimentResult(profile, header, unreliable, artifacts, notes)
