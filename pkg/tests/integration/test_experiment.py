"""
End-to-end convergence experiments written to a temporary directory
"""

import json

import pytest

from app.constants import DiscrepancyMethod, LatticePreset
from core.convergence.experiment import build_lattice, run_experiment
from core.errors import InvalidParameter
from core.io.artifacts import read_frame
from core.io.schemas import ExperimentConfig
from core.lattice.lattice import make_generators
from core.lattice.word_metric import bfs_ball


def test_heisenberg_pointwise_profile(tmp_path):
    config = ExperimentConfig(name="h3z-small", lattice="h3z", schedule=[4, 6, 8], seed=11)
    result = run_experiment(config, tmp_path)
    profile = read_frame(tmp_path / "profile.csv")
    assert profile["n"].tolist() == [4, 6, 8]
    assert (profile["D"] >= 0).all()
    assert (profile["D"] < profile["n"]).all()
    assert result.header["seed"] == 11
    assert not result.exact_agreement
    fit = json.loads((tmp_path / "fit.json").read_text(encoding="utf-8"))
    assert "alpha" in fit
    assert fit["balls"]["radius"] == 8
    journal = json.loads((tmp_path / "journal.json").read_text(encoding="utf-8"))
    stages = {entry["stage"] for entry in journal["entries"]}
    assert {"setup", "bfs", "discrepancy", "output"} <= stages


def test_explicit_seed_overrides_config(tmp_path):
    config = ExperimentConfig(lattice="zd", dimension=2, schedule=[2, 4, 6], seed=11)
    assert run_experiment(config, tmp_path, seed=5).header["seed"] == 5


def test_hausdorff_profile_dumps_clouds(tmp_path):
    config = ExperimentConfig(
        name="h3z-hausdorff",
        lattice="h3z",
        schedule=[2, 4],
        method=DiscrepancyMethod.HAUSDORFF,
        hausdorff_resolution=0.25,
        dump_clouds=True,
    )
    result = run_experiment(config, tmp_path)
    L = build_lattice(config)
    table = bfs_ball(L, make_generators(L, "standard"), 4)
    for n in (2, 4):
        cloud = read_frame(tmp_path / f"cloud_{n}.csv")
        assert len(cloud) == table.ball_size(n)
        assert cloud.shape[1] == 3
    assert [row.n for row in result.profile.rows] == [2, 4]
    assert all(row.D >= 0 for row in result.profile.rows)
    assert "cloud_4" in result.artifacts


def test_hausdorff_rejects_zero_radius(tmp_path):
    config = ExperimentConfig(lattice="h3z", schedule=[0, 2], method=DiscrepancyMethod.HAUSDORFF)
    with pytest.raises(InvalidParameter):
        run_experiment(config, tmp_path)


def test_custom_lattice_needs_algebra():
    with pytest.raises(InvalidParameter):
        build_lattice(ExperimentConfig(lattice=LatticePreset.CUSTOM, schedule=[2]))


@pytest.mark.slow
def test_heisenberg_discrepancy_stays_bounded(tmp_path):
    config = ExperimentConfig(name="h3z-standard", lattice="h3z", schedule=[8, 12, 16, 20, 24], seed=20240601)
    result = run_experiment(config, tmp_path)
    D = {row.n: row.D for row in result.profile.rows}
    assert sorted(D) == [8, 12, 16, 20, 24]
    assert max(D.values()) - min(D.values()) <= 1.0
    assert max(D.values()) - max(D[8], D[12]) <= 1.0
    assert D[24] / 24 < D[8] / 8
    assert not result.unreliable
