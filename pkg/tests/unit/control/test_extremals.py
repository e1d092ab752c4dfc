"""
Extremal flow tests: event-driven polyhedral flow, smooth flow, abnormality checks
"""

import math

import numpy as np
import pytest

from core.algebra.structure import heisenberg
from core.control.extremals import (
    ExtremalFlow,
    ExtremalState,
    integrate_extremal,
    is_abnormal,
    momenta_array,
)
from core.errors import DimensionMismatch, InvalidParameter, MomentaVanished
from core.geometry.horizontal import standard_l1
from core.geometry.norms import L1Norm, L2Norm
from core.geometry.paths import path_endpoint


@pytest.fixture
def h3():
    return heisenberg()


def test_state_validation():
    with pytest.raises(InvalidParameter):
        ExtremalState(np.zeros(3), np.ones(3), nu=1.0)
    with pytest.raises(InvalidParameter):
        ExtremalState(np.zeros(3), np.zeros(3), nu=0.0)
    with pytest.raises(DimensionMismatch):
        ExtremalState(np.zeros(3), np.ones(2))


def test_momenta_at_identity_are_horizontal_covector(h3):
    assert np.allclose(momenta_array(h3, np.zeros(3), np.array([0.3, -0.2, 5.0])), [0.3, -0.2])


def test_straight_line_without_central_momentum(h3):
    traj = integrate_extremal(h3, L2Norm(2), ExtremalState(np.zeros(3), [1.0, 0.0, 0.0]), 2.0, steps=64)
    assert np.allclose(traj.x[-1], [2.0, 0.0, 0.0])
    assert traj.hamiltonian_drift() == pytest.approx(0.0, abs=1e-12)


def test_smooth_circle_closes_with_disc_area(h3):
    flow = ExtremalFlow(h3, L2Norm(2))
    traj = flow.trajectory(ExtremalState(np.zeros(3), [1.0, 0.0, 2 * math.pi]), 1.0, 2048)
    end = traj.x[-1]
    assert np.allclose(end[:2], 0.0, atol=1e-8)
    assert abs(end[2]) == pytest.approx(1.0 / (4 * math.pi), rel=1e-6)
    assert traj.hamiltonian_drift() < 1e-8


def test_exact_endpoints_agree_with_rk4(h3):
    flow = ExtremalFlow(h3, L2Norm(2))
    xi = np.array([0.6, -0.8, 1.7])
    traj = flow.trajectory(ExtremalState(np.zeros(3), xi), 1.3, 4096)
    exact = flow.endpoints(xi[None], np.array([1.3]))[0]
    assert np.allclose(exact, traj.x[-1], atol=1e-8)


def test_batched_endpoints(h3):
    flow = ExtremalFlow(h3, L2Norm(2))
    xi = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])
    out = flow.endpoints(xi, np.array([1.0, 3.0]))
    assert np.allclose(out, [[1.0, 0.0, 0.0], [0.0, 3.0, 0.0]])


def test_polyhedral_flow_is_consistent(h3):
    H = standard_l1(h3)
    flow = ExtremalFlow(h3, L1Norm(2))
    xi = np.array([1.0, 0.3, 1.0])
    traj = flow.trajectory(ExtremalState(np.zeros(3), xi), 3.0, 300)
    assert traj.switch_times
    assert all(0 < t < 3.0 for t in traj.switch_times)
    exact = flow.endpoints(xi[None], np.array([3.0]))[0]
    assert np.allclose(traj.x[-1], exact)
    assert np.allclose(path_endpoint(traj.to_path(H)).as_array(), exact, atol=1e-10)
    assert sum(dt for dt, _ in traj.pieces) == pytest.approx(3.0)


def test_polyhedral_controls_are_vertices(h3):
    flow = ExtremalFlow(h3, L1Norm(2))
    traj = flow.trajectory(ExtremalState(np.zeros(3), [1.0, 0.3, 1.0]), 3.0, 50)
    assert np.allclose(np.abs(traj.u).sum(axis=1), 1.0)
    assert np.all(np.isin(np.abs(traj.u), [0.0, 1.0]))


def test_vanishing_momenta_raise(h3):
    with pytest.raises(MomentaVanished):
        integrate_extremal(h3, L2Norm(2), ExtremalState(np.zeros(3), [0.0, 0.0, 1.0]), 1.0, steps=8)


def test_trajectory_rejects_bad_arguments(h3):
    flow = ExtremalFlow(h3, L2Norm(2))
    state = ExtremalState(np.zeros(3), [1.0, 0.0, 0.0])
    with pytest.raises(InvalidParameter):
        flow.trajectory(state, -1.0, 8)
    with pytest.raises(InvalidParameter):
        flow.trajectory(state, 1.0, 0)


def test_norm_dimension_must_match(h3):
    with pytest.raises(DimensionMismatch):
        ExtremalFlow(h3, L2Norm(3))


def test_normal_extremal_is_not_abnormal(h3):
    traj = integrate_extremal(h3, L2Norm(2), ExtremalState(np.zeros(3), [1.0, 0.0, 1.0]), 1.0, steps=32)
    check = is_abnormal(traj)
    assert not check.abnormal
    assert not check.degenerate


def test_zero_length_is_degenerate(h3):
    traj = integrate_extremal(h3, L2Norm(2), ExtremalState(np.zeros(3), [1.0, 0.0, 0.0]), 0.0, steps=1)
    assert is_abnormal(traj).degenerate


def test_trajectory_frame_columns(h3):
    traj = integrate_extremal(h3, L2Norm(2), ExtremalState(np.zeros(3), [1.0, 0.0, 0.0]), 1.0, steps=4)
    frame = traj.to_frame()
    assert list(frame.columns)[:4] == ["t", "x1", "x2", "x3"]
    assert len(frame) == 5


@pytest.mark.parametrize("norm", [L1Norm(2), L2Norm(2)], ids=["l1", "l2"])
def test_random_normal_extremals_are_never_abnormal(h3, norm):
    rng = np.random.default_rng(5)
    for _ in range(20):
        xi = rng.normal(size=3)
        xi[:2] /= np.linalg.norm(xi[:2])
        traj = integrate_extremal(h3, norm, ExtremalState(np.zeros(3), xi), float(rng.uniform(0.5, 4.0)), steps=64)
        check = is_abnormal(traj)
        assert not check.abnormal
        assert check.residual >= 0.5
