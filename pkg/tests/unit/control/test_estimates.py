"""
Shooting and distance estimate tests
"""

import math

import numpy as np
import pytest

from core.algebra.group import GroupElement, dilate
from core.algebra.structure import heisenberg
from core.control.closed_forms import heisenberg_l1_distance, heisenberg_l2_distance
from core.control.estimates import (
    ConstantEstimate,
    distance_lower_bound,
    estimate_central_cap,
    estimate_distance,
    estimate_K,
    estimate_K1,
    estimate_K2,
    estimate_L,
    k2_from_pair,
    shoot,
)
from core.control.shooting import ShootingProblem, solve_shooting
from core.errors import InvalidHorizontalSpace, InvalidParameter
from core.geometry.horizontal import HorizontalSpace, standard_l1, standard_l2
from core.geometry.norms import L2Norm


@pytest.fixture
def h3_l1():
    return standard_l1(heisenberg())


@pytest.fixture
def h3_l2():
    return standard_l2(heisenberg())


def test_central_cap_from_closed_form(h3_l1, h3_l2):
    assert estimate_central_cap(h3_l2).value == pytest.approx(1 / (4 * math.pi))
    cap = estimate_central_cap(h3_l1)
    assert cap.value == pytest.approx(1 / 16)
    assert cap.method == "closed_form"


def test_lower_bound_is_sharp_on_center(h3_l2):
    g = GroupElement.exact(heisenberg(), [0, 0, 1])
    bound = distance_lower_bound(h3_l2, g)
    assert bound.method == "central_cap"
    assert bound.value == pytest.approx(2 * math.sqrt(math.pi))


def test_lower_bound_uses_projection_for_horizontal(h3_l1):
    g = GroupElement.exact(heisenberg(), [3, -1, 0])
    bound = distance_lower_bound(h3_l1, g)
    assert bound.method == "projection"
    assert bound.value == pytest.approx(4.0)


def test_commutator_constant(h3_l2):
    assert estimate_L(h3_l2).value == pytest.approx(1.0)


def test_constant_formulas():
    assert estimate_K(1.0, 1.0, 1.0) == pytest.approx(64.0)
    assert estimate_K(0.5, 2.0, 4.0) == pytest.approx(32.0)
    with pytest.raises(InvalidParameter):
        estimate_K(1.0, 1.0, 0.0)
    assert k2_from_pair(4.0, 4.0) == 1.0
    assert k2_from_pair(1.0, 10.0) == pytest.approx(5.0)


def test_polarized_space_has_unit_K2(h3_l1):
    assert estimate_K2(h3_l1, [GroupElement.exact(heisenberg(), [1, 1, 1])]).value == 1.0


def test_identity_has_zero_distance(h3_l2):
    est = estimate_distance(h3_l2, GroupElement.identity(heisenberg()))
    assert est.lower == est.upper == 0.0


def test_shooting_requires_polarized_space():
    H = HorizontalSpace(heisenberg(), L2Norm(2), [[1, 0], [0, 1], [0.5, -0.25]])
    with pytest.raises(InvalidHorizontalSpace):
        ShootingProblem(H, GroupElement.exact(heisenberg(), [1, 0, 0]))


def test_shooting_horizontal_target(h3_l2):
    shot = solve_shooting(h3_l2, GroupElement.exact(heisenberg(), [1, 0, 0]), restarts=4)
    assert shot.T == pytest.approx(1.0, abs=1e-6)
    assert shot.error <= 1e-8
    assert shot.path(h3_l2) is None


@pytest.mark.slow
def test_shooting_finds_isoperimetric_circle(h3_l2):
    shot = solve_shooting(h3_l2, GroupElement.exact(heisenberg(), [0, 0, 1]), restarts=32, seed=1)
    assert shot.T == pytest.approx(2 * math.sqrt(math.pi), rel=1e-6)
    end = shot.trajectory(h3_l2).x[-1]
    assert np.allclose(end, [0.0, 0.0, 1.0], atol=1e-6)


@pytest.mark.slow
def test_distance_estimate_brackets_closed_form(h3_l1):
    g = GroupElement.exact(heisenberg(), [1, 0, 2])
    truth = heisenberg_l1_distance(1.0, 0.0, 2.0)
    est = estimate_distance(h3_l1, g, segments=16, path_restarts=2, shooting_restarts=8)
    assert est.lower <= truth + 1e-9
    assert est.upper >= truth - 1e-6
    assert est.upper <= truth * 1.25
    assert est.to_dict()["upper"] == est.upper


def test_K1_fiber_includes_given_cap(h3_l1):
    plain = estimate_K1(h3_l1, samples=0)
    assert plain.details["fiber"] == pytest.approx(1 / 8)
    capped = estimate_K1(h3_l1, samples=0, cap=ConstantEstimate(10.0, 1, "given"))
    assert capped.details["fiber"] == 10.0
    assert capped.value >= 10.0
    assert estimate_K1(h3_l1, samples=0, cap=estimate_central_cap(h3_l1)).value == pytest.approx(plain.value)


@pytest.mark.slow
def test_shooting_distance_is_homogeneous_under_dilation(h3_l2):
    A = heisenberg()
    rng = np.random.default_rng(2024)
    for _ in range(10):
        g = GroupElement.from_array(A, [*rng.uniform(-1.0, 1.0, size=2), rng.uniform(-0.5, 0.5)])
        base = shoot(h3_l2, g, restarts=32, seed=1).upper
        assert base == pytest.approx(heisenberg_l2_distance(*g.as_array()), rel=1e-5)
        for t in (0.5, 2.0, 5.0):
            scaled = shoot(h3_l2, dilate(t, g), restarts=32, seed=1).upper
            assert scaled == pytest.approx(t * base, rel=1e-5)
