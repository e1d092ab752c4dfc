"""
Closed-form distances on abelian groups and ℝᵏ × h₃
"""

import math

import numpy as np
import pytest

from core.algebra.group import GroupElement, bch_multiply_array, dilate_array, left_difference_array
from core.algebra.structure import abelian, heisenberg, heisenberg_product, r_times_heisenberg
from core.control.closed_forms import (
    closed_form_array,
    closed_form_distance,
    heisenberg_l1_array,
    heisenberg_l1_distance,
    heisenberg_l2_distance,
    supports_closed_form,
)
from core.errors import DimensionMismatch
from core.geometry.horizontal import HorizontalSpace, standard_l1, standard_l2
from core.geometry.norms import L2Norm, LinfNorm


def test_l2_central_element_is_isoperimetric():
    assert heisenberg_l2_distance(0.0, 0.0, 1.0) == pytest.approx(2 * math.sqrt(math.pi))
    assert heisenberg_l2_distance(0.0, 0.0, -1.0) == pytest.approx(2 * math.sqrt(math.pi))


def test_l2_horizontal_element_is_euclidean():
    assert heisenberg_l2_distance(3.0, 4.0, 0.0) == pytest.approx(5.0)


def test_l2_is_homogeneous():
    d = heisenberg_l2_distance(1.0, 2.0, 3.0)
    assert heisenberg_l2_distance(2.0, 4.0, 12.0) == pytest.approx(2 * d, rel=1e-10)


def test_l2_between_projection_and_central_bounds():
    d = heisenberg_l2_distance(1.0, 0.0, 0.5)
    assert 1.0 < d < 1.0 + 2 * math.sqrt(math.pi * 0.5)


@pytest.mark.parametrize(
    "x, y, z, expected",
    [
        (0.0, 0.0, 1.0, 4.0),
        (1.0, -2.0, 0.0, 3.0),
        (1.0, 1.0, 0.25, 2.0),
        # 中间区: M + 2|z|/M
        (2.0, 0.0, 1.0, 3.0),
        # 远区: 4√(|z| + Mm/2) - M - m
        (1.0, 0.0, 4.0, 7.0),
    ],
)
def test_l1_regimes(x, y, z, expected):
    assert heisenberg_l1_distance(x, y, z) == pytest.approx(expected)


def test_l1_array_matches_scalar():
    rng = np.random.default_rng(0)
    pts = rng.standard_normal((50, 3)) * 3
    expected = [heisenberg_l1_distance(*row) for row in pts]
    assert np.allclose(heisenberg_l1_array(pts[:, 0], pts[:, 1], pts[:, 2]), expected)


def test_l1_array_handles_central_axis():
    out = heisenberg_l1_array(np.zeros(2), np.zeros(2), np.array([0.0, 2.25]))
    assert np.allclose(out, [0.0, 6.0])


def test_supports_closed_form():
    assert supports_closed_form(standard_l1(heisenberg()))
    assert supports_closed_form(standard_l2(r_times_heisenberg()))
    assert supports_closed_form(standard_l1(abelian(3)))
    assert not supports_closed_form(standard_l2(heisenberg_product()))
    assert not supports_closed_form(HorizontalSpace(heisenberg(), LinfNorm(2)))


def test_r_times_heisenberg_adds_free_direction():
    H = standard_l1(r_times_heisenberg())
    g = GroupElement.exact(H.algebra, [0, 0, 2, 1])
    assert closed_form_distance(H, g) == pytest.approx(6.0)
    H2 = standard_l2(r_times_heisenberg())
    assert closed_form_distance(H2, g) == pytest.approx(math.hypot(2.0, 2 * math.sqrt(math.pi)))


def test_abelian_distance_is_the_norm():
    H = standard_l1(abelian(3))
    assert closed_form_distance(H, GroupElement.exact(H.algebra, [1, -2, 3])) == pytest.approx(6.0)


def test_unsupported_space_returns_none():
    H = standard_l2(heisenberg_product())
    assert closed_form_distance(H, GroupElement.identity(H.algebra)) is None


def test_element_from_other_algebra_rejected():
    with pytest.raises(DimensionMismatch):
        closed_form_distance(standard_l1(heisenberg()), GroupElement.identity(r_times_heisenberg()))


def test_batched_distance_is_homogeneous():
    H = HorizontalSpace(heisenberg(), L2Norm(2))
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((10, 3))
    scaled = dilate_array(H.algebra, 2.5, pts)
    assert np.allclose(closed_form_array(H, scaled), 2.5 * closed_form_array(H, pts), rtol=1e-9)


@pytest.mark.parametrize("space_factory", [standard_l1, standard_l2])
def test_distance_is_left_invariant(space_factory):
    H = space_factory(heisenberg())
    rng = np.random.default_rng(11)
    g, g2, h = (rng.normal(size=(20, 3)) for _ in range(3))
    base = closed_form_array(H, left_difference_array(H.algebra, g, g2))
    moved = closed_form_array(
        H,
        left_difference_array(
            H.algebra, bch_multiply_array(H.algebra, h, g), bch_multiply_array(H.algebra, h, g2)
        ),
    )
    assert np.allclose(moved, base, rtol=1e-9, atol=1e-12)


def test_distance_satisfies_triangle_inequality():
    H = standard_l1(heisenberg())
    rng = np.random.default_rng(12)
    a, b = rng.normal(size=(30, 3)), rng.normal(size=(30, 3))
    ab = bch_multiply_array(H.algebra, a, b)
    assert np.all(closed_form_array(H, ab) <= closed_form_array(H, a) + closed_form_array(H, b) + 1e-9)
