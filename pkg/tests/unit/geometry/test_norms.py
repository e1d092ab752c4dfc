"""
Norm and horizontal space tests
"""

import numpy as np
import pytest

from app.constants import NormVariant
from core.algebra.structure import heisenberg, r_times_heisenberg
from core.errors import DimensionMismatch, InvalidHorizontalSpace, InvalidNorm, ZeroCovector
from core.geometry.horizontal import (
    HorizontalSpace,
    lift_min_norm,
    projected_norm,
    standard_l1,
    standard_l2,
    vertex_weights,
)
from core.geometry.norms import (
    EllipsoidNorm,
    L1Norm,
    L2Norm,
    LinfNorm,
    PolytopeNorm,
    make_norm,
    parse_norm,
    same_norm,
)
from core.algebra.group import GroupElement


def test_batched_evaluation():
    N = L1Norm(2)
    values = N.evaluate(np.array([[1.0, -2.0], [0.5, 0.5]]))
    assert np.allclose(values, [3.0, 1.0])
    assert N(np.array([3.0, 4.0])) == 7.0


@pytest.mark.parametrize(
    "norm, xi, expected",
    [
        (L1Norm(2), [1.0, -3.0], 3.0),
        (LinfNorm(2), [1.0, -3.0], 4.0),
        (L2Norm(2), [3.0, 4.0], 5.0),
    ],
)
def test_dual_values(norm, xi, expected):
    assert norm.dual(np.array(xi)) == pytest.approx(expected)


def test_dual_support_attains_dual_norm():
    for N in (L1Norm(3), LinfNorm(3), L2Norm(3), EllipsoidNorm(np.diag([1.0, 4.0, 9.0]))):
        xi = np.array([0.3, -1.2, 0.7])
        u = N.dual_support(xi)
        assert N.evaluate(u) == pytest.approx(1.0)
        assert u @ xi == pytest.approx(N.dual(xi))


def test_l1_tie_breaks_lexicographically():
    u = L1Norm(2).dual_support(np.array([1.0, 1.0]))
    assert np.array_equal(u, [0.0, 1.0])


def test_zero_covector_rejected():
    with pytest.raises(ZeroCovector):
        L2Norm(2).dual_support(np.zeros(2))


def test_polytope_matches_l1_on_diamond():
    P = PolytopeNorm([[1, 0], [-1, 0], [0, 1], [0, -1]])
    v = np.array([[0.3, -0.4], [2.0, 1.0]])
    assert np.allclose(P.evaluate(v), L1Norm(2).evaluate(v))
    assert P.is_polyhedral


def test_polytope_must_be_symmetric():
    with pytest.raises(InvalidNorm):
        PolytopeNorm([[1, 0], [0, 1], [-1, 0]])


def test_ellipsoid_must_be_positive_definite():
    with pytest.raises(InvalidNorm):
        EllipsoidNorm([[1.0, 2.0], [2.0, 1.0]])


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        L2Norm(2).evaluate(np.ones(3))


def test_make_and_parse_norm():
    assert same_norm(make_norm("L1", 2), L1Norm(2))
    assert same_norm(parse_norm('{"variant": "linf"}', 3), LinfNorm(3))
    assert make_norm(NormVariant.L2, 4).dim == 4
    with pytest.raises(InvalidNorm):
        make_norm("polytope")


def test_polarized_space_projected_norm_is_norm():
    H = standard_l1(heisenberg())
    assert H.is_polarized
    assert projected_norm(H, np.array([1.0, -2.0])) == pytest.approx(3.0)


def test_tilted_l2_projects_to_ellipsoid():
    A = heisenberg()
    H = HorizontalSpace(A, L2Norm(2), [[1, 0], [0, 1], [0.5, -0.25]])
    assert not H.is_polarized
    assert isinstance(H.cone_norm, EllipsoidNorm)
    w = np.array([0.6, -0.8])
    assert projected_norm(H, w) == pytest.approx(1.0)


def test_projected_norm_of_redundant_polyhedral_space():
    A = heisenberg()
    # 三个方向 e1, e2, e1+e2 的 L1 球
    basis = [[1, 0, 1], [0, 1, 1], [0, 0, 0]]
    H = HorizontalSpace(A, L1Norm(3), basis)
    assert projected_norm(H, np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert projected_norm(H, np.array([1.0, -1.0])) == pytest.approx(2.0)
    assert H.cone_space().norm.evaluate(np.array([1.0, 1.0])) == pytest.approx(1.0)


def test_lift_realizes_projection():
    A = heisenberg()
    H = HorizontalSpace(A, L2Norm(2), [[1, 0], [0, 1], [0.5, -0.25]])
    g = GroupElement.exact(A, [1, 2, 0])
    v = lift_min_norm(H, g)
    assert np.allclose(H.top @ v, [1.0, 2.0])
    assert H.norm.evaluate(v) == pytest.approx(projected_norm(H, np.array([1.0, 2.0])))


def test_basis_must_surject():
    with pytest.raises(InvalidHorizontalSpace):
        HorizontalSpace(r_times_heisenberg(), L2Norm(2), [[1, 0], [0, 1], [0, 0], [0, 0]])


def test_vertex_weights_sum_to_norm():
    V = L1Norm(2).vertices
    lam = vertex_weights(V, np.array([0.5, -1.5]))
    assert lam.sum() == pytest.approx(2.0)
    assert np.allclose(lam @ V, [0.5, -1.5])


def test_standard_l2_space():
    H = standard_l2(r_times_heisenberg())
    assert H.q == 3
    assert H.cone_space() is H
