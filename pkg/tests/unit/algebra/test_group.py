"""
BCH group law tests (exact rational mode and float arrays)
"""

import random
from fractions import Fraction

import numpy as np
import pytest

from core.algebra.group import (
    GroupElement,
    bch_inverse,
    bch_multiply,
    bch_multiply_array,
    dilate,
    dilate_array,
    group_commutator,
    left_difference_array,
    product_array,
    project_pi,
)
from core.algebra.structure import heisenberg, heisenberg_product, r_times_heisenberg
from core.errors import DimensionMismatch, InvalidParameter


def _random_exact(A, rng):
    return GroupElement.exact(A, [Fraction(rng.randint(-9, 9), rng.randint(1, 5)) for _ in range(A.n)])


def test_heisenberg_product_formula():
    A = heisenberg()
    g = GroupElement.exact(A, [1, 0, 0])
    h = GroupElement.exact(A, [0, 1, 0])
    assert (g * h).coords == (1, 1, Fraction(1, 2))
    assert (h * g).coords == (1, 1, Fraction(-1, 2))


@pytest.mark.parametrize("algebra", [heisenberg(), r_times_heisenberg(), heisenberg_product()])
def test_associativity_is_exact(algebra):
    rng = random.Random(7)
    for _ in range(1000):
        a, b, c = (_random_exact(algebra, rng) for _ in range(3))
        assert (a * b) * c == a * (b * c)


def test_inverse_and_identity():
    A = heisenberg_product()
    rng = random.Random(1)
    g = _random_exact(A, rng)
    e = GroupElement.identity(A)
    assert (g * bch_inverse(g)).is_identity
    assert g * e == g


def test_commutator_is_central_bracket():
    A = heisenberg()
    g = GroupElement.exact(A, [2, 0, 5])
    h = GroupElement.exact(A, [0, 3, -1])
    assert group_commutator(g, h).coords == (0, 0, 6)


def test_projection_is_homomorphism():
    A = r_times_heisenberg()
    rng = random.Random(3)
    for _ in range(100):
        g, h = _random_exact(A, rng), _random_exact(A, rng)
        assert project_pi(g * h) == project_pi(g) + project_pi(h)


def test_dilations_compose_exactly():
    A = heisenberg()
    g = GroupElement.exact(A, [1, 2, 3])
    s, t = Fraction(2, 3), Fraction(5, 7)
    assert dilate(s, dilate(t, g)) == dilate(s * t, g)
    assert dilate(2, g).coords == (2, 4, 12)


def test_dilation_is_an_automorphism():
    A = heisenberg_product()
    rng = random.Random(5)
    g, h = _random_exact(A, rng), _random_exact(A, rng)
    t = Fraction(3, 2)
    assert dilate(t, g * h) == dilate(t, g) * dilate(t, h)


def test_dilation_rejects_nonpositive_factor():
    with pytest.raises(InvalidParameter):
        dilate(0, GroupElement.exact(heisenberg(), [1, 0, 0]))


def test_mixed_algebras_rejected():
    with pytest.raises(DimensionMismatch):
        bch_multiply(GroupElement.exact(heisenberg(), [1, 0, 0]), GroupElement.exact(r_times_heisenberg(), [1, 0, 0, 0]))


def test_wrong_length_rejected():
    with pytest.raises(DimensionMismatch):
        GroupElement.exact(heisenberg(), [1, 2])


def test_float_arrays_agree_with_exact_mode():
    A = heisenberg_product()
    rng = random.Random(11)
    g, h = _random_exact(A, rng), _random_exact(A, rng)
    exact = (g * h).as_array()
    assert np.allclose(bch_multiply_array(A, g.as_array(), h.as_array()), exact)
    assert np.allclose(left_difference_array(A, g.as_array(), (g * h).as_array()), h.as_array())
    assert np.allclose(dilate_array(A, 1.5, g.as_array()), dilate(Fraction(3, 2), g).as_array())


def test_product_array_matches_sequential_products():
    A = heisenberg()
    rng = np.random.default_rng(0)
    w = np.zeros((5, 3))
    w[:, :2] = rng.standard_normal((5, 2))
    expected = np.zeros(3)
    for row in w:
        expected = bch_multiply_array(A, expected, row)
    assert np.allclose(product_array(A, w), expected)
