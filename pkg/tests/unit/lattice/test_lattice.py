"""
Integer lattice law, embedding and generating set tests
"""

import random
from fractions import Fraction

import numpy as np
import pytest

from app.constants import LatticePreset
from core.algebra.group import GroupElement
from core.algebra.structure import heisenberg, validate_structure
from core.errors import DimensionMismatch, LatticeError
from core.lattice.lattice import (
    GeneratingSet,
    Lattice,
    make_generators,
    make_lattice,
    standard_generators,
)


@pytest.fixture
def h3z():
    return make_lattice("h3z")


def _random_element(L, rng):
    return tuple(rng.randint(-6, 6) for _ in range(L.n))


def test_heisenberg_law(h3z):
    assert h3z.multiply((1, 0, 0), (0, 1, 0)) == (1, 1, 1)
    assert h3z.multiply((0, 1, 0), (1, 0, 0)) == (1, 1, 0)


def test_commutator_of_generators_is_central(h3z):
    assert h3z.commutator((1, 0, 0), (0, 1, 0)) == (0, 0, 1)


def test_inverse(h3z):
    rng = random.Random(0)
    for _ in range(100):
        g = _random_element(h3z, rng)
        assert h3z.multiply(g, h3z.inverse(g)) == h3z.identity()
        assert h3z.multiply(h3z.inverse(g), g) == h3z.identity()


@pytest.mark.parametrize("preset", ["h3z", "zxh3z"])
def test_law_is_associative(preset):
    L = make_lattice(preset)
    rng = random.Random(4)
    for _ in range(300):
        a, b, c = (_random_element(L, rng) for _ in range(3))
        assert L.multiply(L.multiply(a, b), c) == L.multiply(a, L.multiply(b, c))


@pytest.mark.parametrize("preset", ["h3z", "zxh3z"])
def test_embedding_is_a_homomorphism(preset):
    L = make_lattice(preset)
    rng = random.Random(9)
    for _ in range(300):
        g, h = _random_element(L, rng), _random_element(L, rng)
        assert L.embed(L.multiply(g, h)) == L.embed(g) * L.embed(h)


def test_embedding_subtracts_half_bracket(h3z):
    assert h3z.embed((1, 1, 1)) == GroupElement.exact(heisenberg(), [1, 1, Fraction(1, 2)])


def test_embed_array_matches_exact(h3z):
    rng = random.Random(2)
    elements = [_random_element(h3z, rng) for _ in range(20)]
    exact = np.array([h3z.embed(g).as_array() for g in elements])
    assert np.allclose(h3z.embed_array(elements), exact)


def test_right_multiplier_matches_law(h3z):
    rng = random.Random(5)
    s = (2, -1, 3)
    step = h3z.right_multiplier(s)
    for _ in range(50):
        g = _random_element(h3z, rng)
        assert step(g) == h3z.multiply(g, s)


def test_zd_is_abelian():
    L = make_lattice("zd", 3)
    assert L.name == "Z3"
    assert L.multiply((1, 2, 3), (4, 5, 6)) == (5, 7, 9)
    with pytest.raises(LatticeError):
        make_lattice("zd", 0)


def test_wrong_length_rejected(h3z):
    with pytest.raises(DimensionMismatch):
        h3z.multiply((1, 0), (0, 1, 0))


def test_fractional_constants_rejected():
    A = validate_structure([(1, 2, 3, Fraction(1, 2))], 3, 2)
    with pytest.raises(LatticeError):
        Lattice.from_algebra(A)


def test_custom_preset_needs_algebra():
    with pytest.raises(LatticeError):
        make_lattice(LatticePreset.CUSTOM)


def test_generating_set_is_symmetrized(h3z):
    S = GeneratingSet.build(h3z, [[1, 0, 0], [0, 1, 0], [0, 0, 0]])
    assert len(S) == 4
    assert S.is_symmetric()
    assert standard_generators(h3z).elements == S.elements


def test_empty_generating_set_rejected(h3z):
    with pytest.raises(LatticeError):
        GeneratingSet.build(h3z, [[0, 0, 0]])


def test_skew_generators():
    L = make_lattice("zxh3z")
    S = make_generators(L, "skew")
    assert len(S) == 8
    assert (0, 0, 1, 1) in S.elements
    assert (0, 0, -1, -1) in S.elements
    assert S.is_symmetric()
    with pytest.raises(LatticeError):
        make_generators(make_lattice("h3z"), "skew")


def test_product_generators_match_standard():
    L = make_lattice("zxh3z")
    assert make_generators(L, "product").elements == make_generators(L, "standard").elements
    assert make_generators(L, [[1, 0, 0, 0]]).projections().tolist() == [[-1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]
