"""
Word metric tests: BFS balls, bidirectional search, growth and budgets
"""

import numpy as np
import pytest

from core.errors import BudgetExceeded, InsufficientData, InvalidParameter
from core.lattice.lattice import make_generators, make_lattice, standard_generators
from core.lattice.word_metric import bfs_ball, growth_degree, word_length


@pytest.fixture(scope="module")
def h3z_ball():
    L = make_lattice("h3z")
    return bfs_ball(L, standard_generators(L), 6)


def test_heisenberg_small_balls(h3z_ball):
    assert h3z_ball.ball_size(0) == 1
    assert h3z_ball.ball_size(1) == 5
    assert h3z_ball.ball_size(2) == 17
    assert h3z_ball.ball_sizes()[:3] == [1, 5, 17]
    assert len(h3z_ball) == h3z_ball.ball_size(6)


def test_zd_balls_are_diamonds():
    L = make_lattice("zd", 2)
    table = bfs_ball(L, standard_generators(L), 10)
    assert [table.ball_size(r) for r in range(11)] == [2 * r * r + 2 * r + 1 for r in range(11)]


def test_central_word_lengths(h3z_ball):
    assert h3z_ball.lengths[(0, 0, 1)] == 4
    assert h3z_ball.lengths[(0, 0, 2)] == 6


def test_word_length_is_symmetric(h3z_ball):
    L = h3z_ball.lattice
    for g, length in h3z_ball.lengths.items():
        if length <= 5:
            assert h3z_ball.lengths[L.inverse(g)] == length


def test_bidirectional_search_matches_table(h3z_ball):
    L, S = h3z_ball.lattice, h3z_ball.generators
    for g in h3z_ball.sphere(5)[:40]:
        assert word_length(L, S, g) == 5
    assert word_length(L, S, (0, 0, 4)) == 8
    assert word_length(L, S, (0, 0, 1), table=h3z_ball) == 4
    assert word_length(L, S, L.identity()) == 0


def test_word_length_in_zd():
    L = make_lattice("zd", 2)
    assert word_length(L, standard_generators(L), (3, -4)) == 7


def test_skew_generators_shorten_central_words():
    L = make_lattice("zxh3z")
    standard = word_length(L, make_generators(L, "standard"), (0, 0, 0, 1))
    skew = word_length(L, make_generators(L, "skew"), (0, 0, 0, 1))
    assert standard == 4
    assert skew <= 2


def test_budget_exhaustion_keeps_completed_radii():
    L = make_lattice("h3z")
    with pytest.raises(BudgetExceeded) as info:
        bfs_ball(L, standard_generators(L), 5, budget=20)
    err = info.value
    assert err.completed_radius == 2
    assert len(err.partial) == 17
    assert err.partial.radius == 2
    assert err.details["budget"] == 20


def test_bidirectional_budget():
    L = make_lattice("h3z")
    with pytest.raises(BudgetExceeded):
        word_length(L, standard_generators(L), (0, 0, 400), budget=100)


def test_negative_radius_rejected():
    L = make_lattice("h3z")
    with pytest.raises(InvalidParameter):
        bfs_ball(L, standard_generators(L), -1)


def test_ball_size_beyond_table(h3z_ball):
    with pytest.raises(InvalidParameter):
        h3z_ball.ball_size(7)


def test_frame_and_summary(h3z_ball):
    frame = h3z_ball.to_frame()
    assert list(frame.columns) == ["x", "y", "z", "word_length"]
    assert frame["word_length"].is_monotonic_increasing
    summary = h3z_ball.summary()
    assert summary["lattice"] == "H3Z"
    assert summary["radius"] == 6


def test_growth_degree_of_heisenberg():
    L = make_lattice("h3z")
    table = bfs_ball(L, standard_generators(L), 20)
    fit = growth_degree(table, 8, 20)
    assert 3.5 <= fit.degree <= 4.2


def test_growth_fit_reports_slope_and_stderr(h3z_ball):
    fit = growth_degree(h3z_ball, 2, 6)
    radii = np.arange(2, 7)
    sizes = np.array([h3z_ball.ball_size(r) for r in radii], dtype=float)
    slope, intercept = np.polyfit(np.log(radii), np.log(sizes), 1)
    assert fit.degree == pytest.approx(slope)
    assert fit.intercept == pytest.approx(intercept)
    assert fit.stderr > 0.0
    assert fit.radii == [2, 3, 4, 5, 6]


def test_growth_degree_needs_two_radii(h3z_ball):
    with pytest.raises(InsufficientData):
        growth_degree(h3z_ball, 3, 3)
    with pytest.raises(InvalidParameter):
        growth_degree(h3z_ball, 1, 9)
