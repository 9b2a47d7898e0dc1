import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracperc.intervals import IntervalUnion, measure, union_of
from fracperc.model import homogeneous
from fracperc.projection import (CoRadial, Diagonal, Orthogonal, Radial, box_counts_cells,
                                 box_counts_union, box_dimension_estimate, check_direction,
                                 interval_persistence, parse_kind, project_cells, project_level,
                                 visible_set_sample)
from fracperc.tree import sample_realization

from oracles import project_to_antidiagonal

intervals = st.lists(st.tuples(st.floats(-10, 10), st.floats(0, 5)).map(lambda t: (t[0], t[0] + t[1])),
                     max_size=30)
angles = st.floats(0.01, math.pi / 2 - 0.01)
centres = st.tuples(st.floats(-5, 6), st.floats(-5, 6)).filter(
    lambda t: not (0 <= t[0] <= 1 and 0 <= t[1] <= 1))


# ---------------------------------------------------------------- interval unions

def test_measure_examples():
    assert measure(IntervalUnion()) == 0.0
    assert measure(IntervalUnion([(0, 1)])) == 1.0
    u = IntervalUnion([(0, 0.5), (0.5, 1)])
    assert list(u) == [(0.0, 1.0)] and measure(u) == 1.0


@given(intervals)
def test_union_is_sorted_and_disjoint(raw):
    u = IntervalUnion(raw)
    assert np.all(u.lo <= u.hi)
    assert np.all(u.lo[1:] > u.hi[:-1])
    for a, b in raw:
        assert u.contains_interval(a, b, tol=0.0)


@given(intervals, st.randoms())
def test_measure_is_permutation_invariant(raw, rnd):
    shuffled = list(raw)
    rnd.shuffle(shuffled)
    a, b = IntervalUnion(raw), IntervalUnion(shuffled)
    assert a == b
    assert measure(a) == pytest.approx(sum(hi - lo for lo, hi in a))


@given(intervals, intervals)
def test_union_of_parts(x, y):
    assert union_of([IntervalUnion(x), IntervalUnion(y)]) == IntervalUnion(x + y)


def test_text_round_trip():
    u = IntervalUnion([(0.1, 0.2), (0.3, 0.7)])
    assert IntervalUnion.from_text(u.to_text()) == u


def test_minkowski_sum():
    u = IntervalUnion([(0, 1), (3, 4)]).minkowski(IntervalUnion([(0, 0.5)]))
    assert list(u) == [(0.0, 1.5), (3.0, 4.5)]


# ---------------------------------------------------------------- projections

def test_direction_must_be_interior():
    for bad in (0.0, math.pi / 2, -0.1, 2.0):
        with pytest.raises(ValueError):
            check_direction(bad)


def test_radial_centre_must_be_outside():
    with pytest.raises(ValueError):
        Radial((0.5, 0.5))
    with pytest.raises(ValueError):
        CoRadial((1.0, 0.2))


def test_unit_square_orthogonal_width():
    u = project_cells(np.array([[0, 0]]), 1.0, Orthogonal(math.pi / 4))
    (lo, hi), = list(u)
    assert hi - lo == pytest.approx(math.sqrt(2))


def test_unit_square_coradial():
    (lo, hi), = list(project_cells(np.array([[0, 0]]), 1.0, CoRadial((2.0, 0.5))))
    assert lo == pytest.approx(1.0)
    assert hi == pytest.approx(math.sqrt(4.25))
    pts = np.random.default_rng(0).uniform(0, 1, (10_000, 2))
    d = np.hypot(pts[:, 0] - 2.0, pts[:, 1] - 0.5)
    assert lo <= d.min() and d.max() <= hi


def test_empty_cells_project_to_empty():
    assert project_cells(np.zeros((0, 2), dtype=int), 1.0, Orthogonal(0.5)).is_empty


def test_diagonal_chart_matches_plane_geometry():
    rng = np.random.default_rng(1)
    for alpha in rng.uniform(0.05, 1.5, 20):
        diag = Diagonal(alpha)
        for px, py in rng.uniform(0, 1, (20, 2)):
            assert diag(np.array([px, py])) == pytest.approx(project_to_antidiagonal(px, py, alpha))
        assert diag(np.array([0.0, 1.0])) == pytest.approx(0.0)
        assert diag(np.array([1.0, 0.0])) == pytest.approx(1.0)


def _kinds(alpha, t):
    return [Orthogonal(alpha), Diagonal(alpha), Radial(t), CoRadial(t)]


@settings(max_examples=40, deadline=None)
@given(angles, centres, st.integers(0, 8), st.integers(0, 8), st.integers(0, 2))
def test_single_cell_projection_is_exact(alpha, t, X, Y, n):
    side = 3.0 ** -n
    if X * side >= 1 or Y * side >= 1:
        return
    rng = np.random.default_rng(X * 100 + Y)
    pts = np.array([X * side, Y * side]) + rng.uniform(0, side, (10_000, 2))
    corners = np.array([X * side, Y * side]) + side * np.array([[0, 0], [1, 0], [0, 1], [1, 1]])
    for kind in _kinds(alpha, t):
        (lo, hi), = list(project_cells(np.array([[X, Y]]), side, kind))
        vals = kind(pts)
        assert lo <= vals.min() + 1e-9 and vals.max() <= hi + 1e-9
        if not isinstance(kind, CoRadial):
            # extremes of the other kinds sit at corners
            cv = kind(corners)
            assert lo == pytest.approx(cv.min(), abs=1e-9)
            assert hi == pytest.approx(cv.max(), abs=1e-9)


def test_coradial_extremes_are_attained():
    # nearest point on an edge, farthest at a corner
    kind = CoRadial((0.3, -2.0))
    (lo, hi), = list(project_cells(np.array([[0, 0]]), 1.0, kind))
    assert lo == pytest.approx(2.0)
    assert hi == pytest.approx(math.hypot(0.7, 3.0))


@pytest.mark.parametrize("bearing", [0.3, 0.7, 1.2])
def test_radial_tends_to_orthogonal(bearing):
    # seen from t = c + R u, the angle offset times R tends to minus the
    # orthogonal coordinate offset along u
    R = 1e6
    c = np.array([0.5, 0.5])
    rad = Radial(tuple(c + R * np.array([math.cos(bearing), math.sin(bearing)])))
    orth = Orthogonal(bearing)
    cells = np.array([[0, 0], [1, 2], [2, 1], [0, 2]])
    side = 1 / 3
    lo, hi = rad.square_intervals(cells * side, side)
    olo, ohi = orth.square_intervals(cells * side, side)
    ref = float(orth(c))
    assert np.allclose((lo - rad.ref) * R, -(ohi - ref), atol=1e-3)
    assert np.allclose((hi - rad.ref) * R, -(olo - ref), atol=1e-3)


def test_kind_parser():
    assert isinstance(parse_kind("orthogonal:0.5"), Orthogonal)
    assert isinstance(parse_kind("diagonal:0.5"), Diagonal)
    assert parse_kind("radial:2,0.5").t == (2.0, 0.5)
    assert isinstance(parse_kind("coradial:-1,0.5"), CoRadial)
    for bad in ("sideways:1", "radial:2", "orthogonal:"):
        with pytest.raises(ValueError):
            parse_kind(bad)


@settings(max_examples=20, deadline=None)
@given(angles, st.integers(0, 2 ** 32))
def test_projections_of_levels_are_nested(alpha, seed):
    tree = sample_realization(homogeneous(2, 3, 0.6), 5, seed)
    for kind in (Orthogonal(alpha), Diagonal(alpha), Radial((2.0, 3.0)), CoRadial((-1.0, 0.2))):
        prev = None
        for n in range(6):
            u = project_level(tree, n, kind)
            if prev is not None:
                assert all(prev.contains_interval(a, b, tol=1e-12) for a, b in u)
            prev = u


def test_rounding_separated_endpoints_merge():
    # at 45 degrees cells two columns apart touch in exact arithmetic
    kind = Orthogonal(math.pi / 4)
    u = project_cells(np.array([[0, 0], [2, 0], [4, 0], [6, 0], [8, 0]]), 1 / 9, kind)
    assert len(u) == 1


def test_more_cells_give_larger_projection():
    rng = np.random.default_rng(3)
    cells = rng.integers(0, 27, (40, 2))
    kind = Orthogonal(0.4)
    small = project_cells(cells[:20], 1 / 27, kind)
    big = project_cells(cells, 1 / 27, kind)
    assert all(big.contains_interval(a, b) for a, b in small)


# ---------------------------------------------------------------- persistence

def test_persistence_full_retention():
    kind = Orthogonal(0.6)
    lo, hi = kind.range()
    res = interval_persistence(homogeneous(2, 3, 1.0), kind, (lo + 0.1, hi - 0.1), 4, 5)
    assert res.frequency == [1.0] * 5


def test_persistence_stage_one_dies():
    kind = Orthogonal(0.6)
    res = interval_persistence(homogeneous(2, 3, 0.1), kind, (0.0, 0.1), 8, 200, seed=2)
    assert res.frequency[-1] <= res.survival[-1]
    assert res.frequency[-1] < 0.05
    assert np.all(np.diff(res.frequency) <= 0)


def test_persistence_rejects_interval_outside_range():
    with pytest.raises(ValueError):
        interval_persistence(homogeneous(2, 3, 0.5), Orthogonal(0.6), (-5.0, 0.0), 3, 2)


def test_persistence_tracks_survival_above_threshold():
    kind = Orthogonal(math.pi / 4)
    lo, hi = kind.range()
    mid, w = 0.5 * (lo + hi), 0.05 * (hi - lo)
    res = interval_persistence(homogeneous(2, 3, 0.7), kind, (mid - w, mid + w), 6, 500, seed=3)
    assert res.frequency[6] > res.survival[6] - 0.1


# ---------------------------------------------------------------- box counting

def test_full_square_projection_has_slope_one():
    tree = sample_realization(homogeneous(2, 3, 1.0), 6, 0)
    kind = Orthogonal(0.5)
    # coarse levels are dominated by the partial mesh cell at each end
    levels = list(range(3, 7))
    counts = box_counts_union(project_level(tree, 6, kind), kind.range()[0], 3, levels)
    est = box_dimension_estimate(counts, levels, 3)
    assert est.slope == pytest.approx(1.0, abs=0.01)


def test_full_square_cells_have_slope_two():
    tree = sample_realization(homogeneous(2, 2, 1.0), 6, 0)
    levels = list(range(1, 7))
    est = box_dimension_estimate(box_counts_cells(tree.cells(6), 6, 2, levels), levels, 2)
    assert est.slope == pytest.approx(2.0, abs=1e-9)


def test_box_counts_need_four_levels():
    with pytest.raises(ValueError, match="four"):
        box_dimension_estimate([1, 3, 9], [1, 2, 3], 3)


def test_box_counts_of_union_by_hand():
    u = IntervalUnion([(0.0, 0.25), (0.5, 0.6)])
    # mesh of 1/2: [0, .5) and [.5, 1); mesh of 1/4: 0, 2
    assert box_counts_union(u, 0.0, 2, [1, 2]).tolist() == [2, 2]


# ---------------------------------------------------------------- visibility

def test_near_vertical_view_of_full_grid_sees_top_row():
    n = 3
    tree = sample_realization(homogeneous(2, 3, 1.0), n, 0)
    vis = visible_set_sample(tree, math.pi / 2 - 1e-4, n)
    top = vis.cells[:, 1] == 3 ** n - 1
    assert np.sum(top) == 3 ** n
    assert vis.count - 3 ** n <= 1
    assert vis.proxy == pytest.approx(1.0, abs=2 * 3.0 ** -n)


def test_empty_tree_sees_nothing():
    vis = visible_set_sample(sample_realization(homogeneous(2, 3, 0.0), 2, 0), 0.7, 2)
    assert vis.count == 0 and vis.proxy == 0.0


def test_visible_proxy_stays_bounded():
    spec = homogeneous(2, 2, 0.9)
    checked = 0
    for seed in range(10):
        tree = sample_realization(spec, 8, seed)
        if not tree.survives():
            continue
        proxies = [visible_set_sample(tree, 0.6, n).proxy for n in range(4, 9)]
        assert max(proxies) / min(proxies) <= 4
        checked += 1
    assert checked >= 5
