import itertools
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fracperc.arithmetic import empirical_difference_set
from fracperc.model import homogeneous, validate_spec
from fracperc.sumset import (SumsetConfig, class_count_growth, condition_check_product,
                             dependency_classes, hyperplane_cell_count, hyperplane_cells,
                             lattice_plane_counts, sample_factors, sum_interval_trial,
                             sumset_approximation, sumset_report)
from fracperc.tree import sample_realization

from oracles import brute_hyperplane_count, digits


def _config(d, M, p, b=None, n=3):
    return SumsetConfig(tuple(homogeneous(1, M, p) for _ in range(d)), tuple(b or (1,) * d), n)


def _trees(d, M, p, depth, seed):
    return [sample_realization(homogeneous(1, M, p), depth, seed * 10 + i) for i in range(d)]


# ---------------------------------------------------------------- config and verdicts

def test_config_validation():
    one = homogeneous(1, 3, 0.5)
    with pytest.raises(ValueError):
        SumsetConfig((one,), (1,), 2)
    with pytest.raises(ValueError):
        SumsetConfig((one, one), (1,), 2)
    with pytest.raises(ValueError):
        SumsetConfig((one, one), (1, 0), 2)
    with pytest.raises(ValueError):
        SumsetConfig((one, homogeneous(1, 2, 0.5)), (1, 1), 2)
    with pytest.raises(ValueError):
        SumsetConfig((one, homogeneous(2, 3, 0.5)), (1, 1), 2)


def test_three_halves_meets_both_conditions():
    v = condition_check_product(_config(3, 3, 0.5))
    assert v.p == pytest.approx(0.125)
    assert v.cond1 and v.transparent
    assert set(v.transparent_pairs) == {(0, 1), (0, 2), (1, 2)}
    assert v.tau == pytest.approx(math.log(27 * 0.125, 3) - 1)


def test_two_factors_below_threshold():
    v = condition_check_product(_config(2, 3, 0.4))
    assert v.p == pytest.approx(0.16) and not v.cond1


def test_two_factors_cannot_meet_both():
    v = condition_check_product(_config(2, 3, 0.7))
    assert v.cond1 and not v.transparent and v.reduced is None and v.notes


def test_reduction_proposes_capped_probabilities():
    v = condition_check_product(_config(3, 3, 0.65))
    assert v.cond1 and not v.transparent
    assert v.reduced is not None
    red = SumsetConfig(tuple(homogeneous(1, 3, q) for q in v.reduced), (1, 1, 1), 3)
    rv = condition_check_product(red)
    assert rv.cond1 and rv.transparent
    assert all(q <= 0.65 for q in v.reduced)


def test_verdict_record_is_flat_text():
    rec = condition_check_product(_config(3, 3, 0.5)).as_record()
    assert all(isinstance(v, str) for v in rec.values())


# ---------------------------------------------------------------- sumset approximations

def test_full_factors_sum_to_zero_three():
    trees = _trees(3, 3, 1.0, 2, 0)
    for n in range(3):
        assert list(sumset_approximation(trees, (1, 1, 1), n)) == [(0.0, 3.0)]


def test_empty_factor_empties_the_sum():
    trees = _trees(2, 3, 1.0, 2, 0) + [sample_realization(homogeneous(1, 3, 0.0), 2, 0)]
    assert sumset_approximation(trees, (1, 1, 1), 2).is_empty


def test_depth_is_checked():
    with pytest.raises(ValueError):
        sumset_approximation(_trees(2, 3, 1.0, 2, 0), (1, 1), 3)


@pytest.mark.parametrize("seed", range(10))
def test_difference_set_is_the_signed_sum(seed):
    spec = homogeneous(1, 3, 0.7)
    t1 = sample_realization(spec, 6, 2 * seed)
    t2 = sample_realization(spec, 6, 2 * seed + 1)
    for n in range(7):
        a = sumset_approximation((t2, t1), (1, -1), n)
        b = empirical_difference_set(t1, t2, n).union
        assert np.array_equal(a.lo, b.lo) and np.array_equal(a.hi, b.hi)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32), st.lists(st.sampled_from([-2.0, -1.0, 0.5, 1.0, 3.0]),
                                           min_size=2, max_size=3))
def test_sum_matches_enumeration_of_kept_tuples(seed, b):
    d = len(b)
    trees = _trees(d, 2, 0.7, 3, seed)
    n = 3
    h = 2.0 ** -n
    pieces = []
    for ks in itertools.product(*[t.cells(n)[:, 0] for t in trees]):
        lo = sum(min(w * k * h, w * (k + 1) * h) for w, k in zip(b, ks))
        hi = sum(max(w * k * h, w * (k + 1) * h) for w, k in zip(b, ks))
        pieces.append((lo, hi))
    u = sumset_approximation(trees, b, n)
    assert all(u.contains_interval(lo, hi, tol=1e-12) for lo, hi in pieces)
    total = sum(hi - lo for lo, hi in pieces)
    assert u.measure() <= total + 1e-12


def test_sum_approximations_are_nested():
    trees = _trees(3, 3, 0.6, 5, 3)
    prev = None
    for n in range(6):
        u = sumset_approximation(trees, (1, -2, 0.5), n)
        if prev is not None:
            assert all(prev.contains_interval(a, b, tol=1e-12) for a, b in u)
        prev = u


# ---------------------------------------------------------------- hyperplanes

def test_full_cube_plane_through_the_middle():
    trees = _trees(3, 3, 1.0, 1, 0)
    got = hyperplane_cell_count(trees, 1, Fraction(3, 2))
    assert got == brute_hyperplane_count(trees, 1, Fraction(3, 2))
    # corners with S <= 4.5 <= S + 3, i.e. S in {2, 3, 4}
    by_sum = {s: sum(1 for c in itertools.product(range(3), repeat=3) if sum(c) == s) for s in range(7)}
    assert got == by_sum[2] + by_sum[3] + by_sum[4]


def test_empty_factor_has_no_plane_cells():
    trees = _trees(2, 3, 1.0, 2, 0) + [sample_realization(homogeneous(1, 3, 0.0), 2, 0)]
    assert hyperplane_cell_count(trees, 2, 1) == 0


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(2, 3), st.integers(0, 3), st.sampled_from([0.5, 0.8, 1.0]),
       st.fractions(-1, 4, max_denominator=24))
def test_plane_count_matches_exhaustive_cells(seed, d, n, p, a):
    trees = _trees(d, 2, p, 3, seed)
    assert hyperplane_cell_count(trees, n, a) == brute_hyperplane_count(trees, n, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 32), st.integers(2, 3), st.integers(0, 4))
def test_lattice_counts_and_pigeonhole(seed, d, n):
    trees = _trees(d, 3, 0.6, 4, seed)
    counts = lattice_plane_counts(trees, n)
    side = 3 ** n
    assert len(counts) == d * side + 1
    for k in range(0, len(counts), max(1, len(counts) // 7)):
        assert counts[k] == hyperplane_cell_count(trees, n, Fraction(k, side))
    total = math.prod(t.count(n) for t in trees)
    assert counts.max() * (d * side + 1) >= total


def test_plane_cells_meet_the_plane():
    trees = _trees(3, 3, 0.7, 3, 4)
    a = Fraction(4, 3)
    for cell in hyperplane_cells(trees, 3, a):
        S = int(sum(cell))
        assert S <= a * 27 <= S + 3


# ---------------------------------------------------------------- dependency classes

def test_distinct_cells_form_one_class():
    assert len(dependency_classes([(0, 1, 2), (1, 2, 0), (2, 0, 1)])) == 1


def test_shared_coordinate_splits():
    assert len(dependency_classes([(0, 1, 2), (1, 2, 2)])) == 2


def test_no_cells_no_classes():
    assert dependency_classes([]) == []


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6)), unique=True,
                max_size=40))
def test_classes_partition_into_independent_groups(cells):
    classes = dependency_classes(cells)
    flat = [c for cls in classes for c in cls]
    assert sorted(flat) == sorted(cells)
    for cls in classes:
        for u, v in itertools.combinations(cls, 2):
            assert all(x != y for x, y in zip(u, v))
    assert len(classes) <= max(len(cells), 0)


def test_class_count_grows_linearly():
    cfg = _config(3, 3, 0.5, n=6)
    growth = class_count_growth(cfg, range(3, 7), 200, seed=2)
    ratios = [v / n for n, v in growth.items()]
    assert max(ratios) <= 4 * min(ratios)


# ---------------------------------------------------------------- product measure

def test_named_product_cells_have_product_probability():
    p1 = validate_spec(1, 3, (0.9, 0.4, 0.7))
    p2 = validate_spec(1, 3, (0.5, 0.8, 0.6))
    cfg = SumsetConfig((p1, p2), (1, 1), 2)
    trials = 4000
    samples = sample_factors(cfg, 2, trials, seed=9)
    for n in (1, 2):
        for x, y in [(0, 0), (2, 1), (1, 2), (5, 7)][: 3 if n == 1 else 4]:
            if max(x, y) >= 3 ** n:
                continue
            wx = tuple(v + 1 for v in digits(x, n, 3))
            wy = tuple(v + 1 for v in digits(y, n, 3))
            prob = math.prod(p1.p[j - 1] for j in wx) * math.prod(p2.p[j - 1] for j in wy)
            hits = sum(a.kept(wx) and b.kept(wy) for a, b in samples)
            se = math.sqrt(prob * (1 - prob) / trials)
            assert abs(hits / trials - prob) <= 3 * se


def test_factor_seeds_are_distinct():
    seeds = set()
    cfg = _config(3, 3, 0.5)
    for trees in sample_factors(cfg, 1, 20, seed=1):
        seeds.update(t.seed for t in trees)
    assert len(seeds) == 60


# ---------------------------------------------------------------- interval trials

def test_full_factors_always_contain_J():
    t = sum_interval_trial(_config(3, 3, 1.0), (1.0, 2.0), [1, 2, 3], 5)
    assert t.frequency == [1.0, 1.0, 1.0] and t.conditioned == 5


def test_J_outside_range_is_rejected():
    with pytest.raises(ValueError):
        sum_interval_trial(_config(3, 3, 0.5), (2.5, 3.5), [1, 2], 5)
    with pytest.raises(ValueError):
        sum_interval_trial(_config(2, 3, 0.5, b=(1, -1)), (0.5, 1.5), [1, 2], 5)


def test_small_dimension_frequency_decays():
    # product dimension well below one: no intervals survive
    t = sum_interval_trial(_config(2, 3, 0.4), (0.95, 1.05), range(1, 7), 400, seed=4)
    assert t.conditioned >= 50
    assert np.all(np.diff(t.frequency) <= 0)
    assert t.frequency[-1] < 0.5 * t.frequency[0]


def test_interval_frequency_is_stable_over_depths():
    t = sum_interval_trial(_config(3, 3, 0.5), (1.45, 1.55), range(3, 7), 800, seed=1)
    assert t.conditioned >= 300
    steps = np.diff(t.frequency)
    assert np.all(steps <= 0)
    assert np.all(steps >= -0.15), f"frequencies {t.frequency}"


# ---------------------------------------------------------------- report

def test_report_table():
    cfg = _config(3, 3, 0.6, n=4)
    trees = _trees(3, 3, 0.6, 4, 1)
    rep = sumset_report(cfg, trees)
    assert len(rep.rows) == 4
    for r in rep.rows:
        assert 0 <= r.classes <= r.cells
    assert rep.table().splitlines()[0].startswith("depth,a,cell_count,class_count")
    assert rep.verdicts.cond1
