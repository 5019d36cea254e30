import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfopt.benchmarks import get_function
from dfopt.core import SearchDomain
from dfopt.direct import (
    Interval,
    Rect,
    center_lower_bound,
    dimension_weights,
    direct_run,
    divide_rect,
    potentially_optimal,
    sample_axis_points,
    trisect,
)
from oracles import po_bruteforce


def lattice_rect(rng, d, max_k=4):
    k = tuple(int(v) for v in rng.integers(0, max_k, d))
    n = tuple(int(rng.integers(0, 3**ki)) for ki in k)
    return Rect(k, n, float(rng.normal()), 0)


def lattice_point(k, n, depth=60):
    """Exact integer coordinates of a lattice center on a common 3**-depth grid."""
    return tuple((2 * ni + 1) * 3 ** (depth - ki) for ki, ni in zip(k, n))


class TestLowerBound:
    def test_zero_rate(self):
        assert center_lower_bound(0.7, 0.5, 0.0) == 0.7

    def test_interval(self):
        assert center_lower_bound(1.0, 0.5, 2.0) == 0.0

    def test_fresh_square(self):
        d = Rect((0, 0), (0, 0), 0.5, 0).dist
        assert d == pytest.approx(0.5 * math.sqrt(2), abs=1e-15)
        assert center_lower_bound(0.5, d, 1.0) == pytest.approx(-0.2071, abs=1e-4)


class TestSelection:
    def test_single_cell(self):
        assert potentially_optimal([(0.5, 3.0)]) == [0]

    def test_equal_size_dominated(self):
        assert potentially_optimal([(0.5, 1.0), (0.5, 2.0)]) == [0]

    def test_worked_example(self):
        cells = [(1.0, 5.0), (1 / 3, 1.0), (1 / 9, 0.9)]
        got = potentially_optimal(cells, 1e-4, 0.9)
        assert got == po_bruteforce(cells, 1e-4, 0.9)
        assert got == [0, 1, 2]

    def test_largest_cell_always_a_candidate(self):
        rng = np.random.default_rng(0)
        for _ in range(100):
            cells = [(float(s), float(f)) for s, f in zip(rng.choice([1, 1 / 3, 1 / 9, 1 / 27], 12), rng.normal(size=12))]
            got = potentially_optimal(cells, 1e-4, min(f for _, f in cells))
            smax = max(s for s, _ in cells)
            assert any(cells[j][0] == smax for j in got)

    def test_matches_bruteforce_on_lattice_sizes(self):
        rng = np.random.default_rng(1)
        sizes = sorted({Rect(tuple(k), (0, 0), 0.0, 0).dist for k in [(a, b) for a in range(4) for b in range(a, a + 2)]})
        for _ in range(60):
            m = int(rng.integers(1, 21))
            # coarse values produce exact ties
            cells = [(float(rng.choice(sizes)), float(np.round(rng.normal(), 1))) for _ in range(m)]
            fmin = min(f for _, f in cells)
            for eps in (0.0, 0.1):
                assert potentially_optimal(cells, eps, fmin) == po_bruteforce(cells, eps, fmin)

    def test_zero_incumbent(self):
        cells = [(1.0, 0.0), (0.5, 0.0), (0.25, 0.3)]
        assert potentially_optimal(cells, 1e-4, 0.0) == po_bruteforce(cells, 1e-4, 0.0)


class TestTrisect:
    def test_unit_interval(self):
        f = lambda x: x * x
        left, mid, right = trisect(Interval(0.0, 1.0, 0.25), f)
        assert (left.a, left.b, mid.a, mid.b, right.a, right.b) == pytest.approx((0, 1 / 3, 1 / 3, 2 / 3, 2 / 3, 1))
        assert (left.c, mid.c, right.c) == pytest.approx((1 / 6, 1 / 2, 5 / 6))
        assert mid.fc == 0.25 and left.fc == pytest.approx(1 / 36)

    def test_widths(self):
        parts = trisect(Interval(0.0, 1 / 9, 0.0), lambda x: 0.0)
        assert all(p.b - p.a == pytest.approx(1 / 27, rel=1e-12) for p in parts)


class TestAxisSampling:
    def test_fresh_square(self):
        pts = sample_axis_points(Rect((0, 0), (0, 0), 0.0, 0))
        assert [p[0] for p in pts] == [0, 1]
        assert pts[0][1] == pytest.approx([0.5 - 1 / 3, 0.5]) and pts[0][2] == pytest.approx([0.5 + 1 / 3, 0.5])
        assert pts[1][1] == pytest.approx([0.5, 0.5 - 1 / 3]) and pts[1][2] == pytest.approx([0.5, 0.5 + 1 / 3])

    def test_only_long_axes(self):
        assert [p[0] for p in sample_axis_points(Rect((1, 2), (0, 4), 0.0, 0))] == [0]

    def test_inside_unit_cube(self):
        rng = np.random.default_rng(2)
        for _ in range(1000):
            r = lattice_rect(rng, 3)
            for _, lo, hi in sample_axis_points(r):
                assert np.all(lo > 0) and np.all(hi < 1)


class TestDivide:
    def test_weights(self):
        assert dimension_weights([(3.0, 1.0), (2.0, 2.0)]) == [1.0, 2.0]

    def test_fresh_square_split_order(self):
        counter = iter(range(1, 100))
        rect = Rect((0, 0), (0, 0), 0.0, 0)
        kids = divide_rect(rect, {0: (1.0, 2.0), 1: (3.0, 4.0)}, lambda: next(counter))
        assert len(kids) == 5
        # axis 0 has the smaller weight: its two samples sit in the largest children, 1/3 x 1
        assert sorted(k.k for k in kids[:2]) == [(1, 0), (1, 0)]
        assert [k.k for k in kids[2:]] == [(1, 1), (1, 1), (1, 1)]
        assert kids[-1].fc == 0.0 and kids[-1].index == 0

    def test_opposite_order(self):
        counter = iter(range(1, 100))
        kids = divide_rect(Rect((0, 0), (0, 0), 0.0, 0), {0: (5.0, 2.0), 1: (1.0, 4.0)}, lambda: next(counter))
        assert [k.k for k in kids[:2]] == [(0, 1), (0, 1)]

    def test_one_dimension_is_trisection(self):
        counter = iter(range(1, 100))
        kids = divide_rect(Rect((0,), (0,), 0.25, 0), {0: (1 / 36, 25 / 36)}, lambda: next(counter))
        ref = trisect(Interval(0.0, 1.0, 0.25), lambda x: x * x)
        assert [k.center[0] for k in kids] == pytest.approx([ref[0].c, ref[2].c, ref[1].c])
        assert [k.fc for k in kids] == pytest.approx([ref[0].fc, ref[2].fc, ref[1].fc])

    def test_measure_conservation(self):
        rng = np.random.default_rng(3)
        for _ in range(500):
            r = lattice_rect(rng, 3)
            counter = iter(range(1, 100))
            vals = {i: (float(rng.normal()), float(rng.normal())) for i in r.long_axes()}
            kids = divide_rect(r, vals, lambda: next(counter))
            assert abs(math.fsum(k.volume for k in kids) - r.volume) <= 1e-12 * r.volume
            assert len({k.key for k in kids}) == len(kids)


class TestRun:
    def test_budget_one(self):
        dom = SearchDomain([-2.0, 0.0], [4.0, 1.0])
        tr = direct_run(lambda x: float(np.sum(x)), dom, 1)
        assert len(tr) == 1 and tr.samples[0].point.tolist() == [1.0, 0.5]

    def test_off_center_quadratic(self):
        f = lambda x: (x[0] - 0.2) ** 2 + (x[1] - 0.8) ** 2
        tr = direct_run(f, SearchDomain.cube(0.0, 1.0, 2), 300)
        assert tr.best_value <= 1e-3

    @pytest.mark.parametrize("name", ["sphere2d", "twowell2d", "camel6"])
    def test_partition_invariant(self, name):
        fn = get_function(name)

        def audit(state, trace):
            assert abs(state.total_volume() - 1.0) <= 1e-9
            centers = [lattice_point(c.k, c.n) for c in state.cells]
            assert len(set(centers)) == len(centers)
            assert set(centers) <= {lattice_point(k, n) for k, n in state.evaluated}

        tr = direct_run(fn, fn.domain, 500, callback=audit)
        vals = tr.values()
        assert np.all(np.diff(tr.best_so_far()) <= 0)
        assert len({tuple(p) for p in tr.points()}) == len(vals)

    def test_maximize_sense(self):
        tr = direct_run(lambda x: -((x[0] - 0.7) ** 2), SearchDomain([0.0], [1.0]), 60, sense="maximize")
        assert tr.best_value > -1e-4

    @pytest.mark.slow
    def test_cells_shrink_without_epsilon(self):
        fn = get_function("shifted-sphere2d")
        tr = direct_run(fn, fn.domain, 10_000, 0.0)
        assert tr.extras["min_cell_diameter"] < 3.0**-5

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 3), st.integers(1, 80))
    def test_budget_respected(self, d, budget):
        tr = direct_run(lambda x: float(np.sum(np.sin(5 * x))), SearchDomain.cube(0.0, 1.0, d), budget)
        assert 1 <= len(tr) <= budget
