import statistics

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfopt.benchmarks import get_function, quadratic1d, sawtooth1d
from dfopt.core import SearchDomain
from dfopt.lipo import (
    EvaluatedSet,
    InfiniteSlope,
    adalipo_infer_constant,
    adalipo_run,
    lipo_decision,
    lipo_run,
    round_up_to_mesh,
    upper_bound,
)


def concave(x):
    return -((x[0] - 0.3) ** 2)


UNIT = SearchDomain([0.0], [1.0])
TWO = EvaluatedSet.from_arrays([[0.0], [1.0]], [0.0, 1.0])


def replay_decisions(trace):
    """Check every exploit step of a maximizing trace against the acceptance test."""
    # canonical values are minimizing; the acceptance test works on their negation
    pts, vals = trace.points(), -trace.values()
    hist = EvaluatedSet()
    for t, (mode, K) in enumerate(zip(trace.extras["modes"], trace.extras["lipschitz_trajectory"])):
        if mode == "exploit":
            assert lipo_decision(hist, K, pts[t])
        hist.add(pts[t], vals[t])


class TestUpperBound:
    def test_hand_value(self):
        assert upper_bound(TWO, 2.0, [0.5]) == 1.0

    def test_zero_constant(self):
        assert upper_bound(TWO, 0.0, [0.3]) == 0.0

    def test_at_history_point(self):
        assert upper_bound(TWO, 5.0, [1.0]) == 1.0

    def test_is_upper_bound(self):
        rng = np.random.default_rng(0)
        for fn in (quadratic1d(), sawtooth1d()):
            f = lambda x: -fn(x)
            K = fn.lipschitz_hint
            X = rng.uniform(0, 1, (10, 1))
            hist = EvaluatedSet.from_arrays(X, [f(x) for x in X])
            for q in np.linspace(0, 1, 1000):
                assert upper_bound(hist, K, [q]) >= f(np.array([q])) - 1e-12


class TestDecision:
    def test_small_history_accepts(self):
        assert lipo_decision(EvaluatedSet(), 0.0, [0.2])
        assert lipo_decision(EvaluatedSet.from_arrays([[0.0]], [5.0]), 0.0, [0.2])

    def test_hand_cases(self):
        assert not lipo_decision(TWO, 1.0, [0.5])
        assert lipo_decision(TWO, 2.0, [0.5])

    def test_monotone_in_constant(self):
        rng = np.random.default_rng(1)
        for _ in range(2000):
            n = int(rng.integers(2, 8))
            hist = EvaluatedSet.from_arrays(rng.uniform(0, 1, (n, 2)), rng.normal(size=n))
            q = rng.uniform(0, 1, 2)
            K = float(rng.exponential(2.0))
            if lipo_decision(hist, K, q):
                assert lipo_decision(hist, K + float(rng.exponential(2.0)), q)


class TestMesh:
    def test_hand_value(self):
        assert adalipo_infer_constant(EvaluatedSet.from_arrays([[0.0], [1.0]], [0.0, 3.0]), 0.5) == pytest.approx(3.375)

    def test_flat_data(self):
        assert adalipo_infer_constant(EvaluatedSet.from_arrays([[0.0], [1.0], [0.5]], [2.0, 2.0, 2.0]), 0.5) == 0.0

    def test_duplicate_with_different_values(self):
        with pytest.raises(InfiniteSlope):
            adalipo_infer_constant(EvaluatedSet.from_arrays([[0.5], [0.5]], [0.0, 1.0]), 0.5)

    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            adalipo_infer_constant(EvaluatedSet.from_arrays([[0.5]], [0.0]), 0.5)

    @settings(max_examples=300, deadline=None)
    @given(st.floats(1e-6, 1e6), st.floats(1e-3, 2.0))
    def test_round_up_is_tight(self, slope, alpha):
        K = round_up_to_mesh(slope, alpha)
        assert K >= slope and K / (1 + alpha) < slope

    def test_superset_never_lowers(self):
        rng = np.random.default_rng(2)
        X, y = rng.uniform(0, 1, (30, 2)), rng.normal(size=30)
        ks = [adalipo_infer_constant(EvaluatedSet.from_arrays(X[:t], y[:t]), 0.1) for t in range(2, 31)]
        assert all(b >= a for a, b in zip(ks, ks[1:]))


class TestLipoRun:
    def test_huge_constant_is_random_search(self):
        tr = lipo_run(concave, UNIT, 1e6, 50, seed=3)
        assert len(tr) == 50 and tr.extras["rejected_proposals"] == 0

    def test_zero_constant_stalls_on_cap(self):
        tr = lipo_run(concave, UNIT, 0.0, 20, seed=4)
        assert tr.extras["rejection_cap_hit"]
        assert tr.extras["rejected_proposals"] == 50 * 20
        assert len(tr) < 20

    def test_concave_benchmark(self):
        errs = [-lipo_run(concave, UNIT, 2.0, 200, seed=s).best_value for s in range(20)]
        assert statistics.mean(errs) <= 1e-2

    def test_replay_accepts(self):
        for s in range(5):
            replay_decisions(lipo_run(concave, UNIT, 2.0, 100, seed=s))
        fn = get_function("twowell2d")
        replay_decisions(lipo_run(fn, fn.domain, fn.lipschitz_hint, 80, seed=1, sense="minimize"))

    def test_seeded(self):
        assert lipo_run(concave, UNIT, 2.0, 40, seed=9).to_csv() == lipo_run(concave, UNIT, 2.0, 40, seed=9).to_csv()


class TestAdaLipoRun:
    def test_estimate_nondecreasing(self):
        for s in range(10):
            tr = adalipo_run(concave, UNIT, 0.1, 0.5, 100, seed=s)
            ks = tr.extras["lipschitz_trajectory"]
            assert ks[0] == 0.0 and all(b >= a for a, b in zip(ks, ks[1:]))
            assert tr.extras["final_lipschitz"] >= ks[-1]
            replay_decisions(tr)

    def test_estimate_covers_observed_slopes(self):
        tr = adalipo_run(concave, UNIT, 0.1, 0.5, 150, seed=1)
        X, y = tr.points(), -tr.values()
        hist = EvaluatedSet.from_arrays(X, y)
        assert tr.extras["final_lipschitz"] == adalipo_infer_constant(hist, 0.5)

    def test_always_explore_limit(self):
        tr = adalipo_run(concave, UNIT, 0.999999, 0.5, 60, seed=2)
        assert tr.extras["rejected_proposals"] == 0

    def test_parameter_checks(self):
        for p in (0.0, 1.0):
            with pytest.raises(ValueError):
                adalipo_run(concave, UNIT, p, 0.5, 10)
        with pytest.raises(ValueError):
            adalipo_run(concave, UNIT, 0.1, 0.0, 10)

    def test_concave_benchmark(self):
        errs = [-adalipo_run(concave, UNIT, 0.1, 0.5, 300, seed=s).best_value for s in range(20)]
        assert statistics.median(errs) <= 5e-2
