import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dfopt.core import (
    BudgetExhausted,
    DomainError,
    NoiseModel,
    NumericalError,
    SearchDomain,
    Sense,
    Trace,
    evaluate,
    make_rng,
    normalize_sense,
    rescale_from_unit,
    rescale_to_unit,
)


def square(x):
    return float(np.sum(x**2))


class TestSearchDomain:
    def test_rejects_degenerate_axis(self):
        with pytest.raises(DomainError):
            SearchDomain([0.0, 1.0], [1.0, 1.0])

    def test_rejects_infinite_and_mismatched_bounds(self):
        with pytest.raises(DomainError):
            SearchDomain([0.0], [np.inf])
        with pytest.raises(DomainError):
            SearchDomain([0.0, 0.0], [1.0])

    def test_basic_properties(self):
        dom = SearchDomain([-1.0, 0.0], [1.0, 4.0])
        assert dom.dim == 2
        assert dom.center.tolist() == [0.0, 2.0]
        assert dom.volume == 8.0


class TestEvaluate:
    def test_zero_point(self):
        dom = SearchDomain([-3.0], [3.0])
        tr = Trace(dom, 5)
        assert evaluate(square, dom, [0.0], tr).value == 0.0

    def test_exact_value(self):
        dom = SearchDomain([-3.0], [3.0])
        tr = Trace(dom, 5)
        assert evaluate(square, dom, [2.0], tr, NoiseModel(0.0)).value == 4.0

    def test_out_of_domain(self):
        dom = SearchDomain([0.0], [1.0])
        with pytest.raises(DomainError):
            evaluate(square, dom, [1.5], Trace(dom, 5))

    def test_budget(self):
        dom = SearchDomain([0.0], [1.0])
        tr = Trace(dom, 1)
        evaluate(square, dom, [0.5], tr)
        with pytest.raises(BudgetExhausted):
            evaluate(square, dom, [0.5], tr)

    def test_non_finite_value(self):
        dom = SearchDomain([0.0], [1.0])
        with pytest.raises(NumericalError):
            evaluate(lambda x: float("nan"), dom, [0.5], Trace(dom, 3))

    def test_noise_draws_from_stream(self):
        dom = SearchDomain([0.0], [1.0])
        vals = []
        for _ in range(2):
            tr = Trace(dom, 3)
            rng = make_rng(11)
            vals.append([evaluate(square, dom, [0.5], tr, NoiseModel(0.1), rng).value for _ in range(3)])
        assert vals[0] == vals[1]
        assert len(set(vals[0])) == 3

    def test_noise_variance_must_be_nonnegative(self):
        with pytest.raises(ValueError):
            NoiseModel(-1.0)


class TestSense:
    def test_minimize_identity(self):
        assert normalize_sense(square, "minimize") is square

    def test_maximize_negates(self):
        g = normalize_sense(square, Sense.MAXIMIZE)
        assert g(np.array([2.0])) == -4.0

    def test_round_trip_report(self):
        dom = SearchDomain([-1.0], [1.0])
        tr = Trace(dom, 3, sense="maximize")
        g = normalize_sense(square, "maximize")
        for x in (0.0, 0.5, -1.0):
            evaluate(g, dom, [x], tr)
        assert tr.best_value == 1.0
        assert tr.reported_values().tolist() == [0.0, 0.25, 1.0]


class TestRescale:
    def test_midpoint(self):
        assert rescale_to_unit(SearchDomain([0.0], [10.0]), [5.0]).tolist() == [0.5]

    def test_corner(self):
        dom = SearchDomain.cube(-1.0, 1.0, 2)
        assert rescale_to_unit(dom, [-1.0, 1.0]).tolist() == [0.0, 1.0]

    def test_round_trip_random(self):
        rng = np.random.default_rng(0)
        lo = rng.uniform(-100, 0, size=(10_000, 3))
        hi = lo + rng.uniform(1e-3, 100, size=(10_000, 3))
        for a, b in zip(lo[:200], hi[:200]):
            dom = SearchDomain(a, b)
            pts = dom.sample_uniform(rng, 50)
            for p in pts:
                back = rescale_from_unit(dom, rescale_to_unit(dom, p))
                assert np.max(np.abs(back - p)) < 1e-12

    @settings(max_examples=200, deadline=None)
    @given(
        st.floats(-1e3, 1e3),
        st.floats(1e-3, 1e3),
        st.floats(0.0, 1.0),
    )
    def test_round_trip_property(self, a, w, t):
        dom = SearchDomain([a], [a + w])
        p = np.clip([a + t * w], dom.lower, dom.upper)
        back = rescale_from_unit(dom, rescale_to_unit(dom, p))
        assert abs(back[0] - p[0]) <= 1e-12 * max(1.0, abs(p[0]))


class TestTrace:
    def make(self):
        dom = SearchDomain([0.0, 0.0], [1.0, 1.0])
        tr = Trace(dom, 4)
        for i, (p, v) in enumerate([((0.1, 0.2), 3.0), ((0.5, 0.5), 1.0), ((0.9, 0.1), 2.0)]):
            tr.record(p, v, i)
        return tr

    def test_incumbent_is_minimum(self):
        tr = self.make()
        assert tr.best == 1 and tr.best_value == 1.0
        assert tr.best_so_far().tolist() == [3.0, 1.0, 1.0]

    def test_csv_schema(self):
        text = self.make().to_csv()
        lines = text.splitlines()
        assert lines[0] == "# dfopt-trace v1"
        assert lines[1] == "iteration,x0,x1,value,is_incumbent"
        assert [ln.split(",")[-1] for ln in lines[2:]] == ["0", "1", "0"]

    def test_json_and_csv_round_trip(self):
        tr = self.make()
        doc = json.loads(tr.to_json({"algorithm": "x"}, 3))
        back = Trace.from_dict(doc)
        assert back.to_csv() == tr.to_csv()
        again = Trace.from_csv(tr.to_csv(), tr.domain, tr.budget)
        assert again.to_csv() == tr.to_csv()

    def test_length_never_exceeds_budget(self):
        tr = self.make()
        tr.record((0.0, 0.0), 0.0)
        with pytest.raises(BudgetExhausted):
            tr.record((0.0, 0.0), 0.0)

    def test_seed_range(self):
        make_rng(2**64 - 1)
        with pytest.raises(ValueError):
            make_rng(-1)
