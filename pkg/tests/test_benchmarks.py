import numpy as np
import pytest

from dfopt.benchmarks import GRID_LIMIT, ResourceError, available, eval_testfn, get_function, grid_oracle, sphere
from dfopt.core import DomainError

ALL = [get_function(n) for n in available()] + [get_function("sphere", 1), get_function("shifted-sphere3d")]


def test_sphere_at_origin():
    assert eval_testfn(sphere(3), [0.0, 0.0, 0.0]) == 0.0


def test_shifted_sphere():
    assert eval_testfn(get_function("shifted-sphere", 2), [0.3, 0.3]) == pytest.approx(0.0, abs=1e-30)


def test_sawtooth():
    fn = get_function("sawtooth1d")
    assert eval_testfn(fn, [0.5]) == 0.0 and fn.lipschitz_hint == 1.0


def test_out_of_domain():
    with pytest.raises(DomainError):
        eval_testfn(sphere(2), [1.5, 0.0])


@pytest.mark.parametrize("fn", ALL, ids=lambda f: f.name)
def test_known_argmin(fn):
    for x in fn.known_argmin:
        assert abs(fn(x) - fn.known_min_value) <= 1e-9


@pytest.mark.parametrize("fn", [f for f in ALL if f.dim <= 3], ids=lambda f: f.name)
def test_grid_oracle_agrees_with_known_minimum(fn):
    val, arg = grid_oracle(fn, 201 if fn.dim <= 2 else 61)
    assert val >= fn.known_min_value - 1e-12
    assert val - fn.known_min_value <= fn.oracle_tolerance
    assert fn.domain.contains(arg)


def test_camel_minimum_refined_by_local_search():
    # the constant is checked against a local polish of the lattice minimizer, not taken on trust
    from scipy.optimize import minimize

    fn = get_function("camel6")
    _, x0 = grid_oracle(fn, 201)
    res = minimize(lambda x: fn.evaluator(x), x0, method="Nelder-Mead", options={"xatol": 1e-12, "fatol": 1e-15})
    assert res.fun == pytest.approx(fn.known_min_value, abs=1e-9)
    assert min(np.linalg.norm(res.x - np.array(a)) for a in fn.known_argmin) < 1e-5


@pytest.mark.parametrize("fn", [f for f in ALL if f.lipschitz_hint is not None], ids=lambda f: f.name)
def test_lipschitz_hint(fn):
    rng = np.random.default_rng(0)
    X = fn.domain.sample_uniform(rng, 10_000)
    Y = fn.domain.sample_uniform(rng, 10_000)
    lhs = np.abs(fn.evaluator(X) - fn.evaluator(Y))
    assert np.all(lhs <= fn.lipschitz_hint * np.linalg.norm(X - Y, axis=1) + 1e-12)


def test_oracle_is_upper_bound_and_includes_bounds():
    fn = get_function("shifted-sphere1d")
    val, arg = grid_oracle(fn, 4)
    assert val >= 0.0 and arg[0] in (0.0, 1 / 3, 2 / 3, 1.0)
    assert grid_oracle(sphere(1), 101) == (0.0, pytest.approx(np.array([0.0]), abs=1e-15))


def test_oracle_resource_limit():
    assert GRID_LIMIT == 10**7
    with pytest.raises(ResourceError):
        grid_oracle(sphere(3), 216)


def test_lookup_errors():
    with pytest.raises(KeyError):
        get_function("rosenbrock")
    with pytest.raises(ValueError):
        get_function("sphere2d", 3)
    with pytest.raises(ValueError):
        get_function("camel6", 3)
