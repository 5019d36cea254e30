"""Bounded test functions with known minima, and the brute-force grid oracle."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DfoptError, DomainError, SearchDomain

GRID_LIMIT = 10**7
_CHUNK = 1 << 18


class ResourceError(DfoptError, MemoryError):
    """The requested lattice is larger than :data:`GRID_LIMIT` points."""


@dataclass(frozen=True)
class TestFunction:
    """A minimization test problem.

    ``evaluator`` is vectorized over the last axis: it maps an array of shape
    ``(..., d)`` to shape ``(...)``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    domain: SearchDomain
    evaluator: Callable[[np.ndarray], np.ndarray]
    known_min_value: float
    known_argmin: tuple[tuple[float, ...], ...]
    lipschitz_hint: float | None = None
    oracle_tolerance: float = 1e-9
    description: str = field(default="", compare=False)

    @property
    def dim(self) -> int:
        return self.domain.dim

    def __call__(self, x) -> float:
        return eval_testfn(self, x)


def eval_testfn(fn: TestFunction, point) -> float:
    x = np.atleast_1d(np.asarray(point, dtype=float))
    if not fn.domain.contains(x):
        raise DomainError(f"{x.tolist()} is outside the domain of {fn.name}")
    return float(fn.evaluator(x))


def grid_oracle(fn: TestFunction, resolution: int) -> tuple[float, np.ndarray]:
    """Minimum of ``fn`` over a uniform lattice with ``resolution`` points per axis.

    The lattice includes both bounds of every axis. The result is an upper
    bound on the true minimum.
    """
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    total = resolution**fn.dim
    if total > GRID_LIMIT:
        raise ResourceError(f"lattice of {resolution}^{fn.dim} = {total} points exceeds {GRID_LIMIT}")
    axes = [np.linspace(lo, hi, resolution) for lo, hi in zip(fn.domain.lower, fn.domain.upper)]
    best_val, best_idx = np.inf, 0
    for start in range(0, total, _CHUNK):
        flat = np.arange(start, min(start + _CHUNK, total))
        idx = np.unravel_index(flat, (resolution,) * fn.dim)
        pts = np.stack([axes[i][idx[i]] for i in range(fn.dim)], axis=-1)
        vals = fn.evaluator(pts)
        j = int(np.argmin(vals))
        if vals[j] < best_val:
            best_val, best_idx = float(vals[j]), int(flat[j])
    idx = np.unravel_index(best_idx, (resolution,) * fn.dim)
    return best_val, np.array([axes[i][idx[i]] for i in range(fn.dim)])


def _sphere(x):
    return np.sum(np.square(x), axis=-1)


def _shifted_sphere(x):
    return np.sum(np.square(x - 0.3), axis=-1)


def _sawtooth(x):
    return np.abs(x[..., 0] - 0.5)


def _quadratic1d(x):
    return np.square(x[..., 0] - 0.3)


def _two_well(x):
    return np.square(np.square(x[..., 0]) - 1.0) + np.square(x[..., 1])


def _six_hump_camel(x):
    a, b = x[..., 0], x[..., 1]
    return (4.0 - 2.1 * a**2 + a**4 / 3.0) * a**2 + a * b + (-4.0 + 4.0 * b**2) * b**2


def sphere(dim: int = 2) -> TestFunction:
    return TestFunction(
        f"sphere{dim}d",
        SearchDomain.cube(-1.0, 1.0, dim),
        _sphere,
        0.0,
        ((0.0,) * dim,),
        lipschitz_hint=2.0 * np.sqrt(dim),
        description="sum of squares on [-1, 1]^d",
    )


def shifted_sphere(dim: int = 2) -> TestFunction:
    return TestFunction(
        f"shifted-sphere{dim}d",
        SearchDomain.cube(0.0, 1.0, dim),
        _shifted_sphere,
        0.0,
        ((0.3,) * dim,),
        lipschitz_hint=1.4 * np.sqrt(dim),
        description="sum of (x_i - 0.3)^2 on [0, 1]^d",
    )


def sawtooth1d() -> TestFunction:
    return TestFunction(
        "sawtooth1d", SearchDomain([0.0], [1.0]), _sawtooth, 0.0, ((0.5,),), lipschitz_hint=1.0,
        description="|x - 0.5| on [0, 1]",
    )


def quadratic1d() -> TestFunction:
    return TestFunction(
        "quadratic1d", SearchDomain([0.0], [1.0]), _quadratic1d, 0.0, ((0.3,),), lipschitz_hint=1.4,
        description="(x - 0.3)^2 on [0, 1]",
    )


def two_well2d() -> TestFunction:
    return TestFunction(
        "twowell2d",
        SearchDomain([-2.0, -2.0], [2.0, 2.0]),
        _two_well,
        0.0,
        ((-1.0, 0.0), (1.0, 0.0)),
        # |grad| <= sqrt(24^2 + 4^2) on the box
        lipschitz_hint=24.4,
        description="(x^2 - 1)^2 + y^2 on [-2, 2]^2, two global minima",
    )


def six_hump_camel() -> TestFunction:
    return TestFunction(
        "camel6",
        SearchDomain([-3.0, -2.0], [3.0, 2.0]),
        _six_hump_camel,
        -1.031628453489877,
        ((0.08984201368301331, -0.7126564032704135), (-0.08984201368301331, 0.7126564032704135)),
        oracle_tolerance=5e-3,
        description="six-hump camel back on [-3, 3] x [-2, 2], six local minima",
    )


_FACTORIES: dict[str, Callable[..., TestFunction]] = {
    "sphere": sphere,
    "shifted-sphere": shifted_sphere,
    "sawtooth1d": sawtooth1d,
    "quadratic1d": quadratic1d,
    "twowell2d": two_well2d,
    "camel6": six_hump_camel,
}
_DIM_GENERIC = {"sphere", "shifted-sphere"}


def available() -> list[str]:
    return sorted(_FACTORIES)


def get_function(name: str, dim: int | None = None) -> TestFunction:
    """Look up a test function by name.

    ``sphere`` and ``shifted-sphere`` take ``dim`` (default 2); the suffixed
    spellings ``sphere2d`` / ``shifted-sphere3d`` are accepted too.
    """
    key = name.lower().replace("_", "-")
    for generic in _DIM_GENERIC:
        if key.startswith(generic) and key.endswith("d") and key[len(generic):-1].isdigit():
            suffix_dim = int(key[len(generic):-1])
            if dim is not None and dim != suffix_dim:
                raise ValueError(f"{name} conflicts with dim={dim}")
            return _FACTORIES[generic](suffix_dim)
    if key in _DIM_GENERIC:
        return _FACTORIES[key](2 if dim is None else dim)
    if key not in _FACTORIES:
        raise KeyError(f"unknown test function {name!r}; choose from {', '.join(available())}")
    fn = _FACTORIES[key]()
    if dim is not None and dim != fn.dim:
        raise ValueError(f"{fn.name} is {fn.dim}-dimensional, got dim={dim}")
    return fn
