"""DIRECT: dividing rectangles without a Lipschitz constant.

The search runs on the unit cube. Every cell sits on the ternary lattice:
along axis ``i`` it has side length ``3**-k_i`` and center
``(2*n_i + 1) / (2 * 3**k_i)`` for integers ``n_i``, so centers are keyed
exactly by ``(k, n)`` and never evaluated twice.

Each iteration picks the potentially optimal cells (lower-right convex hull
of ``(size, value)`` plus the epsilon-improvement test), samples
``c +/- delta*e_i`` along the cell's longest axes, and splits those axes in
ascending order of ``w_i = min(f(c + delta e_i), f(c - delta e_i))`` so the
best samples end up in the biggest children.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Objective, SearchDomain, Sense, Trace, as_scalar, evaluate, normalize_sense

DEFAULT_EPSILON = 1e-4


def center_lower_bound(fc: float, half_size: float, rate: float) -> float:
    """Lower bound ``fc - rate * half_size`` over a cell.

    ``half_size`` is the half-width ``(b - a)/2`` of an interval or the
    center-to-vertex distance of a hyper-rectangle.
    """
    if rate < 0:
        raise ValueError(f"rate-of-change constant must be >= 0, got {rate}")
    return fc - rate * half_size


@dataclass(frozen=True)
class Interval:
    """1-d cell ``[a, b]`` with its center value."""

    a: float
    b: float
    fc: float

    @property
    def c(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def half_width(self) -> float:
        return 0.5 * (self.b - self.a)


def trisect(interval: Interval, f: Callable[[float], float]) -> tuple[Interval, Interval, Interval]:
    """Split into thirds; the middle third keeps the parent's center value."""
    a, b = interval.a, interval.b
    third = (b - a) / 3.0
    lo, hi = a + third, b - third
    left = Interval(a, lo, as_scalar(f(0.5 * (a + lo))))
    right = Interval(hi, b, as_scalar(f(0.5 * (hi + b))))
    return left, Interval(lo, hi, interval.fc), right


@dataclass
class Rect:
    """Cell of the unit cube: per-axis lattice exponent ``k`` and center index ``n``."""

    k: tuple[int, ...]
    n: tuple[int, ...]
    fc: float
    index: int

    @property
    def center(self) -> np.ndarray:
        return np.array([(2 * n + 1) / (2 * 3**k) for k, n in zip(self.k, self.n)], dtype=float)

    @property
    def sides(self) -> np.ndarray:
        return np.array([3.0**-k for k in self.k])

    @property
    def dist(self) -> float:
        # computed from the sorted exponents so equal-shape cells get bit-identical sizes
        return 0.5 * math.sqrt(sum(3.0 ** (-2 * k) for k in sorted(self.k)))

    @property
    def volume(self) -> float:
        return 3.0 ** (-sum(self.k))

    @property
    def key(self) -> tuple:
        return self.k, self.n

    def long_axes(self) -> list[int]:
        kmin = min(self.k)
        return [i for i, k in enumerate(self.k) if k == kmin]

    def child(self, axis: int, offset: int, fc: float, index: int) -> "Rect":
        """Third along ``axis``: ``offset`` is -1 (low), 0 (middle) or +1 (high)."""
        k = list(self.k)
        n = list(self.n)
        k[axis] += 1
        n[axis] = 3 * n[axis] + 1 + offset
        return Rect(tuple(k), tuple(n), fc, index)

    def lattice_center(self, axis: int, offset: int) -> tuple[tuple, tuple]:
        k = list(self.k)
        n = list(self.n)
        k[axis] += 1
        n[axis] = 3 * n[axis] + 1 + offset
        return tuple(k), tuple(n)


def _center_of(k: Sequence[int], n: Sequence[int]) -> np.ndarray:
    return np.array([(2 * ni + 1) / (2 * 3**ki) for ki, ni in zip(k, n)], dtype=float)


def potentially_optimal(
    cells: Sequence[tuple[float, float]],
    epsilon: float = DEFAULT_EPSILON,
    f_min: float | None = None,
) -> list[int]:
    """Indices of potentially optimal cells.

    Cell ``j`` with ``(size_j, f_j)`` is selected iff some ``K >= 0`` gives
    ``f_j - K size_j <= f_i - K size_i`` for every ``i`` and
    ``f_j - K size_j <= f_min - epsilon |f_min|``. The candidates are found
    on the lower-right convex hull of the points; the admissible range of
    ``K`` for each hull point is bounded by the slopes of its neighbouring
    hull edges, and the epsilon test is applied at the upper end of that range.
    Returned indices are ascending.
    """
    if len(cells) == 0:
        return []
    sizes = np.array([c[0] for c in cells], dtype=float)
    fvals = np.array([c[1] for c in cells], dtype=float)
    if f_min is None:
        f_min = float(fvals.min())
    threshold = f_min - epsilon * abs(f_min)

    # one representative per distinct size: the minimal value
    uniq = np.unique(sizes)
    group_min = np.array([fvals[sizes == s].min() for s in uniq])
    start = int(np.argmin(group_min))
    # among sizes tied at the global minimum value, the hull starts at the smallest
    pts = list(zip(uniq[start:], group_min[start:]))

    hull: list[tuple[float, float]] = []
    for p in pts:
        while len(hull) >= 2:
            (x1, y1), (x2, y2) = hull[-2], hull[-1]
            # drop the middle point only if it lies strictly above the chord
            cross = (x2 - x1) * (p[1] - y1) - (y2 - y1) * (p[0] - x1)
            if cross < 0:
                hull.pop()
            else:
                break
        hull.append(p)

    selected_keys: list[tuple[float, float]] = []
    for h, (s, f) in enumerate(hull):
        k_low = 0.0 if h == 0 else max(0.0, (f - hull[h - 1][1]) / (s - hull[h - 1][0]))
        k_high = math.inf if h == len(hull) - 1 else (hull[h + 1][1] - f) / (hull[h + 1][0] - s)
        if k_high < k_low:
            continue
        if math.isinf(k_high):
            ok = s > 0 or f <= threshold
        else:
            ok = f - k_high * s <= threshold
        if ok:
            selected_keys.append((s, f))

    chosen = set(selected_keys)
    return [j for j in range(len(cells)) if (sizes[j], fvals[j]) in chosen]


def sample_axis_points(rect: Rect) -> list[tuple[int, np.ndarray, np.ndarray]]:
    """``(axis, c - delta e_i, c + delta e_i)`` for each longest axis of ``rect``."""
    c = rect.center
    out = []
    for i in rect.long_axes():
        delta = 3.0 ** -(rect.k[i] + 1)
        lo, hi = c.copy(), c.copy()
        lo[i] -= delta
        hi[i] += delta
        out.append((i, lo, hi))
    return out


def dimension_weights(axis_values: Sequence[tuple[float, float]]) -> list[float]:
    return [min(a, b) for a, b in axis_values]


def divide_rect(
    rect: Rect,
    axis_values: dict[int, tuple[float, float]],
    next_index: Callable[[], int],
) -> list[Rect]:
    """Split ``rect`` along the sampled axes, lowest weight first.

    ``axis_values[i] = (f(c - delta e_i), f(c + delta e_i))``. Each split
    trisects the current middle cell, so the axis with the smallest weight
    yields the largest side children. Returns the new cells, the middle
    (which keeps the parent's center and value) last.
    """
    axes = sorted(axis_values, key=lambda i: (min(axis_values[i]), i))
    middle = rect
    children: list[Rect] = []
    for i in axes:
        f_lo, f_hi = axis_values[i]
        children.append(middle.child(i, -1, f_lo, next_index()))
        children.append(middle.child(i, +1, f_hi, next_index()))
        middle = middle.child(i, 0, middle.fc, middle.index)
    children.append(middle)
    return children


@dataclass
class DirectState:
    """Live partition of the unit cube during a run."""

    cells: list[Rect] = field(default_factory=list)
    evaluated: dict[tuple, float] = field(default_factory=dict)
    iteration: int = 0
    counter: int = 0

    def next_index(self) -> int:
        self.counter += 1
        return self.counter - 1

    def total_volume(self) -> float:
        return math.fsum(c.volume for c in self.cells)

    def min_diameter(self) -> float:
        return min(2.0 * c.dist for c in self.cells)

    def dump(self, domain: SearchDomain | None = None) -> str:
        rows = []
        for c in self.cells:
            center = c.center if domain is None else domain.from_unit(c.center)
            rows.append({"center": center.tolist(), "side_exponents": list(c.k), "value": c.fc})
        return json.dumps({"iteration": self.iteration, "cells": rows})


def direct_run(
    objective: Objective,
    domain: SearchDomain,
    budget: int,
    epsilon: float = DEFAULT_EPSILON,
    *,
    sense: Sense | str = Sense.MINIMIZE,
    callback: Callable[[DirectState, Trace], None] | None = None,
) -> Trace:
    """Minimize ``objective`` over ``domain`` with at most ``budget`` evaluations.

    ``callback(state, trace)`` is invoked after every completed iteration.
    """
    if epsilon < 0:
        raise ValueError(f"epsilon must be >= 0, got {epsilon}")
    f = normalize_sense(objective, sense)
    trace = Trace(domain, budget, sense=sense)
    state = DirectState()

    def feval(k, n) -> float:
        key = (k, n)
        if key in state.evaluated:
            raise AssertionError(f"lattice center {key} evaluated twice")
        x = domain.from_unit(_center_of(k, n))
        value = evaluate(f, domain, x, trace, iteration=state.iteration).value
        state.evaluated[key] = value
        return value

    d = domain.dim
    k0, n0 = (0,) * d, (0,) * d
    root = Rect(k0, n0, feval(k0, n0), state.next_index())
    state.cells.append(root)

    while trace.remaining >= 2:
        state.iteration += 1
        f_min = trace.incumbent.value
        chosen = potentially_optimal([(c.dist, c.fc) for c in state.cells], epsilon, f_min)
        # largest cells first, then creation order
        chosen.sort(key=lambda j: (-state.cells[j].dist, state.cells[j].index))
        replaced: dict[int, list[Rect]] = {}
        for j in chosen:
            rect = state.cells[j]
            axes = rect.long_axes()
            affordable = min(len(axes), trace.remaining // 2)
            if affordable == 0:
                break
            axis_values = {}
            for i in axes[:affordable]:
                lo = feval(*rect.lattice_center(i, -1))
                hi = feval(*rect.lattice_center(i, +1))
                axis_values[i] = (lo, hi)
            replaced[j] = divide_rect(rect, axis_values, state.next_index)
        if not replaced:
            break
        cells: list[Rect] = []
        for j, c in enumerate(state.cells):
            cells.extend(replaced.get(j, [c]))
        state.cells = cells
        if callback is not None:
            callback(state, trace)

    trace.extras.update(
        {
            "iterations": state.iteration,
            "cells": len(state.cells),
            "min_cell_diameter": state.min_diameter(),
            "epsilon": epsilon,
        }
    )
    return trace
