"""Shubert-Piyavskii sawtooth minimization of 1-d Lipschitz functions.

Each interval ``[a, b]`` with endpoint values ``fa, fb`` is split at the
intersection of the two lines of slope ``-K`` and ``+K`` through its
endpoints. The interval whose envelope value is smallest is refined next.

If ``K`` is tight on an interval (``|fa - fb| = K (b - a)``) the division
point is an endpoint and the only ``K``-Lipschitz function through the two
endpoint values is linear, so the interval is retired with its exact
minimum ``min(fa, fb)`` as its bound.

Two envelope values are available. The default follows
``(fa + fb)/2 - K (b - a)``; with ``geometric=True`` the value at the actual
intersection, ``(fa + fb)/2 - K (b - a)/2``, is used instead. Both are lower
bounds of the function on the interval for a valid ``K``; the default is the
looser one.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .core import DfoptError, Objective, SearchDomain, Sense, Trace, evaluate, normalize_sense

MIN_WIDTH = 1e-12
_REL_SLACK = 1e-12


class InvalidLipschitzConstant(DfoptError, ValueError):
    """Endpoint values differ by more than ``K (b - a)``."""


def division_point(a: float, b: float, fa: float, fb: float, K: float, geometric: bool = False) -> tuple[float, float]:
    """Return ``(c, lower)`` for the interval ``[a, b]``."""
    if not a < b:
        raise ValueError(f"need a < b, got [{a}, {b}]")
    if not K > 0:
        raise ValueError(f"Lipschitz constant must be positive, got {K}")
    span = K * (b - a)
    if abs(fa - fb) > span * (1.0 + _REL_SLACK):
        raise InvalidLipschitzConstant(f"|f(a) - f(b)| = {abs(fa - fb):.6g} exceeds K (b - a) = {span:.6g}")
    c = 0.5 * (a + b) + (fa - fb) / (2.0 * K)
    c = min(max(c, a), b)
    lower = 0.5 * (fa + fb) - (0.5 * span if geometric else span)
    return c, lower


@dataclass(frozen=True, order=True)
class Interval1D:
    # field order doubles as the queue priority: lowest bound, then widest, then leftmost
    lower: float
    neg_width: float
    a: float
    b: float
    fa: float
    fb: float
    c: float

    @classmethod
    def make(cls, a: float, b: float, fa: float, fb: float, K: float, geometric: bool = False) -> "Interval1D":
        c, lower = division_point(a, b, fa, fb, K, geometric)
        return cls(lower, -(b - a), a, b, fa, fb, c)

    @property
    def width(self) -> float:
        return self.b - self.a


def shubert_step(
    queue: list[Interval1D],
    f: Callable[[float], float],
    K: float,
    geometric: bool = False,
) -> tuple[Interval1D, float, tuple[Interval1D, Interval1D]]:
    """Split the interval with the minimal envelope value in place.

    ``queue`` is a heap. Returns the removed interval, the value at its
    division point and the two children pushed back onto the heap.
    """
    if not queue:
        raise ValueError("empty interval queue")
    parent = heapq.heappop(queue)
    fc = float(f(parent.c))
    left = Interval1D.make(parent.a, parent.c, parent.fa, fc, K, geometric)
    right = Interval1D.make(parent.c, parent.b, fc, parent.fb, K, geometric)
    heapq.heappush(queue, left)
    heapq.heappush(queue, right)
    return parent, fc, (left, right)


@dataclass
class ShubertState:
    queue: list[Interval1D]
    retired: list[Interval1D]

    def intervals(self) -> list[Interval1D]:
        return sorted(self.queue + self.retired, key=lambda iv: iv.a)

    def certificate(self) -> float:
        """Global lower bound: smallest envelope value over all intervals."""
        return min(iv.lower for iv in self.queue + self.retired)


def shubert_run(
    objective: Objective,
    a: float,
    b: float,
    K: float,
    tolerance: float = 1e-4,
    budget: int = 200,
    *,
    geometric: bool = False,
    sense: Sense | str = Sense.MINIMIZE,
    callback: Callable[[ShubertState, Trace], None] | None = None,
) -> Trace:
    """Minimize a 1-d ``objective`` on ``[a, b]`` given a Lipschitz constant ``K``.

    Stops when the incumbent is within ``tolerance`` of the global lower bound
    or when ``budget`` evaluations are spent. The objective receives a length-1
    array. ``trace.extras`` carries the final certificate and gap.
    """
    if not K > 0:
        raise ValueError(f"Lipschitz constant must be positive, got {K}")
    if not tolerance > 0:
        raise ValueError(f"tolerance must be positive, got {tolerance}")
    domain = SearchDomain([a], [b])
    f = normalize_sense(objective, sense)
    trace = Trace(domain, budget, sense=sense)

    def feval(x: float) -> float:
        return evaluate(f, domain, np.array([x]), trace, iteration=step).value

    step = 0
    fa = feval(a)
    if trace.exhausted:
        trace.extras.update({"certificate": None, "gap": None, "converged": False})
        return trace
    fb = feval(b)
    state = ShubertState([Interval1D.make(a, b, fa, fb, K, geometric)], [])
    gaps = []
    while True:
        gap = trace.incumbent.value - state.certificate()
        gaps.append(gap)
        if gap <= tolerance or trace.exhausted or not state.queue:
            break
        step += 1
        top = state.queue[0]
        if top.width < MIN_WIDTH:
            state.retired.append(heapq.heappop(state.queue))
            continue
        if top.c <= top.a or top.c >= top.b:
            heapq.heappop(state.queue)
            state.retired.append(replace(top, lower=min(top.fa, top.fb)))
            continue
        shubert_step(state.queue, feval, K, geometric)
        if callback is not None:
            callback(state, trace)

    trace.extras.update(
        {
            "certificate": trace.sense.sign * state.certificate(),
            "gap": gaps[-1],
            "converged": gaps[-1] <= tolerance,
            "lipschitz": K,
            "geometric": geometric,
            "intervals": len(state.queue) + len(state.retired),
        }
    )
    return trace
