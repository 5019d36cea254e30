"""Multilevel Coordinate Search without the local-search phase.

Every box carries a *base point* (where the objective is known, always on
the box boundary along any coordinate that has been split), its bounds, a
level ``s`` and per-coordinate split counts ``n_i``. Level 0 marks a box that
has been divided; level ``s_max`` a box considered too small to divide. Its
base point then goes to the basket.

After the initialization along each coordinate, sweeps walk the levels
``1 .. s_max - 1`` from coarse to fine and process the best box of each
level:

* if ``s > 2 d (n_min + 1)`` the box is split along its least-split
  coordinate (*division by rank*);
* otherwise a coordinate with ``n_i = 0`` is split using the init list, or,
  when every coordinate has been split, a separable quadratic model along each
  coordinate predicts the best gain. The box is split there if
  ``f(base) + gain < f_best``; otherwise its level goes up by one.

Splitting a previously split coordinate ``i`` at ``z`` evaluates one new
point and produces three boxes ``[x_i, g]``, ``[g, z]``, ``[z, o_i]`` where
``g`` is the golden-section point between ``x_i`` and ``z``; the smaller of
the first two gets level ``min(s + 2, s_max)``, the others ``s + 1``.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .core import Objective, SearchDomain, Sense, Trace, evaluate, normalize_sense

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def subint(x: float, y: float) -> float:
    """Far end of the split range ``[x, subint(x, y)]`` towards ``y``."""
    if 1000.0 * abs(x) < 1.0 and abs(y) > 1000.0:
        return math.copysign(1.0, y)
    if 1000.0 * abs(x) < 1.0 and abs(y) > 1000.0 * abs(x):
        return 10.0 * math.copysign(1.0, y) * abs(x)
    return y


def split_range(x: float, y: float) -> float:
    """:func:`subint`, falling back to ``y`` when the range would be empty."""
    xi = subint(x, y)
    return y if xi == x else xi


def golden_split(x1: float, x2: float, f1: float, f2: float) -> float:
    """Golden-section point between ``x1`` and ``x2``.

    The piece adjacent to the endpoint with the smaller value is the larger
    one (fraction ``q`` of the interval); ties favour ``x1``.
    """
    if x1 == x2:
        raise ValueError("golden split of an empty interval")
    k = 1 if f1 <= f2 else 2
    return x1 + GOLDEN**k * (x2 - x1)


def _quadratic_coeffs(t0: float, f0: float, t1: float, f1: float, t2: float, f2: float) -> tuple[float, float]:
    """``(alpha, beta)`` such that ``f0 + alpha (t - t0) + beta (t - t0)^2`` interpolates the three points."""
    h1, h2 = t1 - t0, t2 - t0
    d1, d2 = (f1 - f0) / h1, (f2 - f0) / h2
    beta = (d2 - d1) / (h2 - h1)
    alpha = d1 - beta * h1
    return alpha, beta


def quadratic_argmin(alpha: float, beta: float, t0: float, lo: float, hi: float) -> tuple[float, float]:
    """Minimize ``alpha (t - t0) + beta (t - t0)^2`` over ``[lo, hi]``; returns ``(t, value)``."""

    def e(t):
        return alpha * (t - t0) + beta * (t - t0) ** 2

    cands = [lo, hi]
    if beta > 0:
        v = t0 - alpha / (2.0 * beta)
        if lo < v < hi:
            cands.append(v)
    t = min(cands, key=e)
    return t, e(t)


@dataclass
class InitList:
    """Per-coordinate initialization coordinates and the starting point."""

    coords: list[list[float]]
    x0: np.ndarray

    @classmethod
    def default(cls, domain: SearchDomain) -> "InitList":
        coords = [[float(a), float(0.5 * (a + b)), float(b)] for a, b in zip(domain.lower, domain.upper)]
        return cls(coords, domain.center.copy())

    def validate(self, domain: SearchDomain) -> None:
        if len(self.coords) != domain.dim:
            raise ValueError(f"init list has {len(self.coords)} coordinates, domain has {domain.dim}")
        for i, c in enumerate(self.coords):
            if len(c) < 3:
                raise ValueError(f"init list for coordinate {i} needs at least three values")
            if any(b <= a for a, b in zip(c, c[1:])):
                raise ValueError(f"init list for coordinate {i} is not strictly increasing")
            if c[0] < domain.lower[i] or c[-1] > domain.upper[i]:
                raise ValueError(f"init list for coordinate {i} leaves the bounds")
        domain.check(self.x0)


@dataclass
class MCSRect:
    id: int
    lo: np.ndarray
    hi: np.ndarray
    base: np.ndarray
    fbase: float
    level: int
    ndiv: tuple[int, ...]
    parent: int | None = None
    split_axis: int | None = None

    @property
    def opposite(self) -> np.ndarray:
        """Corner of the box farthest from the base point, per coordinate."""
        return np.where(self.base - self.lo > self.hi - self.base, self.lo, self.hi)

    @property
    def n_min(self) -> int:
        return min(self.ndiv)

    @property
    def volume(self) -> float:
        return float(np.prod(self.hi - self.lo))

    def contains_base(self) -> bool:
        return bool(np.all(self.lo <= self.base) and np.all(self.base <= self.hi))


@dataclass
class MCSState:
    """Box store, level book and basket for one run."""

    domain: SearchDomain
    s_max: int
    init: InitList
    rects: dict[int, MCSRect] = field(default_factory=dict)
    levels: dict[int, set[int]] = field(default_factory=dict)
    pointers: dict[int, int] = field(default_factory=dict)
    basket: list[tuple[np.ndarray, float]] = field(default_factory=list)
    evaluated: dict[tuple, float] = field(default_factory=dict)
    lines: list[dict[tuple, list[tuple[float, float]]]] = field(default_factory=list)
    sweeps: int = 0
    next_id: int = 1
    partial_init: bool = False
    out_of_budget: bool = False
    gain_fallbacks: int = 0
    rank_divisions: int = 0
    gain_divisions: int = 0
    list_divisions: int = 0
    level_bumps: int = 0
    degenerate_boxes: int = 0

    def __post_init__(self):
        self.levels = {s: set() for s in range(1, self.s_max + 1)}
        self.pointers = {s: 0 for s in range(1, self.s_max + 1)}
        self.lines = [{} for _ in range(self.domain.dim)]

    # -- level book --------------------------------------------------

    def live(self) -> list[MCSRect]:
        return [r for r in self.rects.values() if r.level > 0]

    def _insert(self, rect: MCSRect) -> None:
        self.rects[rect.id] = rect
        self._enter_level(rect)

    def _enter_level(self, rect: MCSRect) -> None:
        s = rect.level
        self.levels[s].add(rect.id)
        p = self.pointers[s]
        if p == 0 or (rect.fbase, rect.id) < (self.rects[p].fbase, p):
            self.pointers[s] = rect.id
        if s == self.s_max:
            self.basket.append((rect.base.copy(), rect.fbase))

    def _leave_level(self, rect: MCSRect) -> None:
        s = rect.level
        self.levels[s].discard(rect.id)
        if self.pointers[s] == rect.id:
            self.pointers[s] = self.scan_pointer(s)

    def scan_pointer(self, s: int) -> int:
        ids = self.levels[s]
        if not ids:
            return 0
        return min(ids, key=lambda i: (self.rects[i].fbase, i))

    def retire(self, rect: MCSRect) -> None:
        self._leave_level(rect)
        rect.level = 0

    def saturate(self, rect: MCSRect) -> None:
        """Move a box that can no longer be split in floating point to ``s_max``."""
        self._leave_level(rect)
        rect.level = self.s_max
        self._enter_level(rect)
        self.degenerate_boxes += 1

    def bump(self, rect: MCSRect) -> None:
        self._leave_level(rect)
        rect.level = min(rect.level + 1, self.s_max)
        self._enter_level(rect)
        self.level_bumps += 1

    # -- recorded points ----------------------------------------------

    def record(self, x: np.ndarray, value: float) -> None:
        self.evaluated[tuple(x.tolist())] = value
        for i in range(len(x)):
            key = tuple(np.delete(x, i).tolist())
            self.lines[i].setdefault(key, []).append((float(x[i]), value))

    def neighbours(self, x: np.ndarray, axis: int, count: int = 2) -> list[tuple[float, float]]:
        """Closest recorded points differing from ``x`` only along ``axis``."""
        line = self.lines[axis].get(tuple(np.delete(x, axis).tolist()), [])
        others = [(t, v) for t, v in line if t != x[axis]]
        others.sort(key=lambda tv: (abs(tv[0] - x[axis]), tv[0]))
        return others[:count]

    def n_min_from_history(self, rect: MCSRect) -> int:
        counts = [0] * self.domain.dim
        node = rect
        while node.parent is not None:
            counts[node.split_axis] += 1
            node = self.rects[node.parent]
        return min(counts)

    def dump(self) -> str:
        rows = [
            {
                "id": r.id,
                "base": r.base.tolist(),
                "opposite": r.opposite.tolist(),
                "lower": r.lo.tolist(),
                "upper": r.hi.tolist(),
                "level": r.level,
                "fbase": r.fbase,
            }
            for r in self.live()
        ]
        return json.dumps({"sweep": self.sweeps, "rects": rows})


class _Runner:
    def __init__(self, f: Objective, state: MCSState, trace: Trace):
        self.f = f
        self.state = state
        self.trace = trace

    @property
    def f_best(self) -> float:
        return self.trace.incumbent.value

    def cost(self, points: Sequence[np.ndarray]) -> int:
        keys = {tuple(p.tolist()) for p in points}
        return sum(1 for k in keys if k not in self.state.evaluated)

    def value(self, x: np.ndarray) -> float:
        key = tuple(x.tolist())
        if key not in self.state.evaluated:
            v = evaluate(self.f, self.state.domain, x, self.trace, iteration=self.state.sweeps).value
            self.state.record(x, v)
        return self.state.evaluated[key]

    def new_rect(self, parent: MCSRect | None, lo, hi, base, fbase, level, ndiv, axis=None) -> MCSRect:
        st = self.state
        r = MCSRect(
            st.next_id,
            np.array(lo, dtype=float),
            np.array(hi, dtype=float),
            np.array(base, dtype=float),
            float(fbase),
            min(level, st.s_max),
            tuple(ndiv),
            None if parent is None else parent.id,
            axis,
        )
        st.next_id += 1
        st._insert(r)
        return r

    def _emit(self, rect: MCSRect, axis: int, pieces) -> list[MCSRect]:
        """Replace ``rect`` by children given as ``(lo_i, hi_i, base_i, fbase, level)`` along ``axis``."""
        ndiv = list(rect.ndiv)
        ndiv[axis] += 1
        self.state.retire(rect)
        children = []
        for lo_i, hi_i, b_i, fb, level in pieces:
            lo, hi, base = rect.lo.copy(), rect.hi.copy(), rect.base.copy()
            lo[axis], hi[axis], base[axis] = lo_i, hi_i, b_i
            children.append(self.new_rect(rect, lo, hi, base, fb, level, ndiv, axis))
        return children

    def split_by_list(self, rect: MCSRect, axis: int, coords: Sequence[float]) -> list[MCSRect] | None:
        """Split along ``axis`` at the given coordinates and the golden points between them.

        Returns ``None`` (after spending what budget is left) if the new
        evaluations cannot all be afforded.
        """
        lo_i, hi_i = rect.lo[axis], rect.hi[axis]
        ts = sorted({float(t) for t in coords if lo_i <= t <= hi_i} | {float(rect.base[axis])})
        pts = []
        for t in ts:
            x = rect.base.copy()
            x[axis] = t
            pts.append(x)
        if self.cost(pts) > self.trace.remaining:
            for x in pts:
                if self.trace.exhausted:
                    break
                self.value(x)
            self.state.out_of_budget = True
            return None
        golden = [golden_split(ts[l - 1], ts[l], 0.0, 0.0) for l in range(1, len(ts))]
        if any(not ts[l] < golden[l] < ts[l + 1] for l in range(len(golden))):
            self.state.saturate(rect)
            return []
        fs = [self.value(x) for x in pts]
        s = rect.level
        pieces = []
        if ts[0] > lo_i:
            pieces.append((lo_i, ts[0], ts[0], fs[0], s + 1))
        for l in range(1, len(ts)):
            z = golden_split(ts[l - 1], ts[l], fs[l - 1], fs[l])
            left_big = (z - ts[l - 1]) >= (ts[l] - z)
            pieces.append((ts[l - 1], z, ts[l - 1], fs[l - 1], s + 1 if left_big else s + 2))
            pieces.append((z, ts[l], ts[l], fs[l], s + 2 if left_big else s + 1))
        if ts[-1] < hi_i:
            pieces.append((ts[-1], hi_i, ts[-1], fs[-1], s + 1))
        self.state.list_divisions += 1
        return self._emit(rect, axis, pieces)

    def split_at(self, rect: MCSRect, axis: int, z: float) -> list[MCSRect] | None:
        """Three-way split of a previously split coordinate at ``z``."""
        x_i = float(rect.base[axis])
        o_i = float(rect.opposite[axis])
        if x_i not in (rect.lo[axis], rect.hi[axis]):
            raise AssertionError("base point must lie on the boundary of a split coordinate")
        # the golden point lies strictly between x_i and z whatever the values
        g_lo, g_hi = sorted((golden_split(x_i, z, 0.0, 1.0), golden_split(x_i, z, 1.0, 0.0))) if z != x_i else (x_i, x_i)
        if not (min(x_i, z) < g_lo and g_hi < max(x_i, z)) or z == o_i:
            self.state.saturate(rect)
            return []
        y = rect.base.copy()
        y[axis] = z
        if self.cost([y]) > self.trace.remaining:
            self.state.out_of_budget = True
            return None
        fz = self.value(y)
        g = golden_split(x_i, z, rect.fbase, fz)
        s = rect.level
        first_small = abs(g - x_i) < abs(z - g)
        pieces = [
            (min(x_i, g), max(x_i, g), x_i, rect.fbase, s + 2 if first_small else s + 1),
            (min(g, z), max(g, z), z, fz, s + 1 if first_small else s + 2),
            (min(z, o_i), max(z, o_i), z, fz, s + 1),
        ]
        return self._emit(rect, axis, pieces)

    # -- division rules ------------------------------------------------

    def divide_by_rank(self, rect: MCSRect) -> list[MCSRect] | None:
        axis = int(np.argmin(rect.ndiv))
        self.state.rank_divisions += 1
        if rect.ndiv[axis] == 0:
            return self.split_by_list(rect, axis, self.state.init.coords[axis])
        x_i = float(rect.base[axis])
        xi2 = split_range(x_i, float(rect.opposite[axis]))
        return self.split_at(rect, axis, x_i + 2.0 / 3.0 * (xi2 - x_i))

    def expected_gain(self, rect: MCSRect) -> tuple[int, float, float] | None:
        """Best ``(axis, z, gain)`` from the per-coordinate quadratic models."""
        best = None
        for i in range(self.state.domain.dim):
            nb = self.state.neighbours(rect.base, i)
            if len(nb) < 2:
                continue
            x_i = float(rect.base[i])
            (t1, f1), (t2, f2) = nb
            alpha, beta = _quadratic_coeffs(x_i, rect.fbase, t1, f1, t2, f2)
            xi2 = split_range(x_i, float(rect.opposite[i]))
            xi1 = x_i + (xi2 - x_i) / 10.0
            z, gain = quadratic_argmin(alpha, beta, x_i, min(xi1, xi2), max(xi1, xi2))
            if best is None or gain < best[2]:
                best = (i, z, gain)
        return best

    def divide_by_expected_gain(self, rect: MCSRect) -> list[MCSRect] | None:
        undivided = [i for i, n in enumerate(rect.ndiv) if n == 0]
        if undivided:
            axis = undivided[0]
            return self.split_by_list(rect, axis, self.state.init.coords[axis])
        best = self.expected_gain(rect)
        if best is None:
            self.state.gain_fallbacks += 1
            self.state.bump(rect)
            return []
        axis, z, gain = best
        if rect.fbase + gain < self.f_best:
            self.state.gain_divisions += 1
            return self.split_at(rect, axis, z)
        self.state.bump(rect)
        return []

    def process(self, rect: MCSRect) -> list[MCSRect] | None:
        d = self.state.domain.dim
        if rect.level > 2 * d * (rect.n_min + 1):
            return self.divide_by_rank(rect)
        return self.divide_by_expected_gain(rect)


def init_partition(runner: _Runner) -> np.ndarray:
    """Split the starting box along each coordinate in turn; returns the incumbent point."""
    st = runner.state
    init = st.init
    if runner.trace.exhausted:
        st.partial_init = True
        return init.x0
    f0 = runner.value(init.x0.copy())
    current = runner.new_rect(None, st.domain.lower, st.domain.upper, init.x0, f0, 1, (0,) * st.domain.dim)
    for axis in range(st.domain.dim):
        children = runner.split_by_list(current, axis, init.coords[axis])
        if children is None:
            st.partial_init = True
            break
        best_x = runner.trace.best_point
        holders = [c for c in children if np.array_equal(c.base, best_x)]
        if not holders:
            # incumbent not on this line: follow the best base among the children
            top = min(c.fbase for c in children)
            holders = [c for c in children if c.fbase == top]
            best_x = holders[0].base
        if len(holders) == 1:
            current = holders[0]
            continue
        ts = sorted({float(c.base[axis]) for c in children})
        fs = [st.evaluated[tuple(np.where(np.arange(st.domain.dim) == axis, t, best_x).tolist())] for t in ts]
        j = ts.index(float(best_x[axis]))
        j = min(max(j, 1), len(ts) - 2)
        alpha, beta = _quadratic_coeffs(ts[j], fs[j], ts[j - 1], fs[j - 1], ts[j + 1], fs[j + 1])
        target, _ = quadratic_argmin(alpha, beta, ts[j], ts[0], ts[-1])
        below = [c for c in holders if c.lo[axis] < best_x[axis]]
        above = [c for c in holders if c.hi[axis] > best_x[axis]]
        current = (below if target < best_x[axis] and below else above or below)[0]
    return runner.trace.best_point


def sweep(runner: _Runner) -> bool:
    """One pass over levels ``1 .. s_max - 1``. Returns False once the budget ran out mid-division."""
    st = runner.state
    st.sweeps += 1
    for s in range(1, st.s_max):
        if runner.trace.exhausted:
            return False
        p = st.pointers[s]
        if p == 0:
            continue
        if runner.process(st.rects[p]) is None:
            return False
    return True


def mcs_run(
    objective: Objective,
    domain: SearchDomain,
    budget: int,
    s_max: int | None = None,
    init: InitList | None = None,
    *,
    sense: Sense | str = Sense.MINIMIZE,
    callback: Callable[[MCSState, Trace], None] | None = None,
) -> Trace:
    """Minimize ``objective`` over ``domain`` with at most ``budget`` evaluations.

    ``s_max`` defaults to ``5 d + 10``. ``callback(state, trace)`` runs after
    every sweep. The basket and division statistics land in ``trace.extras``.
    """
    s_max = 5 * domain.dim + 10 if s_max is None else int(s_max)
    if s_max < 2:
        raise ValueError(f"s_max must be >= 2, got {s_max}")
    init = init or InitList.default(domain)
    init.validate(domain)
    f = normalize_sense(objective, sense)
    trace = Trace(domain, budget, sense=sense)
    state = MCSState(domain, s_max, init)
    runner = _Runner(f, state, trace)

    init_partition(runner)
    if not state.partial_init:
        while not trace.exhausted and any(state.pointers[s] for s in range(1, s_max)):
            ok = sweep(runner)
            if callback is not None:
                callback(state, trace)
            if not ok:
                break

    sign = trace.sense.sign
    trace.extras.update(
        {
            "s_max": s_max,
            "sweeps": state.sweeps,
            "partial_init": state.partial_init,
            "basket": [{"point": x.tolist(), "value": sign * v} for x, v in state.basket],
            "live_rects": len(state.live()),
            "rank_divisions": state.rank_divisions,
            "gain_divisions": state.gain_divisions,
            "list_divisions": state.list_divisions,
            "level_bumps": state.level_bumps,
            "gain_fallbacks": state.gain_fallbacks,
            "degenerate_boxes": state.degenerate_boxes,
        }
    )
    return trace
