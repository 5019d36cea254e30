"""LIPO and AdaLIPO.

Both maximize natively. Proposals are drawn uniformly from the box; a
proposal is evaluated only if it can still be a maximizer of some
``K``-Lipschitz function that agrees with every evaluation so far, which is
the case iff

    min_i ( f(x_i) + K ||x - x_i|| ) >= max_i f(x_i).

AdaLIPO does not know ``K``. With probability ``p`` it evaluates a uniform
proposal unconditionally (exploration); otherwise it applies the test above
with its current estimate, the smallest value ``(1 + alpha)**i`` that is at
least the largest slope observed between any two evaluated points.

Rejected proposals do not cost evaluations but are capped at
``REJECTION_CAP_FACTOR * budget`` per run so that a tiny acceptance region
cannot stall the run forever.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import DfoptError, Objective, SearchDomain, Sense, Trace, evaluate, make_rng, normalize_sense

REJECTION_CAP_FACTOR = 50


class InfiniteSlope(DfoptError, ValueError):
    """Two identical points were recorded with different values."""


@dataclass
class EvaluatedSet:
    """Evaluated ``(point, value)`` pairs in the maximization sense."""

    points: list[np.ndarray] = field(default_factory=list)
    values: list[float] = field(default_factory=list)

    @classmethod
    def from_arrays(cls, X: Sequence[Sequence[float]], y: Sequence[float]) -> "EvaluatedSet":
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        return cls([np.array(x) for x in X], [float(v) for v in y])

    def add(self, point, value: float) -> None:
        self.points.append(np.atleast_1d(np.asarray(point, dtype=float)))
        self.values.append(float(value))

    def __len__(self) -> int:
        return len(self.values)

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        return np.array(self.points), np.array(self.values)


def upper_bound(history: EvaluatedSet, K: float, theta) -> float:
    """``min_i ( f(x_i) + K ||theta - x_i|| )``."""
    if len(history) == 0:
        raise ValueError("upper bound needs at least one evaluated point")
    X, y = history.arrays()
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    return float(np.min(y + K * np.linalg.norm(X - theta, axis=1)))


def lipo_decision(history: EvaluatedSet, K: float, theta) -> bool:
    """True iff ``theta`` is a potential maximizer given ``history`` and ``K``."""
    if len(history) < 2:
        return True
    return upper_bound(history, K, theta) >= max(history.values)


def round_up_to_mesh(slope: float, alpha: float) -> float:
    """Smallest ``(1 + alpha)**i``, ``i`` integer, that is ``>= slope``; 0 for zero slope."""
    if slope <= 0:
        return 0.0
    base = 1.0 + alpha
    i = math.ceil(math.log(slope) / math.log(base))
    # guard the log rounding in both directions
    while base**i < slope:
        i += 1
    while base ** (i - 1) >= slope:
        i -= 1
    return base**i


def _max_slope_against(X: np.ndarray, y: np.ndarray, x: np.ndarray, v: float) -> float:
    if len(y) == 0:
        return 0.0
    dist = np.linalg.norm(X - x, axis=1)
    dy = np.abs(y - v)
    same = dist == 0
    if np.any(same & (dy > 0)):
        raise InfiniteSlope(f"point {x.tolist()} recorded with two different values")
    keep = ~same
    return float(np.max(dy[keep] / dist[keep])) if np.any(keep) else 0.0


def max_pairwise_slope(history: EvaluatedSet) -> float:
    X, y = history.arrays()
    best = 0.0
    for t in range(1, len(y)):
        best = max(best, _max_slope_against(X[:t], y[:t], X[t], y[t]))
    return best


def adalipo_infer_constant(history: EvaluatedSet, alpha: float) -> float:
    """Mesh-rounded maximal pairwise slope of ``history``."""
    if len(history) < 2:
        raise ValueError("need at least two evaluated points")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    return round_up_to_mesh(max_pairwise_slope(history), alpha)


class _Sampler:
    """Shared bookkeeping for both variants: trace, history, per-step log."""

    def __init__(self, objective, domain, budget, seed, sense):
        self.domain = domain
        self.f = normalize_sense(objective, sense)
        self.trace = Trace(domain, budget, sense=sense)
        self.rng = make_rng(seed)
        self.history = EvaluatedSet()
        self.modes: list[str] = []
        self.constants: list[float] = []
        self.rejected = 0
        self.cap = REJECTION_CAP_FACTOR * budget
        self.cap_hit = False

    def propose(self) -> np.ndarray:
        return self.domain.sample_uniform(self.rng)

    def commit(self, x: np.ndarray, mode: str, K: float) -> float:
        sample = evaluate(self.f, self.domain, x, self.trace)
        # history holds maximization values
        self.history.add(sample.point, -sample.value)
        self.modes.append(mode)
        self.constants.append(K)
        return -sample.value

    def propose_accepted(self, K: float) -> np.ndarray | None:
        while True:
            x = self.propose()
            if lipo_decision(self.history, K, x):
                return x
            self.rejected += 1
            if self.rejected >= self.cap:
                self.cap_hit = True
                return None

    def finish(self, **extra) -> Trace:
        self.trace.extras.update(
            {
                "modes": self.modes,
                "lipschitz_trajectory": self.constants,
                "rejected_proposals": self.rejected,
                "rejection_cap": self.cap,
                "rejection_cap_hit": self.cap_hit,
                **extra,
            }
        )
        return self.trace


def lipo_run(
    objective: Objective,
    domain: SearchDomain,
    K: float,
    budget: int,
    seed: int = 0,
    *,
    sense: Sense | str = Sense.MAXIMIZE,
) -> Trace:
    """LIPO with a known Lipschitz constant ``K``.

    ``trace.extras["modes"]`` tags each evaluation as ``"init"`` (the first,
    unconditional sample) or ``"exploit"`` (accepted by the potential-maximizer
    test with constant ``trace.extras["lipschitz_trajectory"][t]``).
    """
    if not K >= 0:
        raise ValueError(f"Lipschitz constant must be >= 0, got {K}")
    s = _Sampler(objective, domain, budget, seed, sense)
    s.commit(s.propose(), "init", K)
    while not s.trace.exhausted:
        x = s.propose_accepted(K)
        if x is None:
            break
        s.commit(x, "exploit", K)
    return s.finish(algorithm="lipo")


def adalipo_run(
    objective: Objective,
    domain: SearchDomain,
    p: float,
    alpha: float,
    budget: int,
    seed: int = 0,
    *,
    sense: Sense | str = Sense.MAXIMIZE,
) -> Trace:
    """AdaLIPO: LIPO with an estimated constant and Bernoulli(``p``) exploration.

    On an exploitation step, rejected proposals are redrawn (up to the
    run-wide cap) so every step spends exactly one evaluation.
    ``trace.extras["lipschitz_trajectory"][t]`` is the estimate in force when
    evaluation ``t`` was decided; ``"final_lipschitz"`` is the last estimate.
    """
    if not 0 < p < 1:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha}")
    s = _Sampler(objective, domain, budget, seed, sense)
    K_hat = 0.0
    slope = 0.0
    s.commit(s.propose(), "init", K_hat)
    while not s.trace.exhausted:
        if s.rng.random() < p:
            x, mode = s.propose(), "explore"
        else:
            x, mode = s.propose_accepted(K_hat), "exploit"
            if x is None:
                break
        X, y = s.history.arrays()
        v = s.commit(x, mode, K_hat)
        slope = max(slope, _max_slope_against(X, y, s.history.points[-1], v))
        K_hat = round_up_to_mesh(slope, alpha)
    return s.finish(algorithm="adalipo", final_lipschitz=K_hat, p=p, alpha=alpha)
