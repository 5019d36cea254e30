"""Problem abstraction shared by every optimizer.

Search domains, objective-sense handling, evaluation budgets, seeded
randomness and the trace that records every objective evaluation.

All optimizers minimize internally. A maximization problem is handled by
negating the objective once (see :func:`normalize_sense`) and flipping the
sign back whenever values are reported.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np

TRACE_HEADER = "# dfopt-trace v1"

Objective = Callable[[np.ndarray], float]


class DfoptError(Exception):
    """Base class for errors raised by this package."""


class DomainError(DfoptError, ValueError):
    """Invalid bounds, or a point that lies outside its search domain."""


class BudgetExhausted(DfoptError):
    """Raised when an evaluation is requested after the budget is spent."""


class NumericalError(DfoptError, ArithmeticError):
    """A linear-algebra or floating-point failure the algorithm cannot recover from."""


class Sense(str, Enum):
    MINIMIZE = "minimize"
    MAXIMIZE = "maximize"

    @property
    def sign(self) -> float:
        return 1.0 if self is Sense.MINIMIZE else -1.0


class SearchDomain:
    """Axis-aligned box ``[lower_i, upper_i]``."""

    def __init__(self, lower: Sequence[float], upper: Sequence[float]):
        lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if lower.ndim != 1 or lower.shape != upper.shape:
            raise DomainError("lower and upper bounds must be 1-d and of equal length")
        if lower.size == 0:
            raise DomainError("domain needs at least one dimension")
        if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
            raise DomainError("bounds must be finite")
        if np.any(lower >= upper):
            raise DomainError(f"degenerate or inverted axis: lower={lower}, upper={upper}")
        lower.flags.writeable = False
        upper.flags.writeable = False
        self.lower = lower
        self.upper = upper

    @classmethod
    def cube(cls, low: float, high: float, dim: int) -> "SearchDomain":
        return cls([low] * dim, [high] * dim)

    @property
    def dim(self) -> int:
        return self.lower.size

    @property
    def width(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (self.lower + self.upper)

    @property
    def volume(self) -> float:
        return float(np.prod(self.width))

    def contains(self, point: np.ndarray, tol: float = 0.0) -> bool:
        point = np.asarray(point, dtype=float)
        if point.shape != (self.dim,):
            return False
        return bool(np.all(point >= self.lower - tol) and np.all(point <= self.upper + tol))

    def check(self, point: Sequence[float]) -> np.ndarray:
        """Return ``point`` as a float array, raising :class:`DomainError` if outside."""
        x = np.atleast_1d(np.asarray(point, dtype=float))
        if x.shape != (self.dim,):
            raise DomainError(f"point has shape {x.shape}, domain has dim {self.dim}")
        if not self.contains(x):
            raise DomainError(f"point {x.tolist()} outside domain {self.lower.tolist()}..{self.upper.tolist()}")
        return x

    def to_unit(self, point: Sequence[float]) -> np.ndarray:
        return rescale_to_unit(self, point)

    def from_unit(self, u: Sequence[float]) -> np.ndarray:
        return rescale_from_unit(self, u)

    def sample_uniform(self, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
        size = (self.dim,) if n is None else (n, self.dim)
        return self.lower + rng.random(size) * self.width

    def to_dict(self) -> dict:
        return {"lower": self.lower.tolist(), "upper": self.upper.tolist()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SearchDomain):
            return NotImplemented
        return bool(np.array_equal(self.lower, other.lower) and np.array_equal(self.upper, other.upper))

    def __repr__(self) -> str:
        return f"SearchDomain(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


def rescale_to_unit(domain: SearchDomain, point: Sequence[float]) -> np.ndarray:
    """Affine map of ``point`` from ``domain`` onto ``[0, 1]^d``."""
    x = domain.check(point)
    return (x - domain.lower) / domain.width


def rescale_from_unit(domain: SearchDomain, u: Sequence[float]) -> np.ndarray:
    """Inverse of :func:`rescale_to_unit`."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape[-1] != domain.dim:
        raise DomainError(f"unit point has dim {u.shape[-1]}, domain has dim {domain.dim}")
    x = domain.lower + u * domain.width
    # clamp round-off so that u in [0, 1] maps inside the box
    return np.clip(x, domain.lower, domain.upper)


@dataclass(frozen=True)
class NoiseModel:
    variance: float = 0.0

    def __post_init__(self):
        if not (self.variance >= 0.0 and math.isfinite(self.variance)):
            raise ValueError(f"noise variance must be finite and >= 0, got {self.variance}")

    def draw(self, rng: np.random.Generator) -> float:
        if self.variance == 0.0:
            return 0.0
        return float(rng.normal(0.0, math.sqrt(self.variance)))


def make_rng(seed: int) -> np.random.Generator:
    """Seeded PCG64 stream; equal seeds give identical streams."""
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.default_rng(seed)


def as_scalar(value: Any) -> float:
    """Coerce an objective's return value to a Python float."""
    arr = np.asarray(value, dtype=float)
    if arr.size != 1:
        raise ValueError(f"objective returned {arr.size} values, expected a scalar")
    return float(arr.reshape(()))


def normalize_sense(objective: Objective, sense: Sense | str = Sense.MINIMIZE) -> Objective:
    """Return the minimizing form of ``objective``.

    For ``maximize`` the result is the pointwise negation; for ``minimize``
    the objective itself is returned.
    """
    sense = Sense(sense)
    if sense is Sense.MINIMIZE:
        return objective

    def negated(x):
        return -as_scalar(objective(x))

    negated.__wrapped__ = objective
    return negated


@dataclass(frozen=True)
class Sample:
    point: np.ndarray
    value: float
    iteration: int


@dataclass
class Trace:
    """Ordered record of objective evaluations.

    ``samples`` hold values in the canonical (minimizing) sense. Use
    :meth:`reported_values` or :attr:`best_value` for values in the caller's
    original sense.
    """

    domain: SearchDomain
    budget: int
    sense: Sense = Sense.MINIMIZE
    samples: list[Sample] = field(default_factory=list)
    best: int | None = None
    extras: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.sense = Sense(self.sense)
        if int(self.budget) < 1:
            raise ValueError(f"budget must be a positive integer, got {self.budget}")
        self.budget = int(self.budget)

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def remaining(self) -> int:
        return self.budget - len(self.samples)

    @property
    def exhausted(self) -> bool:
        return len(self.samples) >= self.budget

    def record(self, point: np.ndarray, value: float, iteration: int | None = None) -> Sample:
        if self.exhausted:
            raise BudgetExhausted(f"evaluation budget of {self.budget} exhausted")
        value = float(value)
        if not math.isfinite(value):
            raise NumericalError(f"objective returned non-finite value {value} at {np.asarray(point).tolist()}")
        if iteration is None:
            iteration = self.samples[-1].iteration + 1 if self.samples else 0
        elif self.samples and iteration < self.samples[-1].iteration:
            raise ValueError("samples must be recorded in iteration order")
        point = np.array(point, dtype=float)
        point.flags.writeable = False
        sample = Sample(point, value, int(iteration))
        self.samples.append(sample)
        if self.best is None or value < self.samples[self.best].value:
            self.best = len(self.samples) - 1
        return sample

    @property
    def incumbent(self) -> Sample | None:
        return None if self.best is None else self.samples[self.best]

    @property
    def best_value(self) -> float:
        """Incumbent value in the caller's original sense."""
        if self.best is None:
            raise ValueError("empty trace")
        return self.sense.sign * self.samples[self.best].value

    @property
    def best_point(self) -> np.ndarray:
        if self.best is None:
            raise ValueError("empty trace")
        return self.samples[self.best].point

    def points(self) -> np.ndarray:
        if not self.samples:
            return np.empty((0, self.domain.dim))
        return np.array([s.point for s in self.samples])

    def values(self) -> np.ndarray:
        """Canonical (minimizing) values."""
        return np.array([s.value for s in self.samples], dtype=float)

    def reported_values(self) -> np.ndarray:
        return self.sense.sign * self.values()

    def best_so_far(self) -> np.ndarray:
        return self.sense.sign * np.minimum.accumulate(self.values()) if self.samples else np.empty(0)

    # -- serialization -------------------------------------------------

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(TRACE_HEADER + "\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", *[f"x{i}" for i in range(self.domain.dim)], "value", "is_incumbent"])
        for idx, s in enumerate(self.samples):
            writer.writerow(
                [s.iteration, *[repr(float(v)) for v in s.point], repr(self.sense.sign * s.value), int(idx == self.best)]
            )
        return buf.getvalue()

    def to_dict(self, config: dict | None = None, seed: int | None = None) -> dict:
        return {
            "format": "dfopt-trace",
            "version": 1,
            "config": config or {},
            "seed": seed,
            "sense": self.sense.value,
            "budget": self.budget,
            "domain": self.domain.to_dict(),
            "samples": [
                {"iteration": s.iteration, "point": [float(v) for v in s.point], "value": self.sense.sign * s.value}
                for s in self.samples
            ],
            "best": self.best,
            "extras": to_jsonable(self.extras),
        }

    def to_json(self, config: dict | None = None, seed: int | None = None) -> str:
        return json.dumps(self.to_dict(config, seed), indent=1, sort_keys=True)

    @classmethod
    def from_dict(cls, doc: dict) -> "Trace":
        if doc.get("format") != "dfopt-trace" or doc.get("version") != 1:
            raise ValueError("not a dfopt-trace v1 document")
        sense = Sense(doc["sense"])
        domain = SearchDomain(doc["domain"]["lower"], doc["domain"]["upper"])
        trace = cls(domain, doc["budget"], sense=sense, extras=doc.get("extras", {}))
        for s in doc["samples"]:
            trace.record(s["point"], sense.sign * s["value"], s["iteration"])
        return trace

    @classmethod
    def from_csv(cls, text: str, domain: SearchDomain, budget: int, sense: Sense | str = Sense.MINIMIZE) -> "Trace":
        lines = text.splitlines()
        if not lines or lines[0].strip() != TRACE_HEADER:
            raise ValueError(f"missing trace header {TRACE_HEADER!r}")
        sense = Sense(sense)
        trace = cls(domain, budget, sense=sense)
        reader = csv.DictReader(lines[1:])
        for row in reader:
            point = [float(row[f"x{i}"]) for i in range(domain.dim)]
            trace.record(point, sense.sign * float(row["value"]), int(row["iteration"]))
        return trace


def evaluate(
    objective: Objective,
    domain: SearchDomain,
    point: Sequence[float],
    trace: Trace,
    noise: NoiseModel | None = None,
    rng: np.random.Generator | None = None,
    iteration: int | None = None,
) -> Sample:
    """Evaluate ``objective`` at ``point`` and append the result to ``trace``.

    ``objective`` must already be in minimizing form. Gaussian noise with the
    given variance is added when ``noise`` is non-zero, drawn from ``rng``.
    """
    x = domain.check(point)
    if trace.exhausted:
        raise BudgetExhausted(f"evaluation budget of {trace.budget} exhausted")
    value = as_scalar(objective(x.copy()))
    if noise is not None and noise.variance > 0.0:
        if rng is None:
            raise ValueError("a random stream is required for noisy evaluation")
        value += noise.draw(rng)
    return trace.record(x, value, iteration)


def to_jsonable(obj: Any) -> Any:
    """Recursively convert numpy containers and scalars to plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, Enum):
        return obj.value
    return obj
