"""Acquisition functions and the Bayesian-optimization loop.

The acquisition formulas are written for maximization. The loop therefore
fits the GP to the negated canonical values ``g = -f`` and compares against
``best = max g``; the trace keeps the usual minimizing values.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.special import ndtr

from .core import (
    NoiseModel,
    Objective,
    SearchDomain,
    Sense,
    Trace,
    evaluate,
    make_rng,
    normalize_sense,
)
from .direct import direct_run
from .gp import GpState, Kernel, PosteriorMoment, SquaredExponential, gp_fit

log = logging.getLogger(__name__)

DEFAULT_INNER_BUDGET = 200
INNER_EPSILON = 1e-4
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _norm_pdf(z):
    return _INV_SQRT_2PI * np.exp(-0.5 * np.square(z))


@dataclass(frozen=True)
class MPI:
    xi: float = 0.0

    def __post_init__(self):
        if not self.xi >= 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")


@dataclass(frozen=True)
class EI:
    pass


@dataclass(frozen=True)
class UCB:
    nu: float = 1.0
    delta: float = 0.1

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


@dataclass(frozen=True)
class FixedKappaUCB:
    """``mu + kappa * sigma`` with a constant ``kappa >= 0``."""

    kappa: float = 2.0

    def __post_init__(self):
        if not self.kappa >= 0:
            raise ValueError(f"kappa must be >= 0, got {self.kappa}")


AcquisitionSpec = MPI | EI | UCB | FixedKappaUCB


def mpi(moment: PosteriorMoment, best: float, xi: float = 0.0):
    """Probability that the value exceeds ``best + xi``.

    For ``sigma = 0`` this is the indicator ``mu > best + xi``.
    Accepts scalar or array moments.
    """
    mu = np.asarray(moment.mean, dtype=float)
    sigma = np.sqrt(np.asarray(moment.variance, dtype=float))
    gap = mu - best - xi
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(sigma > 0, ndtr(gap / np.where(sigma > 0, sigma, 1.0)), (gap > 0).astype(float))
    return out if out.ndim else float(out)


def ei(moment: PosteriorMoment, best: float):
    """Expected improvement ``(mu - best) Phi(Z) + sigma phi(Z)``, zero when ``sigma = 0``."""
    mu = np.asarray(moment.mean, dtype=float)
    sigma = np.sqrt(np.asarray(moment.variance, dtype=float))
    pos = sigma > 0
    safe = np.where(pos, sigma, 1.0)
    z = (mu - best) / safe
    val = (mu - best) * ndtr(z) + safe * _norm_pdf(z)
    # round-off can make the closed form a hair negative far in the lower tail
    out = np.where(pos, np.maximum(val, 0.0), 0.0)
    return out if out.ndim else float(out)


def ucb_gamma(tau: int, dim: int, delta: float) -> tuple[float, bool]:
    """``gamma = 2 log(dim tau^2 pi^2 / (6 delta))``, clamped at zero.

    Returns ``(gamma, clamped)``.
    """
    if tau < 1 or dim < 1:
        raise ValueError("tau and dim must be >= 1")
    gamma = 2.0 * math.log(dim * tau**2 * math.pi**2 / (6.0 * delta))
    if gamma < 0:
        return 0.0, True
    return gamma, False


def ucb(moment: PosteriorMoment, tau: int, dim: int, nu: float, delta: float):
    gamma, _ = ucb_gamma(tau, dim, delta)
    mu = np.asarray(moment.mean, dtype=float)
    sigma = np.sqrt(np.asarray(moment.variance, dtype=float))
    out = mu + math.sqrt(nu * gamma) * sigma
    return out if out.ndim else float(out)


def acquisition_values(acq: AcquisitionSpec, state: GpState, Q: np.ndarray, tau: int) -> np.ndarray:
    """Acquisition at the rows of ``Q`` for a GP fitted on the maximization values."""
    if state.n == 0:
        raise ValueError("acquisition needs at least one observation")
    mean, var = state.predict(Q)
    moment = PosteriorMoment(mean, var)
    best = float(state.z.max())
    if isinstance(acq, MPI):
        return np.atleast_1d(mpi(moment, best, acq.xi))
    if isinstance(acq, EI):
        return np.atleast_1d(ei(moment, best))
    if isinstance(acq, UCB):
        return np.atleast_1d(ucb(moment, tau, state.dim, acq.nu, acq.delta))
    if isinstance(acq, FixedKappaUCB):
        return mean + acq.kappa * np.sqrt(var)
    raise TypeError(f"unknown acquisition {acq!r}")


class Suggestion(NamedTuple):
    point: np.ndarray
    value: float
    degenerate: bool
    inner_evaluations: int


def suggest_next(
    state: GpState,
    acq: AcquisitionSpec,
    domain: SearchDomain,
    tau: int,
    inner_budget: int = DEFAULT_INNER_BUDGET,
) -> Suggestion:
    """Maximize the acquisition over ``domain`` with DIRECT.

    ``degenerate`` is set when every inner evaluation returned the same
    acquisition value, in which case the point is an arbitrary in-domain one.
    """

    def negated(x):
        return -acquisition_values(acq, state, x[None, :], tau)[0]

    inner = direct_run(negated, domain, inner_budget, INNER_EPSILON)
    vals = inner.values()
    degenerate = bool(vals.max() == vals.min())
    if degenerate:
        log.debug("acquisition is constant over %d inner evaluations", len(vals))
    return Suggestion(inner.best_point.copy(), -inner.incumbent.value, degenerate, len(inner))


@dataclass
class BayesOptConfig:
    kernel: Kernel = field(default_factory=SquaredExponential)
    acquisition: AcquisitionSpec = field(default_factory=EI)
    init_samples: int | None = None
    budget: int = 30
    inner_budget: int = DEFAULT_INNER_BUDGET
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = 0

    def resolved_init(self, dim: int) -> int:
        return self.init_samples if self.init_samples is not None else max(2, dim + 1)

    def validate(self, dim: int) -> None:
        n0 = self.resolved_init(dim)
        if n0 < 1:
            raise ValueError("init_samples must be positive")
        if n0 > self.budget:
            raise ValueError(f"init_samples ({n0}) exceeds budget ({self.budget})")
        if self.inner_budget < 1:
            raise ValueError("inner_budget must be >= 1")


def bayesopt_run(
    objective: Objective,
    domain: SearchDomain,
    config: BayesOptConfig,
    *,
    sense: Sense | str = Sense.MINIMIZE,
) -> Trace:
    """Random initial design, then suggest / evaluate with noise / refit until the budget is spent."""
    config.validate(domain.dim)
    f = normalize_sense(objective, sense)
    rng = make_rng(config.seed)
    trace = Trace(domain, config.budget, sense=sense)

    n0 = config.resolved_init(domain.dim)
    for x in domain.sample_uniform(rng, n0):
        evaluate(f, domain, x, trace, config.noise, rng, iteration=0)

    inner_total = 0
    degenerate = 0
    gamma_clamped = 0
    jitters = []
    tau = 0
    while not trace.exhausted:
        tau += 1
        state = gp_fit(trace.points(), -trace.values(), config.kernel, config.noise)
        jitters.append(state.jitter)
        t_index = len(trace) + 1
        if isinstance(config.acquisition, UCB) and ucb_gamma(t_index, domain.dim, config.acquisition.delta)[1]:
            gamma_clamped += 1
        sug = suggest_next(state, config.acquisition, domain, t_index, config.inner_budget)
        inner_total += sug.inner_evaluations
        degenerate += sug.degenerate
        evaluate(f, domain, sug.point, trace, config.noise, rng, iteration=tau)

    trace.extras.update(
        {
            "init_samples": n0,
            "inner_evaluations": inner_total,
            "degenerate_suggestions": degenerate,
            "ucb_gamma_clamped": gamma_clamped,
            "max_jitter": max(jitters, default=0.0),
        }
    )
    return trace
