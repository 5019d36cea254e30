"""Gaussian-process surrogate with a zero prior mean.

Four covariance functions are provided: plain squared exponential, squared
exponential with a width ``beta``, squared exponential with per-axis ARD
widths, and Matérn for half-integer orders.

The Matérn kernel uses the scaled distance ``u = 2 * sqrt(order) * r``,
i.e. ``k = 2**(1-order)/Gamma(order) * u**order * K_order(u)``. Much of the
literature scales by ``sqrt(2 * order)`` instead; the two differ only by a
constant factor on the length scale. For the supported orders the Bessel
expression has the closed forms ``exp(-u)``, ``(1 + u) exp(-u)`` and
``(1 + u + u**2/3) exp(-u)``, and the kernel is 1 at zero distance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .core import NoiseModel, NumericalError

JITTER_START = 1e-10
JITTER_MAX = 1e-2
VARIANCE_CLAMP = 1e-9


def _sqdist(X: np.ndarray, Y: np.ndarray) -> np.ndarray:
    diff = X[:, None, :] - Y[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


class Kernel:
    """Stationary covariance function ``k(x, y)`` with ``k(x, x) = 1``."""

    def matrix(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def diag(self, X: np.ndarray) -> np.ndarray:
        return np.ones(len(X))

    def check_dim(self, dim: int) -> None:
        pass

    def __call__(self, x, y) -> float:
        return kernel_eval(self, x, y)


@dataclass(frozen=True)
class SquaredExponential(Kernel):
    def matrix(self, X, Y):
        return np.exp(-0.5 * _sqdist(X, Y))


@dataclass(frozen=True)
class SquaredExponentialWidth(Kernel):
    beta: float = 1.0

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"width beta must be positive, got {self.beta}")

    def matrix(self, X, Y):
        return np.exp(-_sqdist(X, Y) / (2.0 * self.beta**2))


@dataclass(frozen=True)
class SquaredExponentialARD(Kernel):
    beta: tuple[float, ...] = field(default=(1.0,))

    def __post_init__(self):
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if not beta or any(not b > 0 for b in beta):
            raise ValueError(f"ARD widths must all be positive, got {beta}")
        object.__setattr__(self, "beta", beta)

    def check_dim(self, dim):
        if len(self.beta) != dim:
            raise ValueError(f"ARD kernel has {len(self.beta)} widths but points have dim {dim}")

    def matrix(self, X, Y):
        self.check_dim(X.shape[1])
        b = np.asarray(self.beta)
        return np.exp(-0.5 * _sqdist(X / b, Y / b))


@dataclass(frozen=True)
class Matern(Kernel):
    order: float = 2.5

    SUPPORTED = (0.5, 1.5, 2.5)

    def __post_init__(self):
        if self.order not in self.SUPPORTED:
            raise ValueError(f"Matern order must be one of {self.SUPPORTED}, got {self.order}")

    def matrix(self, X, Y):
        u = 2.0 * np.sqrt(self.order) * np.sqrt(np.maximum(_sqdist(X, Y), 0.0))
        return matern_closed_form(self.order, u)


def matern_closed_form(order: float, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    if order == 0.5:
        return np.exp(-u)
    if order == 1.5:
        return (1.0 + u) * np.exp(-u)
    if order == 2.5:
        return (1.0 + u + u * u / 3.0) * np.exp(-u)
    raise ValueError(f"unsupported Matern order {order}")


def kernel_eval(kernel: Kernel, x: Sequence[float], y: Sequence[float]) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if x.shape != y.shape or x.ndim != 1:
        raise ValueError(f"kernel arguments must be vectors of equal length, got {x.shape} and {y.shape}")
    kernel.check_dim(x.size)
    return float(kernel.matrix(x[None, :], y[None, :])[0, 0])


class PosteriorMoment(NamedTuple):
    mean: float
    variance: float

    @property
    def std(self) -> float:
        return float(np.sqrt(self.variance))


@dataclass(frozen=True)
class GpState:
    """Fitted GP: training data plus the Cholesky factor of the noisy Gram matrix."""

    X: np.ndarray
    z: np.ndarray
    gram: np.ndarray
    kernel: Kernel
    noise_variance: float
    jitter: float
    chol: np.ndarray
    weights: np.ndarray  # (K + noise I + jitter I)^-1 z

    @property
    def n(self) -> int:
        return len(self.z)

    @property
    def dim(self) -> int:
        return self.X.shape[1]

    def predict(self, Q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized posterior mean and variance at the rows of ``Q``."""
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != self.dim:
            raise ValueError(f"query dim {Q.shape[1]} does not match training dim {self.dim}")
        prior = self.kernel.diag(Q)
        if self.n == 0:
            return np.zeros(len(Q)), prior
        kq = self.kernel.matrix(self.X, Q)
        mean = kq.T @ self.weights
        v = solve_triangular(self.chol, kq, lower=True, check_finite=False)
        var = prior - np.einsum("ij,ij->j", v, v)
        if np.any(var < -VARIANCE_CLAMP):
            raise NumericalError(f"posterior variance {var.min():.3e} is negative beyond round-off")
        return mean, np.maximum(var, 0.0)


def gp_fit(
    points: Sequence[Sequence[float]],
    values: Sequence[float],
    kernel: Kernel,
    noise: NoiseModel | None = None,
) -> GpState:
    """Assemble the Gram matrix, add observation noise to its diagonal, and factor it.

    If the Cholesky factorization fails, a jitter starting at 1e-10 is added
    to the diagonal and increased tenfold until it succeeds; the jitter used is
    kept on the returned state. A state with zero points is the prior.
    """
    noise = noise or NoiseModel()
    z = np.asarray(values, dtype=float).reshape(-1)
    X = np.asarray(points, dtype=float)
    if X.ndim == 1:
        X = X.reshape(len(z), -1) if len(z) else X.reshape(0, max(X.size, 1))
    if X.ndim != 2 or len(X) != len(z):
        raise ValueError(f"got {len(X)} points and {len(z)} values")
    kernel.check_dim(X.shape[1])
    gram = kernel.matrix(X, X)
    gram = 0.5 * (gram + gram.T)
    noisy = gram + noise.variance * np.eye(len(z))

    jitter = 0.0
    while True:
        try:
            chol = np.linalg.cholesky(noisy + jitter * np.eye(len(z)))
        except np.linalg.LinAlgError:
            chol = None
        if chol is not None and (len(z) == 0 or np.all(np.diag(chol) > 0)):
            break
        jitter = JITTER_START if jitter == 0.0 else jitter * 10.0
        if jitter > JITTER_MAX:
            raise NumericalError("Gram matrix is not factorizable even with maximal jitter")
    weights = cho_solve((chol, True), z, check_finite=False) if len(z) else np.zeros(0)
    return GpState(X, z, noisy, kernel, noise.variance, jitter, chol, weights)


def gp_posterior(state: GpState, query: Sequence[float]) -> PosteriorMoment:
    """Posterior mean ``k^T K^-1 z`` and variance ``k(q, q) - k^T K^-1 k`` at ``query``."""
    q = np.atleast_1d(np.asarray(query, dtype=float))
    if q.shape != (state.dim,):
        raise ValueError(f"query has shape {q.shape}, expected ({state.dim},)")
    mean, var = state.predict(q[None, :])
    return PosteriorMoment(float(mean[0]), float(var[0]))
