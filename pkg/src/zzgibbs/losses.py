"""Simulation-estimated losses and their unbiased gradient estimators.

Two loss families are supported.  The density-power loss needs pointwise
density evaluations and admits a score-based gradient estimator; the kernel
discrepancy (squared-MMD) loss only needs a generative model and admits a
reparameterized gradient through the pushforward map.  Both estimators have
expectation equal to the gradient of the ideal (infinite-simulation) loss,
which is the property the zig-zag sampler relies on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np


@dataclass(frozen=True)
class RbfKernel:
    """Normalized radial basis kernel on R^p with lengthscale gamma.

    k(y, u) = (2 pi gamma)^(-p/2) exp(-sum_l (y_l - u_l)^2 / (2 gamma)).
    The value is maximal at y = u where it equals (2 pi gamma)^(-p/2).
    """

    lengthscale: float
    dim: int = 1

    def __post_init__(self):
        if self.lengthscale <= 0:
            raise ValueError("lengthscale must be positive")
        if self.dim < 1:
            raise ValueError("dimension must be at least 1")

    @property
    def peak(self) -> float:
        return float((2.0 * np.pi * self.lengthscale) ** (-self.dim / 2.0))

    def __call__(self, y: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Evaluate k(y, u); inputs broadcast over leading axes."""
        y = np.asarray(y, dtype=float)
        u = np.asarray(u, dtype=float)
        sq = np.sum((y - u) ** 2, axis=-1)
        return self.peak * np.exp(-sq / (2.0 * self.lengthscale))

    def cross(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Gram matrix k(a_i, b_j), inputs (n, p) and (m, p)."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        if a.ndim == 1:
            a = a[:, None] if self.dim == 1 else a[None, :]
        if b.ndim == 1:
            b = b[:, None] if self.dim == 1 else b[None, :]
        if a.shape[1] != self.dim or b.shape[1] != self.dim:
            raise ValueError("dimension mismatch")
        sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
        np.maximum(sq, 0.0, out=sq)
        return self.peak * np.exp(-sq / (2.0 * self.lengthscale))


def rbf_partial(kernel: RbfKernel, y: np.ndarray, u: np.ndarray, l: int) -> float:
    """Partial derivative of k(y, u) with respect to u_l (0-based index l).

    Equals (y_l - u_l) / ((2 pi)^(p/2) gamma^(p/2 + 1)) * exp(-||y - u||^2 / (2 gamma)),
    and is antisymmetric to the derivative in y_l.
    """
    if not 0 <= l < kernel.dim:
        raise IndexError("coordinate index out of range")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    u = np.atleast_1d(np.asarray(u, dtype=float))
    return float((y[l] - u[l]) / kernel.lengthscale * kernel(y, u))


@dataclass(frozen=True)
class Generator:
    """Pushforward representation of a simulable model.

    Sampling noise v from ``sample_noise`` and applying ``push`` at theta has
    the model's law; ``dpush`` returns the partials of each output coordinate
    with respect to each parameter, shape (..., p, d).
    """

    sample_noise: Callable[[np.random.Generator, int], np.ndarray]
    push: Callable[[np.ndarray, np.ndarray], np.ndarray]
    dpush: Callable[[np.ndarray, np.ndarray], np.ndarray]


# ---------------------------------------------------------------------------
# Density-power loss
# ---------------------------------------------------------------------------


def _power_density(log_density, values, beta):
    logp = np.asarray(log_density(values), dtype=float)
    if not np.all(np.isfinite(logp)):
        raise ValueError("non-finite density")
    return np.exp(beta * logp)


def beta_loss_estimate(log_density, y, u, beta: float) -> float:
    """Estimated density-power loss.

    mean over pseudo-samples of p^beta minus (1 + 1/beta) times the mean of
    p^beta over the data.  For conditional models ``u`` carries one axis per
    observation, ``y`` is (n,), and ``log_density`` broadcasts accordingly so
    each term conditions on its own covariate row.  Densities are evaluated
    in log space and exponentiated once, keeping p^beta stable for large beta.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    pu = _power_density(log_density, np.asarray(u), beta)
    py = _power_density(log_density, np.asarray(y), beta)
    return float(np.mean(pu) - (1.0 + 1.0 / beta) * np.mean(py))


def beta_grad_phi(log_density, score, y, u, beta: float) -> np.ndarray:
    """Unbiased gradient estimate of the ideal density-power loss.

    (beta+1) * [mean over pseudo-samples of (score * p^beta) minus the same
    mean over the data].  ``score`` returns d/dtheta log p with one trailing
    parameter axis.  Drawing u from the model at theta makes the expectation
    equal the ideal loss gradient.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    u = np.asarray(u)
    y = np.asarray(y)
    wu = _power_density(log_density, u, beta)
    wy = _power_density(log_density, y, beta)
    su = np.asarray(score(u), dtype=float)
    sy = np.asarray(score(y), dtype=float)
    if su.shape[:-1] != wu.shape or sy.shape[:-1] != wy.shape:
        raise ValueError("score and density shapes disagree")
    d = su.shape[-1]
    term_u = (su * wu[..., None]).reshape(-1, d).mean(axis=0)
    term_y = (sy * wy[..., None]).reshape(-1, d).mean(axis=0)
    return (beta + 1.0) * (term_u - term_y)


# ---------------------------------------------------------------------------
# Kernel discrepancy loss
# ---------------------------------------------------------------------------


def _as_points(x, p):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if p != 1:
            raise ValueError("dimension mismatch")
        return x[:, None]
    if x.shape[-1] != p:
        raise ValueError("dimension mismatch")
    return x


def mmd_loss_biased(kernel: RbfKernel, y, u) -> float:
    """Kernel-discrepancy loss with the diagonal-inclusive pseudo-sample term.

    -(2/(n m)) sum_ij k(u_j, y_i) + (1/m^2) sum_jj' k(u_j, u_j').  Nonnegative
    after adding the data-only kernel mean, being a squared discrepancy.
    """
    y = _as_points(y, kernel.dim)
    u = _as_points(u, kernel.dim)
    cross = kernel.cross(u, y)
    self_term = kernel.cross(u, u)
    return float(-2.0 * cross.mean() + self_term.mean())


def mmd_loss_unbiased(kernel: RbfKernel, y, u) -> float:
    """Kernel-discrepancy loss with the diagonal-excluded pseudo-sample term.

    The second term averages k(u_j, u_j') over the b(b-1) ordered pairs with
    j != j', which makes the loss (and hence its reparameterized gradient)
    unbiased for the ideal loss.
    """
    y = _as_points(y, kernel.dim)
    u = _as_points(u, kernel.dim)
    b = len(u)
    if b < 2:
        raise ValueError("unbiased MMD needs b >= 2")
    cross = kernel.cross(u, y)
    self_term = kernel.cross(u, u)
    off_diag = self_term.sum() - np.trace(self_term)
    return float(-2.0 * cross.mean() + off_diag / (b * (b - 1)))


def mmd_grad_phi(
    kernel: RbfKernel,
    generator: Generator,
    theta: np.ndarray,
    y,
    v: np.ndarray,
) -> np.ndarray:
    """Reparameterized gradient estimate of the ideal kernel loss.

    Chain rule through u = G_theta(v) applied to the diagonal-excluded loss:
    sums the kernel partials at the pushed-forward points against the
    generator partials.  ``v`` is (b, ...) noise with b >= 2; the expectation
    over the base noise equals the ideal loss gradient.
    """
    y = _as_points(y, kernel.dim)
    v = np.asarray(v, dtype=float)
    b = v.shape[0]
    if b < 2:
        raise ValueError("unbiased MMD needs b >= 2")
    u = _as_points(generator.push(theta, v), kernel.dim)  # (b, p)
    du = np.asarray(generator.dpush(theta, v), dtype=float)  # (b, p, d)
    if du.ndim == 2:
        du = du[:, :, None]
    n = len(y)
    gamma = kernel.lengthscale

    # dk(a, c)/dc_l = (a_l - c_l)/gamma * k(a, c); first term pairs data with
    # pseudo-points, second term pairs pseudo-points among themselves.
    k_yu = kernel(y[:, None, :], u[None, :, :])  # (n, b)
    diff_yu = y[:, None, :] - u[None, :, :]  # (n, b, p)
    grad_first = np.einsum("ik,ikl,klj->j", k_yu, diff_yu, du) / gamma
    first = -2.0 / (b * n) * grad_first

    k_uu = kernel(u[:, None, :], u[None, :, :])  # (b, b)
    diff_uu = u[:, None, :] - u[None, :, :]  # u_k - u_k', (b, b, p)
    # d/dtheta k(u_k, u_k') summed over ordered pairs k != k' equals twice the
    # contraction of dk/du_k = (u_k' - u_k)/gamma * k with du_k.
    grad_second = np.einsum("km,kml,klj->j", k_uu, -diff_uu, du) / gamma
    second = 2.0 / (b * (b - 1)) * grad_second
    return first + second
