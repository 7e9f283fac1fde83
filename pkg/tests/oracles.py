"""Independent oracles for expected values: quadrature, series, differences.

Everything here is deliberately written against the mathematical definitions
rather than the package implementations, so the tests compare two unrelated
computational routes.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

GH_NODES, GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(80)
GH_WEIGHTS = GH_WEIGHTS / GH_WEIGHTS.sum()


def central_difference(f, x, step=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    grad = np.zeros_like(x)
    for j in range(len(x)):
        e = np.zeros_like(x)
        e[j] = step
        grad[j] = (f(x + e) - f(x - e)) / (2.0 * step)
    return grad


def poisson_power_series(lam, power, mass_tol=1e-12):
    """sum over counts of pmf(u; lam)^power, truncated at mass 1 - mass_tol."""
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    top = 20
    while True:
        u = np.arange(top + 1)
        logp = u[None, :] * np.log(lam)[:, None] - lam[:, None] - gammaln(u + 1.0)[None, :]
        if np.all(np.exp(logp).sum(axis=1) >= 1.0 - mass_tol):
            return np.exp(power * logp).sum(axis=1)
        top *= 2


def poisson_beta_loss_exact(theta, X, y, beta):
    """Ideal density-power loss for count regression, by series truncation."""
    lam = np.exp(X @ theta)
    first = poisson_power_series(lam, 1.0 + beta).mean()
    logp_y = y * np.log(lam) - lam - gammaln(np.asarray(y) + 1.0)
    return float(first - (1.0 + 1.0 / beta) * np.exp(beta * logp_y).mean())


def regression_mmd_loss_quadrature(theta, X, y, gamma):
    """Ideal kernel loss for the Gaussian regression, by Gauss-Hermite quadrature."""
    coef, scale = theta[:-1], np.exp(theta[-1])
    centers = X @ coef
    peak = (2.0 * np.pi * gamma) ** -0.5
    u = centers[:, None] + scale * GH_NODES[None, :]
    cross = (peak * np.exp(-((y[:, None] - u) ** 2) / (2.0 * gamma)) * GH_WEIGHTS[None, :]).sum(
        axis=1
    )
    du = scale * np.sqrt(2.0) * GH_NODES  # difference of two independent draws
    pair = (peak * np.exp(-(du**2) / (2.0 * gamma)) * GH_WEIGHTS).sum()
    return float((-2.0 * cross + pair).mean())


def copula_mmd_loss_quadrature(theta, z_obs, gamma):
    """Ideal kernel loss for the copula on the Gaussian scale, 2-D quadrature."""
    theta = float(np.asarray(theta).reshape(()))
    rho = np.tanh(theta / 2.0)
    peak = (2.0 * np.pi * gamma) ** -1
    x1, x2 = np.meshgrid(GH_NODES, GH_NODES, indexing="ij")
    w2 = np.outer(GH_WEIGHTS, GH_WEIGHTS)
    wx = x1
    wy = rho * x1 + np.sqrt(1.0 - rho * rho) * x2
    cross = 0.0
    for a in z_obs:
        cross += (
            peak * np.exp(-((a[0] - wx) ** 2 + (a[1] - wy) ** 2) / (2.0 * gamma)) * w2
        ).sum()
    cross /= len(z_obs)
    # The difference of two pushed points is centered normal with covariance
    # 2 * [[1, rho], [rho, 1]]; integrate over its Cholesky pushforward.
    chol = np.linalg.cholesky(2.0 * np.array([[1.0, rho], [rho, 1.0]]))
    d1 = chol[0, 0] * x1 + chol[0, 1] * x2
    d2 = chol[1, 0] * x1 + chol[1, 1] * x2
    pair = (peak * np.exp(-(d1**2 + d2**2) / (2.0 * gamma)) * w2).sum()
    return float(-2.0 * cross + pair)


def mmd_squared_brute(kernel, y, u):
    """Plain squared-discrepancy expansion, including the data-only term."""
    y = np.atleast_2d(np.asarray(y, dtype=float).T).T
    u = np.atleast_2d(np.asarray(u, dtype=float).T).T
    if y.shape[1] != u.shape[1]:
        y = y.reshape(len(y), -1)
        u = u.reshape(len(u), -1)
    k_yy = np.array([[kernel(a, b) for b in y] for a in y])
    k_uu = np.array([[kernel(a, b) for b in u] for a in u])
    k_uy = np.array([[kernel(a, b) for b in y] for a in u])
    return k_yy.mean() - 2.0 * k_uy.mean() + k_uu.mean()
