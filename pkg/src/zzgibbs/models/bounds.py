"""Numeric machinery behind the switching-rate envelopes.

The envelopes need suprema of smooth one- and two-dimensional functions.
Reference maximizers (coarse grid plus golden-section refinement) implement
the documented contracts directly; the samplers use precomputed monotone
lookup tables built from the same integrands, which the test suite checks
for dominance against brute force.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


class EnvelopeOverflowError(RuntimeError):
    """Envelope constant left the precomputed range; shrink the horizon."""


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-10, max_iter: int = 200):
    """Maximize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def grid_refine_max(f, lo: float, hi: float, n_grid: int, boundary_error: str | None = None):
    """Grid scan plus golden-section refinement around the best cell.

    When ``boundary_error`` is given, attaining the maximum in the first or
    last grid cell raises with that message (the bracket was too narrow).
    """
    xs = np.linspace(lo, hi, n_grid)
    vals = f(xs)
    k = int(np.argmax(vals))
    if boundary_error and (k == 0 or k == n_grid - 1):
        raise ValueError(boundary_error)
    a = xs[max(k - 1, 0)]
    b = xs[min(k + 1, n_grid - 1)]
    _, fx = golden_section_max(lambda x: float(f(np.asarray([x]))[0]), a, b)
    return max(float(vals[k]), fx)


# ---------------------------------------------------------------------------
# Poisson: sup over counts of |u - lam| * pmf(u)^beta
# ---------------------------------------------------------------------------


def poisson_score_power_bound(lam, beta: float):
    """Closed-form upper bound on sup_u |u - lam| pmf_lam(u)^beta.

    exp(lam*beta - beta*log(pi)/2) * exp(lam^2 / e).  Loose for larger rates
    but fully analytic; the per-covariate factor |x_j| is applied by callers.
    """
    lam = np.asarray(lam, dtype=float)
    log_val = lam * beta - beta * np.log(np.pi) / 2.0 + lam * lam / np.e
    if np.any(log_val > 700.0):
        raise EnvelopeOverflowError("envelope overflow; reduce t_h")
    return np.exp(log_val)


def poisson_score_power_sup(lam: float, beta: float, u_max: int | None = None) -> float:
    """Brute-force sup over u in {0, ..., u_max} of |u - lam| pmf^beta."""
    if u_max is None:
        u_max = int(max(3 * lam, lam + 15 * np.sqrt(max(lam, 1.0)) + 60))
    u = np.arange(u_max + 1)
    logp = u * np.log(lam) - lam - gammaln(u + 1.0) if lam > 0 else np.where(u == 0, 0.0, -np.inf)
    return float(np.max(np.abs(u - lam) * np.exp(beta * logp)))


class PoissonScoreBoundTable:
    """Tight per-cell upper bounds for sup_u |u - lam| pmf_lam(u)^beta.

    Built once per model on a log-spaced rate lattice; lookups return the
    padded cell maximum, so the result dominates the true sup for every rate
    inside the covered range.  Rates above ``lam_max`` raise, mirroring the
    analytic bound's overflow contract.
    """

    def __init__(self, beta: float, lam_min: float = 1e-6, lam_max: float = 80.0,
                 n_nodes: int = 8000, pad: float = 1.05):
        self.beta = float(beta)
        self.lam_min = float(lam_min)
        self.lam_max = float(lam_max)
        self.pad = float(pad)
        log_grid = np.linspace(np.log(lam_min), np.log(lam_max), n_nodes)
        grid = np.exp(log_grid)
        u_top = int(max(3 * lam_max, lam_max + 15 * np.sqrt(lam_max) + 60))
        u = np.arange(u_top + 1)
        logp = u[None, :] * log_grid[:, None] - grid[:, None] - gammaln(u + 1.0)[None, :]
        g = np.abs(u[None, :] - grid[:, None]) * np.exp(beta * logp)
        # The integrand decays beyond the scan for every node; make sure the
        # scan is wide enough that the cut tail is negligible.
        node_sup = g.max(axis=1)
        if np.any(g[:, -1] > 1e-9 * node_sup):
            raise RuntimeError("count scan too short for the requested rate range")
        self._log_min = log_grid[0]
        self._inv_step = (n_nodes - 1) / (log_grid[-1] - log_grid[0])
        self._cell = np.maximum(node_sup[:-1], node_sup[1:]) * pad

    def __call__(self, lam) -> np.ndarray:
        return self.from_log(np.log(np.asarray(lam, dtype=float)))

    def from_log(self, log_lam) -> np.ndarray:
        """Lookup by log rate; the lattice is log-uniform so indexing is direct."""
        log_lam = np.asarray(log_lam, dtype=float)
        if np.any(log_lam > np.log(self.lam_max)):
            raise EnvelopeOverflowError("envelope overflow; reduce t_h")
        pos = (log_lam - self._log_min) * self._inv_step
        idx = np.clip(pos.astype(np.int64), 0, len(self._cell) - 1)
        return self._cell[idx]


# ---------------------------------------------------------------------------
# Gaussian kernel: max over t of |t| (|t| + delta) exp(-t^2 / (2 gamma))
# ---------------------------------------------------------------------------


def gaussian_product_sup(delta: float, gamma: float) -> float:
    """max_t |t^2 - delta*t| exp(-t^2/(2 gamma)) by direct 1-D maximization."""
    delta = abs(float(delta))
    f = lambda r: r * (r + delta) * np.exp(-r * r / (2.0 * gamma))
    top = 3.0 * np.sqrt(gamma) + 1e-9
    return grid_refine_max(lambda r: f(r), 0.0, top, 400)


def gaussian_product_tail_bound(delta, gamma: float):
    """Closed-form bound 2*gamma*e^-1 + delta*sqrt(gamma)*e^-1/2, any delta."""
    delta = np.abs(np.asarray(delta, dtype=float))
    return 2.0 * gamma * np.exp(-1.0) + delta * np.sqrt(gamma) * np.exp(-0.5)


class GaussianProductBoundTable:
    """Monotone table of max_t |t^2 - delta t| e^{-t^2/(2 gamma)} over |delta|.

    The maximum is attained with t opposite in sign to delta, so the target
    reduces to max_{r>=0} r (r + delta) e^{-r^2/(2 gamma)}, nondecreasing in
    |delta|; rounding the lookup up to the next node keeps it an upper bound.
    Beyond the covered range the closed-form tail bound applies.
    """

    def __init__(self, gamma: float, delta_max: float = 120.0, n_nodes: int = 6000,
                 pad: float = 1.0 + 1e-4):
        self.gamma = float(gamma)
        self.delta_max = float(delta_max)
        deltas = np.linspace(0.0, delta_max, n_nodes)
        r = np.linspace(0.0, 3.0 * np.sqrt(gamma), 600)
        vals = r[None, :] * (r[None, :] + deltas[:, None]) * np.exp(
            -r[None, :] ** 2 / (2.0 * gamma)
        )
        self._deltas = deltas
        self._vals = vals.max(axis=1) * pad

    def __call__(self, delta) -> np.ndarray:
        d = np.abs(np.asarray(delta, dtype=float))
        out = np.empty_like(d)
        inside = d <= self.delta_max
        idx = np.clip(np.searchsorted(self._deltas, d[inside], side="left"), 0,
                      len(self._deltas) - 1)
        out[inside] = self._vals[idx]
        out[~inside] = gaussian_product_tail_bound(d[~inside], self.gamma)
        return out


def regression_scale_bound_reference(y: float, c: float, gamma: float,
                                     n_grid: int = 200) -> float:
    """Documented maximizer for the log-scale data bound of the regression.

    Scans |(z - y)(c - z)| exp(-(y - z)^2/(2 gamma)) on a bracket spanning
    [min(y, c) - 5 sqrt(gamma), max(y, c) + 5 sqrt(gamma)] with 200 points,
    then refines by golden section.  Raises if the bracket is too narrow.
    """
    lo = min(y, c) - 5.0 * np.sqrt(gamma)
    hi = max(y, c) + 5.0 * np.sqrt(gamma)
    f = lambda z: np.abs((z - y) * (c - z)) * np.exp(-((y - z) ** 2) / (2.0 * gamma))
    return grid_refine_max(f, lo, hi, n_grid, boundary_error="widen z-bracket")
