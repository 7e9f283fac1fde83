"""Poisson regression under the density-power loss.

Responses are counts with rate exp(x^T theta), the prior on theta is
standard normal, and the loss raises the conditional pmf to the power beta.
The gradient estimator is score-based, so the simulator draws actual counts
from the model; one pseudo-observation set holds one count per data row.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

from ..core import Dataset, GibbsTarget, RateEnvelope
from ..losses import beta_grad_phi, beta_loss_estimate
from .bounds import PoissonScoreBoundTable, poisson_score_power_bound

_LOG_RATE_CAP = 690.0  # exp overflow guard for the rate itself


class PoissonRegressionModel:
    """Count regression with rate exp(x^T theta) and power-divergence loss."""

    def __init__(self, dataset: Dataset, beta: float = 0.5, rate_cap: float = 80.0):
        if dataset.covariates is None:
            raise ValueError("Poisson regression needs covariates")
        if beta <= 0:
            raise ValueError("beta must be positive")
        y = np.asarray(dataset.responses)
        if np.any(y < 0) or not np.all(np.equal(np.mod(y, 1), 0)):
            raise ValueError("responses must be nonnegative integers")
        self.dataset = dataset
        self.X = dataset.covariates
        self.y = y.astype(np.int64)
        self.beta = float(beta)
        self.n, self.dim = self.X.shape
        self._bound_table = PoissonScoreBoundTable(beta, lam_max=rate_cap)
        self._logfact_y = gammaln(self.y + 1.0)
        self._logfact = gammaln(np.arange(4096) + 1.0)

    # -- model evaluations --------------------------------------------------

    def rates(self, theta: np.ndarray) -> np.ndarray:
        z = self.X @ np.asarray(theta, dtype=float)
        if np.any(z > _LOG_RATE_CAP):
            raise ValueError("rate overflow")
        return np.exp(z)

    def log_pmf(self, theta: np.ndarray, values: np.ndarray) -> np.ndarray:
        """log pmf of counts; trailing axis of ``values`` runs over data rows."""
        lam = self.rates(theta)
        v = np.asarray(values)
        return v * np.log(lam) - lam - gammaln(v + 1.0)

    def score(self, theta: np.ndarray, values: np.ndarray) -> np.ndarray:
        """d/dtheta log pmf: (value - rate) x, trailing parameter axis."""
        lam = self.rates(theta)
        v = np.asarray(values, dtype=float)
        return (v - lam)[..., None] * self.X

    # -- simulation ----------------------------------------------------------

    def simulate(self, theta: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        """One pseudo-observation set: one count per data row."""
        return rng.poisson(self.rates(theta))

    def simulate_batch(self, theta: np.ndarray, b: int, rng: np.random.Generator) -> np.ndarray:
        return rng.poisson(self.rates(theta), size=(b, self.n))

    # -- loss and gradient estimators ----------------------------------------

    def loss_estimate(self, theta: np.ndarray, pseudo: np.ndarray) -> float:
        return beta_loss_estimate(lambda v: self.log_pmf(theta, v), self.y, pseudo, self.beta)

    def phi_generic(self, theta: np.ndarray, pseudo: np.ndarray) -> np.ndarray:
        """Reference estimator routed through the generic power-loss gradient."""
        return beta_grad_phi(
            lambda v: self.log_pmf(theta, v),
            lambda v: self.score(theta, v),
            self.y,
            pseudo,
            self.beta,
        )

    def phi(self, theta: np.ndarray, pseudo: np.ndarray) -> np.ndarray:
        """Unbiased loss-gradient estimate from a (b, n) pseudo sample."""
        return self._phi_rows(theta, pseudo, slice(None), self.n)

    def phi_batch(self, theta: np.ndarray, pseudo: np.ndarray, idx: np.ndarray) -> np.ndarray:
        """Mini-batch estimator restricted to the observation rows ``idx``."""
        return self._phi_rows(theta, pseudo, idx, len(idx))

    def phi_subsample(self, theta: np.ndarray, b: int, idx: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
        """Mini-batch estimate that simulates counts for the batch rows only."""
        X = self.X[idx]
        z = X @ np.asarray(theta, dtype=float)
        if np.any(z > _LOG_RATE_CAP):
            raise ValueError("rate overflow")
        lam = np.exp(z)
        u = rng.poisson(lam, size=(b, len(idx)))
        logf_u = self._logfact[u] if u.max() < len(self._logfact) else gammaln(u + 1.0)
        wu = np.exp(self.beta * (u * z - lam - logf_u))
        y = self.y[idx].astype(float)
        wy = np.exp(self.beta * (y * z - lam - self._logfact_y[idx]))
        term_u = (((u - lam) * wu).mean(axis=0) @ X) / len(idx)
        term_y = (((y - lam) * wy) @ X) / len(idx)
        return (self.beta + 1.0) * (term_u - term_y)

    def _phi_rows(self, theta, pseudo, rows, count):
        lam = self.rates(theta)[rows]
        log_lam = np.log(lam)
        X = self.X[rows]
        u = np.asarray(pseudo)[..., rows]
        logf_u = (
            self._logfact[u] if u.size and u.max() < len(self._logfact) else gammaln(u + 1.0)
        )
        uf = u.astype(float)
        wu = np.exp(self.beta * (uf * log_lam - lam - logf_u))
        y = self.y[rows].astype(float)
        wy = np.exp(self.beta * (y * log_lam - lam - self._logfact_y[rows]))
        term_u = (((uf - lam) * wu).mean(axis=-2) @ X) / count
        term_y = (((y - lam) * wy) @ X) / count
        return (self.beta + 1.0) * (term_u - term_y)

    # -- priors ----------------------------------------------------------------

    @staticmethod
    def prior_log_density_gradient(theta: np.ndarray) -> np.ndarray:
        return -np.asarray(theta, dtype=float)

    @staticmethod
    def log_prior(theta: np.ndarray) -> float:
        theta = np.asarray(theta, dtype=float)
        return float(-0.5 * theta @ theta - 0.5 * len(theta) * np.log(2.0 * np.pi))

    # -- switching-rate envelope ------------------------------------------------

    def envelope(
        self,
        theta: np.ndarray,
        nu: np.ndarray,
        horizon: float,
        omega: float,
        eta: float = 1.05,
        subsample: bool = False,
        s_points: int = 8,
        bound: str = "tight",
    ) -> RateEnvelope:
        """Affine envelope dominating the estimated rate on [0, horizon].

        Prior part: standard-normal ramp max(0, nu_j theta_j) + t.  Data
        part: both the pseudo-sample and the data score terms are bounded by
        the sup of |count - rate| pmf^beta per observation, evaluated along
        the ray on an s-grid and inflated by eta.  Sub-sampled runs replace
        the observation average by the observation maximum so the bound holds
        for every index batch.
        """
        theta = np.asarray(theta, dtype=float)
        nu = np.asarray(nu, dtype=float)
        s_grid = np.linspace(0.0, horizon, s_points)
        z = self.X @ theta
        w = self.X @ nu
        log_rates = z[None, :] + s_grid[:, None] * w[None, :]  # (s, n)
        if bound == "tight":
            sup_term = self._bound_table.from_log(log_rates)
        elif bound == "analytic":
            sup_term = poisson_score_power_bound(np.exp(np.minimum(log_rates, 700.0)), self.beta)
        else:
            raise ValueError("bound must be 'tight' or 'analytic'")
        if subsample:
            agg = (np.abs(self.X)[None, :, :] * sup_term[:, :, None]).max(axis=1)
        else:
            agg = np.einsum("sn,np->sp", sup_term, np.abs(self.X)) / self.n
        data_part = 2.0 * omega * (self.beta + 1.0) * eta * agg.max(axis=0)
        intercepts = np.maximum(0.0, nu * theta) + data_part
        return RateEnvelope(intercepts=intercepts, slopes=np.ones(self.dim), horizon=horizon)

    def envelope_provider(self, omega: float, eta: float = 1.05, subsample: bool = False,
                          bound: str = "tight"):
        return lambda theta, nu, horizon: self.envelope(
            theta, nu, horizon, omega, eta=eta, subsample=subsample, bound=bound
        )

    # -- target assembly ---------------------------------------------------------

    def make_target(self, omega: float, b: int) -> GibbsTarget:
        return GibbsTarget(
            dim=self.dim,
            omega=omega,
            prior_log_density_gradient=self.prior_log_density_gradient,
            loss_gradient_estimator=self.phi,
            simulator=self.simulate,
            simulate_batch=self.simulate_batch,
            loss_gradient_batch=self.phi_batch,
            subsample_gradient=self.phi_subsample,
            b=b,
            n_obs=self.n,
            min_b=1,
        )

    # -- pseudo-marginal pieces ----------------------------------------------------

    def draw_noise(self, rng: np.random.Generator, m: int) -> np.ndarray:
        """Base noise for the correlated pseudo-marginal chain: (m, n) uniforms."""
        return rng.random((m, self.n))

    @staticmethod
    def fresh_noise(rng: np.random.Generator, shape: tuple) -> np.ndarray:
        return rng.random(shape)

    def initial_draws(self, m: int) -> int:
        return m * self.n

    def _pmf_log_table(self, theta: np.ndarray) -> np.ndarray:
        lam = self.rates(theta)
        top = int(np.ceil(lam.max() + 12.0 * np.sqrt(lam.max()) + 30.0))
        u = np.arange(top + 1)
        logf = self._logfact[: top + 1] if top < len(self._logfact) else gammaln(u + 1.0)
        return u[None, :] * np.log(lam)[:, None] - lam[:, None] - logf[None, :]

    def push_noise(self, theta: np.ndarray, noise: np.ndarray) -> np.ndarray:
        """Counts from uniforms via the per-row inverse CDF at the current rates."""
        cdf = np.cumsum(np.exp(self._pmf_log_table(theta)), axis=1)  # (n, top+1)
        if np.any(cdf[:, -1] < 1.0 - 1e-9):
            raise ValueError("rate overflow")
        return (noise[:, :, None] > cdf[None, :, :]).sum(axis=2)

    def loss_from_noise(self, theta: np.ndarray, noise: np.ndarray) -> float:
        """Estimated loss with counts pushed from uniforms, one pmf table pass."""
        logp = self._pmf_log_table(theta)
        pmf = np.exp(logp)
        cdf = np.cumsum(pmf, axis=1)
        if np.any(cdf[:, -1] < 1.0 - 1e-9):
            raise ValueError("rate overflow")
        counts = (noise[:, :, None] > cdf[None, :, :]).sum(axis=2)  # (m, n)
        powtab = np.exp(self.beta * logp)  # (n, top+1)
        wu = powtab[np.arange(self.n)[None, :], counts]
        wy = np.exp(self.beta * self.log_pmf(theta, self.y))
        return float(wu.mean() - (1.0 + 1.0 / self.beta) * wy.mean())

    # -- oracle-grade exact quantities ------------------------------------------------

    def pmf_power_expectation(self, theta: np.ndarray, power: float,
                              mass_tol: float = 1e-12) -> np.ndarray:
        """Per-row sum over counts of pmf^power, truncated at mass 1 - mass_tol."""
        lam = self.rates(theta)
        top = 20
        while True:
            u = np.arange(top + 1)
            logp = u[None, :] * np.log(lam)[:, None] - lam[:, None] - gammaln(u + 1.0)[None, :]
            mass = np.exp(logp).sum(axis=1)
            if np.all(mass >= 1.0 - mass_tol):
                return np.exp(power * logp).sum(axis=1)
            top *= 2
            if top > 1_000_000:
                raise ValueError("rate overflow")

    def exact_loss(self, theta: np.ndarray) -> float:
        """Infinite-simulation loss, with the model integral summed exactly."""
        first = self.pmf_power_expectation(theta, 1.0 + self.beta).mean()
        wy = np.exp(self.beta * self.log_pmf(theta, self.y))
        return float(first - (1.0 + 1.0 / self.beta) * wy.mean())
