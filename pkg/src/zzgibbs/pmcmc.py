"""Block pseudo-marginal Metropolis-Hastings on the extended (theta, noise) space.

The auxiliary randomness is stored as base noise with a parameter-free law
and pushed through the model's generator at every loss evaluation, so the
same noise stays coherent as theta moves.  Each iteration refreshes exactly
one block of that noise (one observation's draws, or one draw across all
observations) and proposes theta jointly; accepting or rejecting the pair
leaves the extended target invariant, whose theta-marginal is the implicit
posterior induced by the estimated loss at the configured m.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

STRATEGIES = ("per-observation-block", "per-draw-block")


@dataclass
class ChainState:
    """Current point of the extended chain plus its cached loss value."""

    theta: np.ndarray
    noise: np.ndarray
    loss: float
    log_prior: float
    accepted: int = 0


@dataclass
class BlockPmcmcConfig:
    m: int
    iterations: int
    omega: float
    proposal_cov: np.ndarray
    theta0: np.ndarray
    seed: int = 0
    blocking: str = "per-observation-block"
    audit_every: int = 1000

    def __post_init__(self):
        if self.m < 1:
            raise ValueError("m must be a positive integer")
        if self.iterations < 1:
            raise ValueError("iterations must be positive")
        if self.blocking not in STRATEGIES:
            raise ValueError(f"unknown blocking strategy {self.blocking!r}")
        cov = np.atleast_2d(np.asarray(self.proposal_cov, dtype=float))
        if not np.allclose(cov, cov.T):
            raise ValueError("proposal covariance must be symmetric")
        object.__setattr__(self, "proposal_cov", cov)


@dataclass
class PmcmcResult:
    draws: np.ndarray
    accepted: np.ndarray
    state: ChainState
    diagnostics: dict = field(default_factory=dict)


def block_update(
    noise: np.ndarray,
    strategy: str,
    rng: np.random.Generator,
    fresh_noise: Callable[[np.random.Generator, tuple], np.ndarray],
) -> tuple[np.ndarray, int, int]:
    """Replace exactly one noise block with fresh base-noise draws.

    per-observation-block picks a data index and redraws that observation's
    m-vector of noise; per-draw-block picks one of the m draws and redraws it
    across the (single) observation axis.  Returns the new state, the chosen
    block index, and the number of fresh draws made.  All other blocks are
    returned untouched (same values, new array).
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown blocking strategy {strategy!r}")
    out = noise.copy()
    if strategy == "per-observation-block":
        if noise.ndim < 2:
            raise ValueError("per-observation blocking needs an observation axis")
        j = int(rng.integers(noise.shape[1]))
        block = fresh_noise(rng, (noise.shape[0],) + noise.shape[2:])
        out[:, j] = block
        return out, j, noise.shape[0]
    a = int(rng.integers(noise.shape[0]))
    out[a] = fresh_noise(rng, noise.shape[1:])
    return out, a, 1


def mh_accept_prob(
    theta: np.ndarray,
    theta_prop: np.ndarray,
    loss_curr: float,
    loss_prop: float,
    log_prior: Callable[[np.ndarray], float],
    omega: float,
) -> float:
    """Metropolis-Hastings ratio exp(-omega dL) * prior ratio (symmetric walk)."""
    log_alpha = (
        -omega * (loss_prop - loss_curr) + log_prior(theta_prop) - log_prior(theta)
    )
    if not np.isfinite(log_alpha):
        return 0.0 if log_alpha < 0 or np.isnan(log_alpha) else np.inf
    return float(np.exp(min(log_alpha, 700.0)))


def bpmcmc_run(
    model,
    cfg: BlockPmcmcConfig,
    rng: Optional[np.random.Generator] = None,
) -> PmcmcResult:
    """Run the block pseudo-marginal chain against a model adapter.

    The model must expose ``draw_noise(rng, m)``, ``fresh_noise(rng, shape)``,
    ``loss_from_noise(theta, noise)`` and ``log_prior(theta)``.  The cached
    loss is re-derived from scratch every ``audit_every`` iterations and
    compared against the running value.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    theta = np.array(cfg.theta0, dtype=float)
    d = len(theta)
    chol = np.linalg.cholesky(cfg.proposal_cov)
    noise = model.draw_noise(rng, cfg.m)
    state = ChainState(
        theta=theta,
        noise=noise,
        loss=model.loss_from_noise(theta, noise),
        log_prior=model.log_prior(theta),
    )
    sim_calls = model.initial_draws(cfg.m)

    draws = np.empty((cfg.iterations, d))
    accepted = np.zeros(cfg.iterations, dtype=bool)
    audit_failures = 0
    rejected_nonfinite = 0

    for s in range(cfg.iterations):
        prop_noise, _, n_fresh = block_update(state.noise, cfg.blocking, rng, model.fresh_noise)
        sim_calls += n_fresh
        prop_theta = state.theta + chol @ rng.standard_normal(d)
        prop_loss = model.loss_from_noise(prop_theta, prop_noise)
        alpha = mh_accept_prob(
            state.theta, prop_theta, state.loss, prop_loss, model.log_prior, cfg.omega
        )
        if not np.isfinite(prop_loss):
            rejected_nonfinite += 1
            alpha = 0.0
        if rng.uniform() < alpha:
            state.theta = prop_theta
            state.noise = prop_noise
            state.loss = prop_loss
            state.log_prior = model.log_prior(prop_theta)
            state.accepted += 1
            accepted[s] = True
        draws[s] = state.theta
        if cfg.audit_every and (s + 1) % cfg.audit_every == 0:
            recomputed = model.loss_from_noise(state.theta, state.noise)
            if not np.isclose(recomputed, state.loss, rtol=1e-9, atol=1e-12):
                audit_failures += 1

    acceptance = state.accepted / cfg.iterations
    diagnostics = {
        "acceptance_rate": acceptance,
        "simulator_calls": sim_calls,
        "audit_failures": audit_failures,
        "rejected_nonfinite": rejected_nonfinite,
    }
    if cfg.iterations >= 10_000 and state.accepted == 0:
        diagnostics["zero_acceptance"] = True
        warnings.warn("chain accepted nothing over >= 10^4 iterations", RuntimeWarning)
    return PmcmcResult(draws=draws, accepted=accepted, state=state, diagnostics=diagnostics)
