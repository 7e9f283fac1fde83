"""Zig-zag event loop with affine envelopes, thinning, and sub-sampling.

Between events the state moves linearly with unit-speed velocities in
{-1, +1}^d.  Candidate switch times come from per-dimension Poisson
processes with affine envelope rates, inverted in closed form; each
candidate is thinned against the estimated rate, which is evaluated on
fresh simulator draws.  Envelopes are certified on a finite horizon only,
so when no candidate lands inside the horizon the state coasts to the
horizon end, a refresh event is recorded, and envelopes are rebuilt.
Refreshes change nothing dynamically, which keeps the invariant law exact.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import GibbsTarget, RateEnvelope, Trajectory, TrajectoryDiagnostics

_RATIO_TOL = 1e-9


class EnvelopeViolationError(RuntimeError):
    """Raised in strict mode when an estimated rate exceeds its envelope."""

    def __init__(self, theta, nu, j, t, ratio):
        self.theta = np.array(theta)
        self.nu = np.array(nu)
        self.j = int(j)
        self.t = float(t)
        self.ratio = float(ratio)
        super().__init__(
            f"envelope violated at (theta={self.theta.tolist()}, nu={self.nu.tolist()}, "
            f"j={self.j}, t={self.t:.6g}): ratio={self.ratio:.6g}"
        )


@dataclass
class ZigZagConfig:
    """Run configuration for the zig-zag sampler.

    total_time is the process-time budget T; horizon the envelope validity
    window; eta the safety factor handed to envelope providers; b the number
    of simulator draws per proposal; subsample_size the optional mini-batch
    size for the sub-sampling variant.
    """

    total_time: float
    b: int
    seed: int = 0
    horizon: float = 1.0
    eta: float = 1.05
    theta0: Optional[np.ndarray] = None
    velocity_policy: str = "ones"  # "ones" | "random"
    strict_thinning: bool = True
    subsample_size: Optional[int] = None

    def __post_init__(self):
        if self.total_time <= 0:
            raise ValueError("total_time must be positive")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.eta < 1.0:
            raise ValueError("safety factor must be >= 1")
        if self.b < 1:
            raise ValueError("b must be a positive integer")
        if self.velocity_policy not in ("ones", "random"):
            raise ValueError("velocity_policy must be 'ones' or 'random'")
        if self.subsample_size is not None and self.subsample_size < 1:
            raise ValueError("subsample size must be >= 1")


def first_arrival_affine(a: float, s: float, rng: np.random.Generator) -> float:
    """First arrival of a Poisson process with rate a + s*t.

    Solves a*tau + s*tau^2/2 = E for E standard exponential: the exponential
    inverse CDF when s = 0, the positive quadratic root otherwise, and an
    infinite sentinel when the rate is identically zero.
    """
    e = float(rng.standard_exponential())
    return float(_arrival_times(np.array([a]), np.array([s]), np.array([e]))[0])


def _arrival_times(a: np.ndarray, s: np.ndarray, e: np.ndarray) -> np.ndarray:
    if np.any(a < 0) or np.any(s < 0):
        raise ValueError("invalid envelope")
    out = np.full(a.shape, np.inf)
    lin = (s == 0) & (a > 0)
    out[lin] = e[lin] / a[lin]
    quad = s > 0
    if np.any(quad):
        aq, sq, eq = a[quad], s[quad], e[quad]
        # 2E/(a + sqrt(a^2 + 2sE)) is the stable form of the positive root.
        out[quad] = 2.0 * eq / (aq + np.sqrt(aq * aq + 2.0 * sq * eq))
    return out


def _init_state(target: GibbsTarget, cfg: ZigZagConfig, rng: np.random.Generator):
    d = target.dim
    theta = np.zeros(d) if cfg.theta0 is None else np.array(cfg.theta0, dtype=float)
    if theta.shape != (d,):
        raise ValueError("theta0 has the wrong dimension")
    if cfg.velocity_policy == "ones":
        nu = np.ones(d)
    else:
        nu = rng.choice([-1.0, 1.0], size=d)
    return theta, nu


def zigzag_run(
    target: GibbsTarget,
    envelope_provider: Callable[[np.ndarray, np.ndarray, float], RateEnvelope],
    cfg: ZigZagConfig,
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Run the zig-zag sampler and return its skeleton.

    At every proposed switch fresh simulator draws are made, the estimated
    rate of the candidate dimension is evaluated at the proposal point, and
    the component flips with probability rate/envelope.  All candidate
    arrival times are redrawn after every event.
    """
    return _run(target, envelope_provider, cfg, rng, subsample=False)


def zigzag_run_subsampled(
    target: GibbsTarget,
    envelope_provider: Callable[[np.ndarray, np.ndarray, float], RateEnvelope],
    cfg: ZigZagConfig,
    rng: Optional[np.random.Generator] = None,
) -> Trajectory:
    """Zig-zag with observation sub-sampling on top of simulator draws.

    The thinning rate is evaluated on a uniformly drawn index batch of size
    cfg.subsample_size; the envelope provider must dominate the rate for
    every batch.  A full-size batch degenerates to the plain sampler and is
    dispatched to it verbatim (same seed, same trajectory).
    """
    if cfg.subsample_size is None:
        raise ValueError("subsample_size must be set for the sub-sampled run")
    if target.n_obs is None or target.loss_gradient_batch is None:
        raise ValueError("target does not expose per-observation gradient terms")
    if cfg.subsample_size > target.n_obs:
        raise ValueError("subsample size exceeds the number of observations")
    if cfg.subsample_size == target.n_obs:
        return _run(target, envelope_provider, cfg, rng, subsample=False)
    return _run(target, envelope_provider, cfg, rng, subsample=True)


def _run(target, envelope_provider, cfg, rng, subsample: bool):
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    if cfg.b < target.min_b:
        raise ValueError(f"b={cfg.b} below the minimum {target.min_b} for this target")
    d = target.dim
    theta, nu = _init_state(target, cfg, rng)
    t = 0.0
    T = cfg.total_time

    times = [0.0]
    positions = [theta.copy()]
    velocities = [nu.copy()]
    kinds = ["initial"]
    diag = TrajectoryDiagnostics()

    def record(kind):
        times.append(t)
        positions.append(theta.copy())
        velocities.append(nu.copy())
        kinds.append(kind)

    while t < T:
        env = envelope_provider(theta, nu, cfg.horizon)
        e = rng.standard_exponential(d)
        taus = _arrival_times(env.intercepts, env.slopes, e)
        j = int(np.argmin(taus))
        tau = taus[j]

        if tau > env.horizon:
            # No certified candidate inside the window: coast to its end.
            step = min(env.horizon, T - t)
            theta = theta + nu * step
            t += step
            if t < T:
                diag.refreshes += 1
                record("refresh")
            continue

        if t + tau > T:
            break

        theta = theta + nu * tau
        t += tau
        diag.proposals += 1
        if subsample:
            idx = rng.choice(target.n_obs, size=cfg.subsample_size, replace=False)
            if target.subsample_gradient is not None:
                phi = target.subsample_gradient(theta, cfg.b, idx, rng)
            else:
                sims = target.simulate_batch(theta, cfg.b, rng)
                phi = target.loss_gradient_batch(theta, sims, idx)
            diag.simulator_calls += cfg.b
            grad_j = -target.prior_log_density_gradient(theta)[j] + target.omega * phi[j]
        else:
            sims = target.simulate_batch(theta, cfg.b, rng)
            diag.simulator_calls += cfg.b
            grad_j = target.rate_gradient(theta, sims)[j]
        rate = max(nu[j] * grad_j, 0.0)
        bound = env.value(j, tau)
        if bound > 0.0:
            ratio = rate / bound
        else:
            ratio = 0.0 if rate == 0.0 else np.inf
        if ratio > 1.0 + _RATIO_TOL:
            diag.bound_violations += 1
            if cfg.strict_thinning:
                raise EnvelopeViolationError(theta, nu, j, t, ratio)
        if rng.uniform() < ratio:
            nu = nu.copy()
            nu[j] = -nu[j]
            diag.flips += 1
            record("flip")
        else:
            record("rejected-proposal")

    return Trajectory(
        times=np.asarray(times),
        positions=np.asarray(positions),
        velocities=np.asarray(velocities),
        event_kinds=kinds,
        total_time=T,
        diagnostics=diag,
    )
