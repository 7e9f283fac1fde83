"""Shared data types: zig-zag skeletons, targets, envelopes, datasets.

A zig-zag trajectory is stored through its skeleton: event times, positions
and velocities at those times, with linear motion in between.  Moments of
the continuous-time path are therefore available in closed form per segment,
which is what :func:`trajectory_time_average` exploits.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

EVENT_KINDS = ("initial", "flip", "refresh", "rejected-proposal")


@dataclass(frozen=True)
class SkeletonPoint:
    """One stored event of a zig-zag trajectory."""

    index: int
    time: float
    position: np.ndarray
    velocity: np.ndarray
    event_kind: str

    def __post_init__(self):
        if self.event_kind not in EVENT_KINDS:
            raise ValueError(f"unknown event kind {self.event_kind!r}")


@dataclass
class TrajectoryDiagnostics:
    """Event-loop counters; simulator_calls follows the b-per-proposal contract."""

    proposals: int = 0
    flips: int = 0
    refreshes: int = 0
    bound_violations: int = 0
    simulator_calls: int = 0


@dataclass
class Trajectory:
    """Skeleton of a zig-zag run over process time ``[0, total_time]``.

    ``times`` has shape (K,), ``positions`` (K, d), ``velocities`` (K, d) in
    {-1, +1}, ``event_kinds`` length K.  The path continues past the last
    stored point with the last velocity until ``total_time``.
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    event_kinds: list
    total_time: float
    diagnostics: TrajectoryDiagnostics = field(default_factory=TrajectoryDiagnostics)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]

    def points(self):
        """Iterate stored events as :class:`SkeletonPoint` objects."""
        for k in range(len(self.times)):
            yield SkeletonPoint(
                index=k,
                time=float(self.times[k]),
                position=self.positions[k],
                velocity=self.velocities[k],
                event_kind=self.event_kinds[k],
            )

    def position_at(self, t: float) -> np.ndarray:
        """Position of the continuous path at process time ``t``."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = max(k, 0)
        return self.positions[k] + self.velocities[k] * (t - self.times[k])


@dataclass
class GibbsTarget:
    """Everything needed to evaluate estimated switching rates.

    Parameters
    ----------
    dim : int
        Parameter dimension d.
    omega : float
        Positive weight multiplying the loss inside the Gibbs measure.
    prior_log_density_gradient : callable
        theta -> (d,) gradient of the log prior density.
    loss_gradient_estimator : callable
        (theta, sims) -> (d,) unbiased estimate of the loss gradient, where
        ``sims`` is the stacked output of ``b`` simulator calls.
    simulator : callable
        (theta, rng) -> one pseudo-observation set.  The return value is
        opaque to the sampler; only the estimator consumes it.
    b : int
        Number of fresh simulator calls per proposed switch.
    simulate_batch : callable, optional
        (theta, b, rng) -> stacked sims with leading axis b.  Defaults to
        stacking ``b`` simulator calls; models override it for speed.
    loss_gradient_batch : callable, optional
        (theta, sims, indices) -> (d,) mini-batch estimator over the given
        observation indices; required by the sub-sampling sampler.
    subsample_gradient : callable, optional
        (theta, b, indices, rng) -> (d,) mini-batch estimate that draws its
        own b simulator sets restricted to the batch; faster than simulating
        a full set when the loss only touches the chosen rows.
    n_obs : int, optional
        Number of observations the loss averages over (sub-sampling only).
    min_b : int
        Smallest admissible b (2 for the pair-based kernel estimator).
    """

    dim: int
    omega: float
    prior_log_density_gradient: Callable[[np.ndarray], np.ndarray]
    loss_gradient_estimator: Callable[[np.ndarray, object], np.ndarray]
    simulator: Callable[[np.ndarray, np.random.Generator], object]
    b: int
    simulate_batch: Optional[Callable[[np.ndarray, int, np.random.Generator], object]] = None
    loss_gradient_batch: Optional[Callable[[np.ndarray, object, np.ndarray], np.ndarray]] = None
    subsample_gradient: Optional[
        Callable[[np.ndarray, int, np.ndarray, np.random.Generator], np.ndarray]
    ] = None
    n_obs: Optional[int] = None
    min_b: int = 1

    def __post_init__(self):
        if self.omega < 0:
            raise ValueError("omega must be nonnegative")
        if self.b < self.min_b:
            raise ValueError(f"b={self.b} below the minimum {self.min_b} for this target")
        if self.simulate_batch is None:
            sim = self.simulator
            self.simulate_batch = lambda theta, b, rng: np.stack(
                [np.asarray(sim(theta, rng)) for _ in range(b)]
            )

    def rate_gradient(self, theta: np.ndarray, sims) -> np.ndarray:
        """Estimated potential gradient: -grad log prior + omega * phi."""
        return -self.prior_log_density_gradient(theta) + self.omega * self.loss_gradient_estimator(
            theta, sims
        )


@dataclass(frozen=True)
class RateEnvelope:
    """Per-dimension affine bound a_j + s_j * t on the switching rate.

    Valid for t in [0, horizon]; the integrated rate a*t + s*t^2/2 is
    inverted in closed form when sampling arrival times.
    """

    intercepts: np.ndarray
    slopes: np.ndarray
    horizon: float

    def __post_init__(self):
        a = np.asarray(self.intercepts, dtype=float)
        s = np.asarray(self.slopes, dtype=float)
        if a.shape != s.shape:
            raise ValueError("intercepts and slopes must have equal shapes")
        if np.any(a < 0) or np.any(s < 0):
            raise ValueError("invalid envelope")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        object.__setattr__(self, "intercepts", a)
        object.__setattr__(self, "slopes", s)

    def value(self, j: int, t: float) -> float:
        return float(self.intercepts[j] + self.slopes[j] * t)


@dataclass(frozen=True)
class Dataset:
    """Observed data for one model: responses plus covariates where applicable."""

    responses: np.ndarray
    covariates: Optional[np.ndarray] = None

    def __post_init__(self):
        y = np.asarray(self.responses)
        object.__setattr__(self, "responses", y)
        if len(y) < 1:
            raise ValueError("need at least one observation")
        if self.covariates is not None:
            X = np.asarray(self.covariates, dtype=float)
            if X.ndim != 2 or X.shape[0] != len(y):
                raise ValueError("covariate rows must match the number of responses")
            object.__setattr__(self, "covariates", X)

    @property
    def n(self) -> int:
        return len(self.responses)


# ---------------------------------------------------------------------------
# Exact moments and discretization of piecewise-linear paths
# ---------------------------------------------------------------------------


def _segments(traj: Trajectory):
    """Yield (t0, h, theta0, v) for every linear segment, tail included."""
    times = traj.times
    k_last = len(times) - 1
    for k in range(k_last):
        h = times[k + 1] - times[k]
        if h > 0:
            yield times[k], h, traj.positions[k], traj.velocities[k]
    tail = traj.total_time - times[k_last]
    if tail > 0:
        yield times[k_last], tail, traj.positions[k_last], traj.velocities[k_last]


def trajectory_time_average(
    traj: Trajectory, dim: int, power: int = 1, burnin_fraction: float = 0.0
) -> float:
    """Exact time average of theta_j(t)^power over [t0, T], t0 = fraction * T.

    power=1 integrates each linear segment as a trapezoid, power=2 uses the
    cubic antiderivative, so no discretization error enters.
    """
    if power not in (1, 2):
        raise ValueError("power must be 1 or 2")
    if not 0.0 <= burnin_fraction < 1.0:
        raise ValueError("burnin_fraction must lie in [0, 1)")
    if len(traj.times) < 1 or traj.total_time <= 0:
        raise ValueError("insufficient skeleton")
    t0 = burnin_fraction * traj.total_time
    span = traj.total_time - t0
    if span <= 0:
        raise ValueError("burn-in exhausts the trajectory")
    total = 0.0
    for ts, h, pos, vel in _segments(traj):
        lo = max(ts, t0)
        hi = ts + h
        if hi <= lo:
            continue
        a = pos[dim] + vel[dim] * (lo - ts)  # value at the clipped start
        v = vel[dim]
        u = hi - lo
        if power == 1:
            total += a * u + 0.5 * v * u * u
        else:
            total += a * a * u + a * v * u * u + v * v * u**3 / 3.0
    return total / span


def trajectory_discretize(
    traj: Trajectory, dt: float, burnin_fraction: float = 0.0
) -> np.ndarray:
    """Sample theta(t0 + i*dt) for i = 0, 1, ... while t0 + i*dt <= T.

    Returns an (n_samples, d) array obtained by linear interpolation between
    bracketing skeleton points.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if not 0.0 <= burnin_fraction < 1.0:
        raise ValueError("burnin_fraction must lie in [0, 1)")
    t0 = burnin_fraction * traj.total_time
    grid = np.arange(t0, traj.total_time + 1e-12 * max(1.0, traj.total_time), dt)
    grid = grid[grid <= traj.total_time]
    # Append the path endpoint so plain linear interpolation covers the tail
    # segment past the final stored event.
    k_last = len(traj.times) - 1
    end_pos = traj.positions[k_last] + traj.velocities[k_last] * (
        traj.total_time - traj.times[k_last]
    )
    knots_t = np.append(traj.times, traj.total_time)
    out = np.empty((len(grid), traj.dim))
    for j in range(traj.dim):
        knots_x = np.append(traj.positions[:, j], end_pos[j])
        out[:, j] = np.interp(grid, knots_t, knots_x)
    return out


@dataclass
class ValidationReport:
    violations: list

    @property
    def count(self) -> int:
        return len(self.violations)

    @property
    def ok(self) -> bool:
        return not self.violations


def validate_trajectory(traj: Trajectory, atol: float = 1e-9) -> ValidationReport:
    """Check every skeleton invariant; returns an itemized report."""
    bad = []
    times, pos, vel = traj.times, traj.positions, traj.velocities
    k_count = len(times)
    if k_count == 0:
        return ValidationReport(["empty skeleton"])
    if times[0] != 0.0:
        bad.append(f"first event at t={times[0]!r}, expected 0")
    if np.any(np.diff(times) < 0):
        bad.append("event times decrease")
    if times[-1] > traj.total_time + atol:
        bad.append("last event beyond total_time")
    if not np.all(np.isin(vel, (-1.0, 1.0))):
        bad.append("velocity component outside {-1, +1}")
    for k in range(k_count - 1):
        h = times[k + 1] - times[k]
        drift = pos[k] + vel[k] * h
        if not np.allclose(drift, pos[k + 1], atol=atol, rtol=0.0):
            bad.append(f"nonlinear displacement between events {k} and {k + 1}")
        changed = int(np.sum(vel[k + 1] != vel[k]))
        kind = traj.event_kinds[k + 1]
        if kind == "flip" and changed != 1:
            bad.append(f"flip event {k + 1} changed {changed} velocity components")
        if kind in ("refresh", "rejected-proposal") and changed != 0:
            bad.append(f"{kind} event {k + 1} changed the velocity")
    return ValidationReport(bad)


def trajectory_batch_means(
    traj: Trajectory,
    dim: int,
    n_batches: int = 25,
    burnin_fraction: float = 0.1,
    transform: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    dt: Optional[float] = None,
) -> tuple[float, float]:
    """(mean, standard error) of a path functional by time-batch means.

    With no transform the per-batch means are exact segment integrals; with a
    transform the path is discretized at ``dt`` first (default: span/2**14).
    """
    t0 = burnin_fraction * traj.total_time
    span = traj.total_time - t0
    if transform is None and dt is None:
        edges = np.linspace(t0, traj.total_time, n_batches + 1)
        means = np.empty(n_batches)
        for i in range(n_batches):
            means[i] = _window_average(traj, dim, edges[i], edges[i + 1])
    else:
        if dt is None:
            dt = span / 2**14
        samples = trajectory_discretize(traj, dt, burnin_fraction)[:, dim]
        if transform is not None:
            samples = transform(samples)
        usable = (len(samples) // n_batches) * n_batches
        means = samples[:usable].reshape(n_batches, -1).mean(axis=1)
    mean = float(np.mean(means))
    se = float(np.std(means, ddof=1) / np.sqrt(n_batches))
    return mean, se


def _window_average(traj: Trajectory, dim: int, lo: float, hi: float) -> float:
    total = 0.0
    for ts, h, pos, vel in _segments(traj):
        a_t = max(ts, lo)
        b_t = min(ts + h, hi)
        if b_t <= a_t:
            continue
        a = pos[dim] + vel[dim] * (a_t - ts)
        u = b_t - a_t
        total += a * u + 0.5 * vel[dim] * u * u
    return total / (hi - lo)


# ---------------------------------------------------------------------------
# Skeleton serialization
# ---------------------------------------------------------------------------


def write_skeleton_csv(traj: Trajectory, path) -> None:
    """Write the skeleton as CSV: k,t,event,theta_1..theta_d,nu_1..nu_d."""
    d = traj.dim
    header = ["k", "t", "event"]
    header += [f"theta_{j + 1}" for j in range(d)]
    header += [f"nu_{j + 1}" for j in range(d)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(traj.times)):
            row = [k, format(traj.times[k], ".17g"), traj.event_kinds[k]]
            row += [format(x, ".17g") for x in traj.positions[k]]
            row += [format(x, ".17g") for x in traj.velocities[k]]
            writer.writerow(row)


def read_skeleton_csv(path, total_time: Optional[float] = None) -> Trajectory:
    """Load a skeleton CSV written by :func:`write_skeleton_csv`."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        d = sum(1 for name in header if name.startswith("theta_"))
        times, positions, velocities, kinds = [], [], [], []
        for row in reader:
            times.append(float(row[1]))
            kinds.append(row[2])
            positions.append([float(x) for x in row[3 : 3 + d]])
            velocities.append([float(x) for x in row[3 + d : 3 + 2 * d]])
    times = np.asarray(times)
    return Trajectory(
        times=times,
        positions=np.asarray(positions),
        velocities=np.asarray(velocities),
        event_kinds=kinds,
        total_time=float(times[-1]) if total_time is None else total_time,
    )
