"""Experiment harness: data generation, orchestrated runs, metrics, file IO.

Reproduces the comparative studies at configurable scale: a long zig-zag
gold run per experiment, zig-zag sweeps over the per-proposal simulation
count b, block pseudo-marginal sweeps over the per-iteration simulation
count m, accuracy-versus-simulation-effort records against the gold
moments, and a manifest that lets any run be reproduced bit-exactly.

Simulation effort is reported in single-response units so both sampler
families share an x-axis: a zig-zag proposal costs b sets of n responses
for the regression models and b pairs for the copula; a pseudo-marginal
block refresh costs m responses (regression families) or one pair (copula).
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .core import (
    Dataset,
    Trajectory,
    trajectory_discretize,
    trajectory_time_average,
    write_skeleton_csv,
)
from .models import GaussianCopulaModel, GaussianRegressionModel, PoissonRegressionModel
from .pmcmc import BlockPmcmcConfig, PmcmcResult, bpmcmc_run
from .zigzag import ZigZagConfig, zigzag_run, zigzag_run_subsampled


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


# ---------------------------------------------------------------------------
# Data generation
# ---------------------------------------------------------------------------

REGRESSION_COEF = np.array([4.0, 4.0, 3.0, 3.0, 2.0, 2.0, 1.0, 1.0])
POISSON_THETA = np.array([1.0, 0.5, 1.5, 0.0, 0.0])


def gen_copula_data(n: int, rho: float, seed: int) -> Dataset:
    """n uniform-scale pairs with Gaussian-copula dependence at correlation rho."""
    if not abs(rho) < 1:
        raise ConfigError("|rho| must be below 1")
    from scipy.special import ndtr

    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 2))
    z2 = rho * v[:, 0] + np.sqrt(1.0 - rho * rho) * v[:, 1]
    return Dataset(responses=np.column_stack([ndtr(v[:, 0]), ndtr(z2)]))


def gen_regression_data(n: int, seed: int) -> Dataset:
    """Intercept plus seven standard-normal covariates; double-exponential noise."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.standard_normal((n, 7))])
    y = X @ REGRESSION_COEF + rng.laplace(0.0, 1.0, size=n)
    return Dataset(responses=y, covariates=X)


def gen_poisson_data(n: int, seed: int) -> Dataset:
    """Intercept plus four N(0, 0.25^2) covariates; counts at rate exp(x^T theta)."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(0.0, 0.25, size=(n, 4))])
    y = rng.poisson(np.exp(X @ POISSON_THETA))
    return Dataset(responses=y, covariates=X)


def true_theta(model_name: str, rho: float = 0.5) -> np.ndarray:
    if model_name == "copula":
        return np.array([2.0 * np.arctanh(rho)])
    if model_name == "regression":
        return np.append(REGRESSION_COEF, 0.0)
    if model_name == "poisson":
        return POISSON_THETA.copy()
    raise ConfigError(f"unknown model {model_name!r}")


def build_dataset(model_name: str, n: int, data_seed: int, rho: float = 0.5) -> Dataset:
    if model_name == "copula":
        return gen_copula_data(n, rho, data_seed)
    if model_name == "regression":
        return gen_regression_data(n, data_seed)
    if model_name == "poisson":
        return gen_poisson_data(n, data_seed)
    raise ConfigError(f"unknown model {model_name!r}")


def build_model(model_name: str, dataset: Dataset, beta: float = 0.5, lengthscale: float = 1.0):
    if model_name == "copula":
        return GaussianCopulaModel(dataset, lengthscale=lengthscale)
    if model_name == "regression":
        return GaussianRegressionModel(dataset, lengthscale=lengthscale)
    if model_name == "poisson":
        return PoissonRegressionModel(dataset, beta=beta)
    raise ConfigError(f"unknown model {model_name!r}")


MODEL_LOSS = {"copula": "mmd", "regression": "mmd", "poisson": "beta"}
MODEL_BLOCKING = {
    "copula": "per-draw-block",
    "regression": "per-observation-block",
    "poisson": "per-observation-block",
}


def responses_per_set(model_name: str, n: int) -> int:
    """Single-response draws per simulator set (the common effort unit)."""
    return 1 if model_name == "copula" else n


# ---------------------------------------------------------------------------
# Accuracy metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GoldMoments:
    mean: np.ndarray
    sd: np.ndarray


def gold_moments(gold: Trajectory, burnin_fraction: float = 0.1) -> GoldMoments:
    d = gold.dim
    mean = np.array([trajectory_time_average(gold, j, 1, burnin_fraction) for j in range(d)])
    second = np.array([trajectory_time_average(gold, j, 2, burnin_fraction) for j in range(d)])
    var = np.maximum(second - mean**2, 0.0)
    return GoldMoments(mean=mean, sd=np.sqrt(var))


def _proposal_times(traj: Trajectory) -> np.ndarray:
    kinds = np.asarray(traj.event_kinds)
    mask = (kinds == "flip") | (kinds == "rejected-proposal")
    return traj.times[mask]


def accuracy_metrics(
    run,
    gold: Trajectory,
    *,
    n_prefixes: int = 24,
    burnin_fraction: float = 0.1,
    response_units: int = 1,
    b: Optional[int] = None,
    initial_sims: int = 0,
    sims_per_iteration: int = 0,
) -> list[dict]:
    """Per-prefix moment errors against the gold moments.

    ``run`` is either a Trajectory (pass its per-proposal cost ``b``) or a
    PmcmcResult (pass the initial and per-iteration simulation costs).  Each
    record holds the cumulative single-response simulation count, the
    dimension (1-based), and absolute mean / standard deviation errors.
    """
    ref = gold_moments(gold, burnin_fraction)
    records: list[dict] = []
    if isinstance(run, Trajectory):
        if b is None:
            raise ValueError("trajectory input needs its per-proposal cost b")
        if len(run.times) < 2:
            raise ValueError("empty run")
        prop_times = _proposal_times(run)
        t_grid = np.geomspace(run.total_time / n_prefixes, run.total_time, n_prefixes)
        for t in t_grid:
            n_props = int(np.searchsorted(prop_times, t, side="right"))
            sims = n_props * b * response_units
            for j in range(run.dim):
                sub_mean = _prefix_average(run, j, 1, t, burnin_fraction)
                sub_second = _prefix_average(run, j, 2, t, burnin_fraction)
                sd = np.sqrt(max(sub_second - sub_mean**2, 0.0))
                records.append(
                    {
                        "sim_calls": sims,
                        "dim": j + 1,
                        "mean_err": abs(sub_mean - ref.mean[j]),
                        "sd_err": abs(sd - ref.sd[j]),
                    }
                )
        return records
    if isinstance(run, PmcmcResult):
        draws = run.draws
        if len(draws) == 0:
            raise ValueError("empty run")
        s_grid = np.unique(np.geomspace(max(len(draws) // n_prefixes, 2), len(draws), n_prefixes).astype(int))
        for s in s_grid:
            burn = int(burnin_fraction * s)
            chunk = draws[burn:s]
            sims = (initial_sims + s * sims_per_iteration) * 1
            for j in range(draws.shape[1]):
                records.append(
                    {
                        "sim_calls": sims,
                        "dim": j + 1,
                        "mean_err": abs(float(chunk[:, j].mean()) - ref.mean[j]),
                        "sd_err": abs(float(chunk[:, j].std(ddof=0)) - ref.sd[j]),
                    }
                )
        return records
    raise TypeError("run must be a Trajectory or a PmcmcResult")


def _prefix_average(traj: Trajectory, dim: int, power: int, t_end: float, burnin_fraction: float):
    clipped = _clip_trajectory(traj, t_end)
    return trajectory_time_average(clipped, dim, power, burnin_fraction)


def _clip_trajectory(traj: Trajectory, t_end: float) -> Trajectory:
    k = int(np.searchsorted(traj.times, t_end, side="right"))
    return Trajectory(
        times=traj.times[:k],
        positions=traj.positions[:k],
        velocities=traj.velocities[:k],
        event_kinds=traj.event_kinds[:k],
        total_time=t_end,
    )


def chain_batch_means(values: np.ndarray, n_batches: int = 25) -> tuple[float, float]:
    """(mean, standard error) of a chain functional by batch means."""
    usable = (len(values) // n_batches) * n_batches
    means = np.asarray(values[:usable]).reshape(n_batches, -1).mean(axis=1)
    return float(means.mean()), float(means.std(ddof=1) / np.sqrt(n_batches))


# ---------------------------------------------------------------------------
# Jensen-gap diagnostic
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class JensenGapResult:
    estimate: float
    se: float
    bound: float
    m: int
    replications: int


def jensen_gap_bound(m: int) -> float:
    """Uniform bound 1.6 e / (4 m) on the prior-weighted exponential-loss gap."""
    return 1.6 * np.e / (4.0 * m)


def jensen_gap_estimate(
    theta: np.ndarray,
    m: int,
    replications: int,
    model: PoissonRegressionModel,
    rng: Optional[np.random.Generator] = None,
    apply_prior: bool = False,
    prior_sd: float = 0.25,
) -> JensenGapResult:
    """Nested Monte Carlo estimate of the exponential-loss Jensen gap.

    Estimates E exp(sum_i mean_j pmf^beta(u_j; x_i)) minus
    exp(sum_i E pmf^beta), where the inner expectation is summed exactly by
    series truncation; the outer expectation uses ``replications`` fresh
    draws of the m pseudo-counts per observation.  The gap is nonnegative up
    to noise and shrinks at rate 1/m.
    """
    if replications < 2:
        raise ConfigError("need at least two replications")
    theta = np.asarray(theta, dtype=float)
    lam = model.rates(theta)
    exact_inner = model.pmf_power_expectation(theta, 1.0 + model.beta)
    log_b = exact_inner.sum()
    if log_b > 700.0:
        raise OverflowError("exponential-loss overflow; shrink the design")
    if rng is None:
        rng = np.random.default_rng(0)
    outer = np.empty(replications)
    chunk = max(1, int(5e6 // max(m * model.n, 1)))
    for lo in range(0, replications, chunk):
        hi = min(lo + chunk, replications)
        u = rng.poisson(lam, size=(hi - lo, m, model.n))
        w = np.exp(model.beta * model.log_pmf(theta, u))
        z = w.mean(axis=1).sum(axis=1)
        if np.any(z > 700.0):
            raise OverflowError("exponential-loss overflow; shrink the design")
        outer[lo:hi] = np.exp(z)
    estimate = float(outer.mean() - np.exp(log_b))
    se = float(outer.std(ddof=1) / np.sqrt(replications))
    if apply_prior:
        weight = float(np.prod(np.exp(-0.5 * (theta / prior_sd) ** 2) / (prior_sd * np.sqrt(2 * np.pi))))
        estimate *= weight
        se *= weight
    return JensenGapResult(estimate=estimate, se=se, bound=jensen_gap_bound(m), m=m,
                           replications=replications)


# ---------------------------------------------------------------------------
# Density grids
# ---------------------------------------------------------------------------


def density_grid(samples: np.ndarray, center: float, spread: float, n_points: int = 512):
    """Gaussian KDE on a fixed grid spanning center +/- 5 spread.

    Bandwidth by Silverman's rule on the sample at hand; the grid convention
    is fixed so overlays from different runs share their x-axis.
    """
    samples = np.asarray(samples, dtype=float)
    x = np.linspace(center - 5.0 * spread, center + 5.0 * spread, n_points)
    sd = samples.std(ddof=1) if len(samples) > 1 else 0.0
    q75, q25 = np.percentile(samples, [75, 25])
    scale = min(sd, (q75 - q25) / 1.34) if (q75 > q25 and sd > 0) else max(sd, 1e-12)
    bw = max(0.9 * scale * len(samples) ** (-0.2), 1e-12)
    dens = np.exp(-0.5 * ((x[:, None] - samples[None, :]) / bw) ** 2).sum(axis=1)
    dens /= len(samples) * bw * np.sqrt(2.0 * np.pi)
    return x, dens


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) or isinstance(x, np.floating):
        return format(float(x), ".17g")
    return str(x)


# ---------------------------------------------------------------------------
# Experiment orchestration
# ---------------------------------------------------------------------------

EXPERIMENTS = {
    "copula-n100": {
        "model": "copula",
        "n": 100,
        "rho": 0.5,
        "omega": 100.0,
        "total_time": 1500.0,
        "b_sweep": [2, 10, 50],
        "m_sweep": [2, 10, 50],
        "iterations": 20000,
        "horizon": 1.0,
    },
    "copula-n1000": {
        "model": "copula",
        "n": 1000,
        "rho": 0.5,
        "omega": 1000.0,
        "total_time": 300.0,
        "b_sweep": [2, 5, 20, 50],
        "m_sweep": [20, 100, 1000],
        "iterations": 15000,
        "horizon": 1.0,
    },
    "regression-n100": {
        "model": "regression",
        "n": 100,
        "omega": 100.0,
        "total_time": 300.0,
        "b_sweep": [2, 10, 20],
        "m_sweep": [2, 10, 20],
        "iterations": 20000,
        "horizon": 1.0,
    },
    "poisson-n1000": {
        "model": "poisson",
        "n": 1000,
        "beta": 0.5,
        "omega": 1000.0,
        "total_time": 12.0,
        "b_sweep": [2, 5, 20, 50],
        "m_sweep": [2, 5, 10, 20, 50, 100],
        "iterations": 15000,
        "horizon": 0.25,
    },
}

_COMMON_DEFAULTS = {
    "data_seed": 20240817,
    "seed": 7,
    "eta": 1.05,
    "burnin_fraction": 0.1,
    "gold_factor": 20.0,
    "gold_b": 5,
    "beta": 0.5,
    "lengthscale": 1.0,
    "rho": 0.5,
    "strict_thinning": False,
}


def experiment_config(name: str, overrides: Optional[dict] = None, dry_run: bool = False) -> dict:
    if name not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {name!r}; choose from {sorted(EXPERIMENTS)}")
    cfg = dict(_COMMON_DEFAULTS)
    cfg.update(EXPERIMENTS[name])
    cfg["experiment"] = name
    if dry_run:
        cfg["total_time"] = 10.0
        cfg["iterations"] = 100
        cfg["gold_factor"] = 2.0
        if cfg["model"] == "poisson":
            cfg["total_time"] = 1.0
    if overrides:
        unknown = set(overrides) - set(cfg)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg.update(overrides)
    return cfg


def _zigzag_trajectory(model, cfg, b, total_time, seed, theta0, subsample_size=None):
    target = model.make_target(cfg["omega"], b)
    provider = model.envelope_provider(
        cfg["omega"], eta=cfg["eta"], subsample=subsample_size is not None
    )
    zz_cfg = ZigZagConfig(
        total_time=total_time,
        b=b,
        seed=seed,
        horizon=cfg["horizon"],
        eta=cfg["eta"],
        theta0=theta0,
        strict_thinning=cfg["strict_thinning"],
        subsample_size=subsample_size,
    )
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    if subsample_size is not None:
        return zigzag_run_subsampled(target, provider, zz_cfg, rng)
    return zigzag_run(target, provider, zz_cfg, rng)


def _pmcmc_chain(model, cfg, m, iterations, seed, theta0, proposal_cov):
    pm_cfg = BlockPmcmcConfig(
        m=m,
        iterations=iterations,
        omega=cfg["omega"],
        proposal_cov=proposal_cov,
        theta0=theta0,
        seed=seed,
        blocking=MODEL_BLOCKING[cfg["model"]],
    )
    return bpmcmc_run(model, pm_cfg, np.random.default_rng(np.random.SeedSequence(seed)))


def _proposal_cov_from_gold(gold: Trajectory, burnin_fraction: float) -> np.ndarray:
    span = gold.total_time * (1.0 - burnin_fraction)
    samples = trajectory_discretize(gold, span / 4096, burnin_fraction)
    cov = np.atleast_2d(np.cov(samples.T))
    d = cov.shape[0]
    if not np.all(np.isfinite(cov)) or np.linalg.matrix_rank(cov) < d or np.trace(cov) <= 0:
        return np.eye(d) * (2.38**2 / d)
    return cov


def _diag_json(path: Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_density_files(out: Path, samples: np.ndarray, ref: GoldMoments, files: list):
    for j in range(samples.shape[1]):
        x, dens = density_grid(samples[:, j], float(ref.mean[j]), float(ref.sd[j]))
        path = out / f"density_{j + 1}.csv"
        _write_csv(path, ["x", "density"], zip(x, dens))
        files.append(str(path))


def _write_dataset_csv(path: Path, dataset: Dataset) -> None:
    y = np.atleast_2d(np.asarray(dataset.responses, dtype=float).T).T
    cols = [f"y_{i + 1}" for i in range(y.shape[1])]
    blocks = [y]
    if dataset.covariates is not None:
        cols += [f"x_{i + 1}" for i in range(dataset.covariates.shape[1])]
        blocks.append(dataset.covariates)
    _write_csv(path, cols, np.hstack(blocks))


def run_experiment(name: str, out_dir, overrides: Optional[dict] = None, dry_run: bool = False) -> dict:
    """Run one named experiment end to end; returns the manifest dict.

    Emits the dataset, a gold skeleton, per-b skeletons, per-m chains,
    density grids for every run, accuracy records against gold, and a
    manifest echoing the full configuration.
    """
    started = time.time()
    cfg = experiment_config(name, overrides, dry_run)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    sim_totals: dict[str, int] = {}

    dataset = build_dataset(cfg["model"], cfg["n"], cfg["data_seed"], cfg["rho"])
    model = build_model(cfg["model"], dataset, beta=cfg["beta"], lengthscale=cfg["lengthscale"])
    theta0 = true_theta(cfg["model"], cfg["rho"])
    unit = responses_per_set(cfg["model"], cfg["n"])

    data_path = out / "dataset.csv"
    _write_dataset_csv(data_path, dataset)
    files.append(str(data_path))

    seed_root = np.random.SeedSequence(cfg["seed"])
    seeds = [int(s.generate_state(1)[0] % 2**31) for s in seed_root.spawn(2 + len(cfg["b_sweep"]) + len(cfg["m_sweep"]))]

    # Gold run
    gold_dir = out / "gold"
    gold_dir.mkdir(exist_ok=True)
    gold = _zigzag_trajectory(
        model, cfg, cfg["gold_b"], cfg["total_time"] * cfg["gold_factor"], seeds[0], theta0
    )
    write_skeleton_csv(gold, gold_dir / "skeleton.csv")
    files.append(str(gold_dir / "skeleton.csv"))
    _diag_json(gold_dir / "diagnostics.json", vars(gold.diagnostics))
    ref = gold_moments(gold, cfg["burnin_fraction"])
    span = gold.total_time * (1.0 - cfg["burnin_fraction"])
    gold_samples = trajectory_discretize(gold, span / 8192, cfg["burnin_fraction"])
    _write_density_files(gold_dir, gold_samples, ref, files)
    sim_totals["gold"] = gold.diagnostics.simulator_calls * unit
    proposal_cov = _proposal_cov_from_gold(gold, cfg["burnin_fraction"])

    # Zig-zag sweep over b
    for k, b in enumerate(cfg["b_sweep"]):
        cell = out / f"zz_b{b}"
        cell.mkdir(exist_ok=True)
        traj = _zigzag_trajectory(model, cfg, b, cfg["total_time"], seeds[2 + k], theta0)
        write_skeleton_csv(traj, cell / "skeleton.csv")
        _diag_json(cell / "diagnostics.json", vars(traj.diagnostics))
        files.append(str(cell / "skeleton.csv"))
        records = accuracy_metrics(
            traj, gold, burnin_fraction=cfg["burnin_fraction"], response_units=unit, b=b
        )
        _write_csv(
            cell / "accuracy.csv",
            ["sim_calls", "dim", "mean_err", "sd_err"],
            ([r["sim_calls"], r["dim"], r["mean_err"], r["sd_err"]] for r in records),
        )
        files.append(str(cell / "accuracy.csv"))
        zz_span = traj.total_time * (1.0 - cfg["burnin_fraction"])
        samples = trajectory_discretize(traj, zz_span / 8192, cfg["burnin_fraction"])
        _write_density_files(cell, samples, ref, files)
        sim_totals[f"zz_b{b}"] = traj.diagnostics.simulator_calls * unit

    # Block pseudo-marginal sweep over m
    offset = 2 + len(cfg["b_sweep"])
    for k, m in enumerate(cfg["m_sweep"]):
        cell = out / f"pm_m{m}"
        cell.mkdir(exist_ok=True)
        result = _pmcmc_chain(model, cfg, m, cfg["iterations"], seeds[offset + k], theta0, proposal_cov)
        rows = (
            [s, *result.draws[s], int(result.accepted[s])] for s in range(len(result.draws))
        )
        d = result.draws.shape[1]
        _write_csv(
            cell / "draws.csv",
            ["s"] + [f"theta_{j + 1}" for j in range(d)] + ["accepted"],
            rows,
        )
        files.append(str(cell / "draws.csv"))
        _diag_json(cell / "diagnostics.json", result.diagnostics)
        refresh = 1 if MODEL_BLOCKING[cfg["model"]] == "per-draw-block" else m
        records = accuracy_metrics(
            result,
            gold,
            burnin_fraction=cfg["burnin_fraction"],
            initial_sims=model.initial_draws(m),
            sims_per_iteration=refresh,
        )
        _write_csv(
            cell / "accuracy.csv",
            ["sim_calls", "dim", "mean_err", "sd_err"],
            ([r["sim_calls"], r["dim"], r["mean_err"], r["sd_err"]] for r in records),
        )
        files.append(str(cell / "accuracy.csv"))
        burn = int(cfg["burnin_fraction"] * len(result.draws))
        _write_density_files(cell, result.draws[burn:], ref, files)
        sim_totals[f"pm_m{m}"] = result.diagnostics["simulator_calls"]

    manifest = {
        "experiment": name,
        "config": cfg,
        "outputs": sorted(files),
        "simulator_calls": sim_totals,
        "wall_clock_seconds": time.time() - started,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


def rerun_from_manifest(manifest_path, out_dir) -> dict:
    """Replay an experiment from its manifest's config echo.

    With the recorded configuration and seeds the rerun reproduces every CSV
    byte for byte in the new output directory.
    """
    with open(manifest_path) as fh:
        manifest = json.load(fh)
    cfg = dict(manifest["config"])
    name = cfg.pop("experiment")
    return run_experiment(name, out_dir, overrides=cfg)
