"""Command-line front end: single runs, full experiments, the gap diagnostic.

Exit codes: 0 on success, 1 on configuration errors, 2 when an envelope is
violated in strict mode or an envelope constant overflows.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import harness
from .core import write_skeleton_csv
from .harness import ConfigError
from .models.bounds import EnvelopeOverflowError
from .pmcmc import BlockPmcmcConfig, bpmcmc_run
from .zigzag import EnvelopeViolationError, ZigZagConfig, zigzag_run, zigzag_run_subsampled


def _load_config(path: str) -> dict:
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def _require(cfg: dict, key: str):
    if key not in cfg:
        raise ConfigError(f"missing config key {key!r}")
    return cfg[key]


def _model_from_config(cfg: dict):
    name = _require(cfg, "model")
    if name not in harness.MODEL_LOSS:
        raise ConfigError(f"unknown model {name!r}")
    loss = cfg.get("loss", harness.MODEL_LOSS[name])
    if loss != harness.MODEL_LOSS[name]:
        raise ConfigError(f"model {name!r} uses the {harness.MODEL_LOSS[name]!r} loss, not {loss!r}")
    n = int(_require(cfg, "n"))
    dataset = harness.build_dataset(name, n, int(cfg.get("data_seed", 0)), float(cfg.get("rho", 0.5)))
    model = harness.build_model(
        name, dataset, beta=float(cfg.get("beta", 0.5)), lengthscale=float(cfg.get("lengthscale", 1.0))
    )
    return name, model


def _theta0(cfg: dict, name: str, dim: int) -> np.ndarray:
    raw = cfg.get("theta0", "truth")
    if raw == "truth":
        return harness.true_theta(name, float(cfg.get("rho", 0.5)))
    if raw == "zeros":
        return np.zeros(dim)
    theta = np.asarray(raw, dtype=float)
    if theta.shape != (dim,):
        raise ConfigError(f"theta0 must have length {dim}")
    return theta


def _cmd_zigzag(args) -> int:
    cfg = _load_config(args.config)
    name, model = _model_from_config(cfg)
    omega = float(_require(cfg, "omega"))
    b = int(_require(cfg, "b"))
    subsample = cfg.get("subsample_size")
    try:
        zz_cfg = ZigZagConfig(
            total_time=float(_require(cfg, "T")),
            b=b,
            seed=int(cfg.get("seed", 0)),
            horizon=float(cfg.get("t_h", 1.0)),
            eta=float(cfg.get("eta", 1.05)),
            theta0=_theta0(cfg, name, model.dim),
            velocity_policy=cfg.get("velocity_policy", "ones"),
            strict_thinning=bool(cfg.get("strict_thinning", False)),
            subsample_size=None if subsample is None else int(subsample),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    provider = model.envelope_provider(omega, eta=zz_cfg.eta, subsample=subsample is not None)
    target = model.make_target(omega, b)
    rng = np.random.default_rng(np.random.SeedSequence(zz_cfg.seed))
    if subsample is not None:
        traj = zigzag_run_subsampled(target, provider, zz_cfg, rng)
    else:
        traj = zigzag_run(target, provider, zz_cfg, rng)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_skeleton_csv(traj, out / "skeleton.csv")
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(vars(traj.diagnostics), fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'skeleton.csv'} ({len(traj.times)} events)")
    return 0


def _cmd_pmcmc(args) -> int:
    cfg = _load_config(args.config)
    name, model = _model_from_config(cfg)
    d = model.dim
    if "proposal_cov_csv" in cfg:
        cov = np.loadtxt(cfg["proposal_cov_csv"], delimiter=",", ndmin=2)
    else:
        cov = np.eye(d) * (2.38**2 / d) * float(cfg.get("proposal_scale", 1.0))
    try:
        pm_cfg = BlockPmcmcConfig(
            m=int(_require(cfg, "m")),
            iterations=int(_require(cfg, "S")),
            omega=float(_require(cfg, "omega")),
            proposal_cov=cov,
            theta0=_theta0(cfg, name, d),
            seed=int(cfg.get("seed", 0)),
            blocking=cfg.get("blocking", harness.MODEL_BLOCKING[name]),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    result = bpmcmc_run(model, pm_cfg, np.random.default_rng(np.random.SeedSequence(pm_cfg.seed)))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = ([s, *result.draws[s], int(result.accepted[s])] for s in range(len(result.draws)))
    harness._write_csv(
        out / "draws.csv", ["s"] + [f"theta_{j + 1}" for j in range(d)] + ["accepted"], rows
    )
    with open(out / "diagnostics.json", "w") as fh:
        json.dump(result.diagnostics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(
        f"wrote {out / 'draws.csv'} (acceptance {result.diagnostics['acceptance_rate']:.3f})"
    )
    return 0


def _cmd_experiment(args) -> int:
    manifest = harness.run_experiment(args.name, args.out, dry_run=args.dry_run)
    print(f"experiment {args.name}: {len(manifest['outputs'])} files in {args.out}")
    return 0


def _cmd_jensen_gap(args) -> int:
    rng = np.random.default_rng(args.seed)
    X = np.array([[1.0, 0.0, 0.0, 0.0, 0.0]])
    from .core import Dataset
    from .models import PoissonRegressionModel

    model = PoissonRegressionModel(Dataset(responses=np.zeros(1, dtype=int), covariates=X),
                                   beta=args.beta)
    bound = harness.jensen_gap_bound(args.m)
    print(f"m={args.m}  bound={bound:.6g}")
    for k in range(args.thetas):
        theta = rng.normal(0.0, 0.25, size=5)
        res = harness.jensen_gap_estimate(theta, args.m, args.reps, model, rng)
        flag = "ok" if res.estimate - 4.0 * res.se <= res.bound else "EXCEEDS"
        print(
            f"theta[{k}]  estimate={res.estimate:.6g}  se={res.se:.3g}  "
            f"bound={res.bound:.6g}  {flag}"
        )
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sampler", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_zz = sub.add_parser("zigzag", help="run one zig-zag sampler from a JSON config")
    p_zz.add_argument("--config", required=True)
    p_zz.add_argument("--out", default=".")
    p_zz.set_defaults(func=_cmd_zigzag)

    p_pm = sub.add_parser("pmcmc", help="run one block pseudo-marginal chain from a JSON config")
    p_pm.add_argument("--config", required=True)
    p_pm.add_argument("--out", default=".")
    p_pm.set_defaults(func=_cmd_pmcmc)

    p_exp = sub.add_parser("experiment", help="run a named comparative experiment")
    p_exp.add_argument("name", choices=sorted(harness.EXPERIMENTS))
    p_exp.add_argument("--out", required=True)
    p_exp.add_argument("--dry-run", action="store_true")
    p_exp.set_defaults(func=_cmd_experiment)

    p_jg = sub.add_parser("jensen-gap", help="nested Monte Carlo gap diagnostic")
    p_jg.add_argument("--m", type=int, required=True)
    p_jg.add_argument("--reps", type=int, required=True)
    p_jg.add_argument("--beta", type=float, default=0.5)
    p_jg.add_argument("--seed", type=int, default=0)
    p_jg.add_argument("--thetas", type=int, default=5)
    p_jg.set_defaults(func=_cmd_jensen_gap)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (EnvelopeViolationError, EnvelopeOverflowError) as exc:
        print(f"envelope failure: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
