import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed):
        return np.random.default_rng(seed)

    return make


def make_tent_trajectory():
    """Unit tent path: up from 0 to 1 over [0, 1], back down to 0 at t = 2."""
    from zzgibbs import Trajectory

    return Trajectory(
        times=np.array([0.0, 1.0]),
        positions=np.array([[0.0], [1.0]]),
        velocities=np.array([[1.0], [-1.0]]),
        event_kinds=["initial", "flip"],
        total_time=2.0,
    )


SESSION_TIMINGS: dict = {}


@pytest.fixture(scope="session")
def thinning_ledger():
    """Aggregate dominance audit fed by every strict run in the suite."""
    return {"evals": 0, "violations": 0}


def track_strict_run(ledger, traj):
    from zzgibbs import validate_trajectory

    ledger["evals"] += traj.diagnostics.proposals
    ledger["violations"] += traj.diagnostics.bound_violations
    assert validate_trajectory(traj).count == 0
    return traj


@pytest.fixture(scope="session")
def copula_n1000_model():
    from zzgibbs import GaussianCopulaModel
    from zzgibbs.harness import gen_copula_data

    return GaussianCopulaModel(gen_copula_data(1000, 0.5, 20240817))


@pytest.fixture(scope="session")
def copula_n1000_gold(copula_n1000_model, thinning_ledger):
    import time

    from zzgibbs import ZigZagConfig, zigzag_run
    from zzgibbs.harness import true_theta

    omega = 1000.0
    cfg = ZigZagConfig(
        total_time=3200.0,
        b=5,
        seed=41,
        horizon=1.0,
        theta0=true_theta("copula"),
        strict_thinning=True,
    )
    start = time.time()
    traj = zigzag_run(
        copula_n1000_model.make_target(omega, 5),
        copula_n1000_model.envelope_provider(omega),
        cfg,
    )
    SESSION_TIMINGS["copula_n1000"] = SESSION_TIMINGS.get("copula_n1000", 0.0) + time.time() - start
    return track_strict_run(thinning_ledger, traj)


@pytest.fixture(scope="session")
def copula_chain_rho_means(copula_n1000_model, copula_n1000_gold):
    """Seed-replicated pseudo-marginal correlation means for m in {20, 100, 1000}."""
    import time

    from zzgibbs import trajectory_discretize
    from zzgibbs.harness import true_theta
    from zzgibbs.pmcmc import BlockPmcmcConfig, bpmcmc_run

    start = time.time()
    span = copula_n1000_gold.total_time * 0.9
    cov = np.atleast_2d(np.cov(trajectory_discretize(copula_n1000_gold, span / 4096, 0.1).T))
    seeds = [61, 62, 63, 64, 65]
    means = {}
    for m, iters in [(20, 40_000), (100, 12_000), (1000, 1_500)]:
        vals = []
        for seed in seeds:
            cfg = BlockPmcmcConfig(
                m=m,
                iterations=iters,
                omega=1000.0,
                proposal_cov=cov,
                theta0=true_theta("copula"),
                seed=seed,
                blocking="per-draw-block",
            )
            res = bpmcmc_run(copula_n1000_model, cfg)
            burn = iters // 5
            vals.append(float(np.tanh(0.5 * res.draws[burn:, 0]).mean()))
        means[m] = vals
    SESSION_TIMINGS["copula_n1000"] = SESSION_TIMINGS.get("copula_n1000", 0.0) + time.time() - start
    return means
