"""Block pseudo-marginal chain: block moves, acceptance ratio, exactness."""

import hashlib

import numpy as np
import pytest

from zzgibbs import BlockPmcmcConfig, block_update, bpmcmc_run, mh_accept_prob
from zzgibbs.harness import gen_copula_data, gen_regression_data
from zzgibbs import GaussianCopulaModel, GaussianRegressionModel


def uniform_noise(rng, shape):
    return rng.random(shape)


class TestBlockUpdate:
    def test_per_observation_block_replaces_one_column(self):
        rng = np.random.default_rng(0)
        u = rng.random((6, 9, 2))
        new, j, n_fresh = block_update(u, "per-observation-block", np.random.default_rng(1), uniform_noise)
        assert n_fresh == 6
        assert not np.array_equal(new[:, j], u[:, j])
        mask = np.ones(9, dtype=bool)
        mask[j] = False
        np.testing.assert_array_equal(new[:, mask], u[:, mask])

    def test_untouched_blocks_hash_identical(self):
        rng = np.random.default_rng(2)
        u = rng.random((5, 7))
        new, j, _ = block_update(u, "per-observation-block", np.random.default_rng(3), uniform_noise)
        for col in range(7):
            if col == j:
                continue
            assert (
                hashlib.sha256(new[:, col].tobytes()).hexdigest()
                == hashlib.sha256(u[:, col].tobytes()).hexdigest()
            )

    def test_single_observation_degenerates_to_full_refresh(self):
        # J = 1: the chosen observation block is the whole noise state
        rng = np.random.default_rng(4)
        u = rng.random((5, 1))
        new, j, n_fresh = block_update(u, "per-observation-block", np.random.default_rng(5), uniform_noise)
        assert j == 0 and n_fresh == 5
        assert not np.array_equal(new, u)

    def test_per_draw_block_changes_two_numbers(self):
        # copula layout: one draw is a 2-vector, so exactly 2 numbers change
        rng = np.random.default_rng(6)
        u = rng.random((8, 2))
        new, a, n_fresh = block_update(u, "per-draw-block", np.random.default_rng(7), uniform_noise)
        assert n_fresh == 1
        assert int((new != u).sum()) == 2
        assert not np.array_equal(new[a], u[a])

    def test_unknown_strategy(self):
        with pytest.raises(ValueError, match="strategy"):
            block_update(np.zeros((2, 2)), "whole-state", np.random.default_rng(0), uniform_noise)


class TestAcceptProb:
    def test_identical_state_is_unit(self):
        log_prior = lambda th: -0.5 * float(th @ th)
        theta = np.array([0.3])
        assert mh_accept_prob(theta, theta, 1.7, 1.7, log_prior, 2.0) == pytest.approx(1.0)

    def test_zero_weight_uses_prior_only(self):
        log_prior = lambda th: -0.5 * float(th @ th)
        a = np.array([0.0])
        b = np.array([1.0])
        got = mh_accept_prob(a, b, 5.0, -3.0, log_prior, 0.0)
        assert got == pytest.approx(np.exp(-0.5))

    def test_hand_computed_ratio(self):
        # loss difference 0.3 at omega 2, equal priors: exp(-0.6)
        log_prior = lambda th: 0.0
        got = mh_accept_prob(np.zeros(1), np.ones(1), 1.0, 1.3, log_prior, 2.0)
        assert got == pytest.approx(0.5488116360940264, rel=1e-12)

    def test_nonfinite_loss_rejects(self):
        log_prior = lambda th: 0.0
        assert mh_accept_prob(np.zeros(1), np.ones(1), 0.0, np.nan, log_prior, 1.0) == 0.0


class ExactGaussianModel:
    """Tractable 1-D target: loss = theta^2/2 with no estimation noise.

    With a flat prior the chain is plain Metropolis on N(0, 1/omega).
    """

    dim = 1

    def draw_noise(self, rng, m):
        return rng.random((m, 1))

    @staticmethod
    def fresh_noise(rng, shape):
        return rng.random(shape)

    @staticmethod
    def initial_draws(m):
        return m

    def loss_from_noise(self, theta, noise):
        return 0.5 * float(theta[0] ** 2)

    @staticmethod
    def log_prior(theta):
        return 0.0


class TestChainExactness:
    def test_detailed_balance_smoke(self):
        # omega = 4: target N(0, 1/4); moments within 3 batch SEs
        cfg = BlockPmcmcConfig(
            m=2,
            iterations=100000,
            omega=4.0,
            proposal_cov=np.array([[0.5**2]]),
            theta0=np.zeros(1),
            seed=3,
            blocking="per-observation-block",
        )
        res = bpmcmc_run(ExactGaussianModel(), cfg)
        draws = res.draws[10000:, 0]
        n_batch = 30
        usable = (len(draws) // n_batch) * n_batch
        means = draws[:usable].reshape(n_batch, -1).mean(axis=1)
        se = means.std(ddof=1) / np.sqrt(n_batch)
        assert abs(draws.mean()) < 3.0 * se
        second = draws**2
        means2 = second[:usable].reshape(n_batch, -1).mean(axis=1)
        se2 = means2.std(ddof=1) / np.sqrt(n_batch)
        assert abs(second.mean() - 0.25) < 3.0 * se2
        assert res.diagnostics["audit_failures"] == 0

    def test_bit_reproducible(self):
        model = GaussianCopulaModel(gen_copula_data(30, 0.5, 8))
        cfg = BlockPmcmcConfig(
            m=10,
            iterations=400,
            omega=30.0,
            proposal_cov=np.array([[0.25]]),
            theta0=np.array([1.0]),
            seed=5,
            blocking="per-draw-block",
        )
        a = bpmcmc_run(model, cfg)
        b = bpmcmc_run(model, cfg)
        np.testing.assert_array_equal(a.draws, b.draws)
        np.testing.assert_array_equal(a.accepted, b.accepted)

    def test_degenerate_proposal_accepts_everything(self):
        model = GaussianCopulaModel(gen_copula_data(30, 0.5, 8))
        cfg = BlockPmcmcConfig(
            m=5,
            iterations=2000,
            omega=0.0,
            proposal_cov=np.array([[1e-12]]),
            theta0=np.array([0.7]),
            seed=6,
            blocking="per-draw-block",
        )
        res = bpmcmc_run(model, cfg)
        assert res.diagnostics["acceptance_rate"] > 0.999
        assert np.all(np.abs(res.draws[:, 0] - 0.7) < 1e-4)

    def test_cached_loss_audits_pass(self):
        model = GaussianRegressionModel(gen_regression_data(20, 9))
        cfg = BlockPmcmcConfig(
            m=4,
            iterations=3000,
            omega=20.0,
            proposal_cov=np.eye(model.dim) * 1e-3,
            theta0=np.append(np.zeros(model.p), 0.0),
            seed=7,
            blocking="per-observation-block",
            audit_every=500,
        )
        res = bpmcmc_run(model, cfg)
        assert res.diagnostics["audit_failures"] == 0
        recomputed = model.loss_from_noise(res.state.theta, res.state.noise)
        assert recomputed == pytest.approx(res.state.loss, rel=1e-12)

    def test_simulator_call_accounting(self):
        model = GaussianCopulaModel(gen_copula_data(30, 0.5, 8))
        cfg = BlockPmcmcConfig(
            m=12,
            iterations=250,
            omega=10.0,
            proposal_cov=np.array([[0.04]]),
            theta0=np.array([1.0]),
            seed=8,
            blocking="per-draw-block",
        )
        res = bpmcmc_run(model, cfg)
        assert res.diagnostics["simulator_calls"] == 12 + 250  # init m pairs + 1 per refresh

    def test_config_validation(self):
        with pytest.raises(ValueError, match="symmetric"):
            BlockPmcmcConfig(
                m=2,
                iterations=10,
                omega=1.0,
                proposal_cov=np.array([[1.0, 0.5], [0.0, 1.0]]),
                theta0=np.zeros(2),
            )
        with pytest.raises(ValueError, match="blocking"):
            BlockPmcmcConfig(
                m=2, iterations=10, omega=1.0, proposal_cov=np.eye(1), theta0=np.zeros(1),
                blocking="diagonal",
            )
