"""Loss estimators, gradient estimators, and the kernel itself."""

import numpy as np
import pytest
from scipy.special import gammaln

import oracles
from zzgibbs import (
    Generator,
    RbfKernel,
    beta_grad_phi,
    beta_loss_estimate,
    mmd_grad_phi,
    mmd_loss_biased,
    mmd_loss_unbiased,
    rbf_partial,
)


def poisson_logpmf(rate):
    return lambda v: np.asarray(v) * np.log(rate) - rate - gammaln(np.asarray(v) + 1.0)


def poisson_score(rate):
    return lambda v: (np.asarray(v, dtype=float) - rate)[..., None]


class TestBetaLoss:
    def test_unit_rate_coincident(self):
        # p(0) = e^-1; loss = p^0.5 - 3 p^0.5 = -2 e^-0.5
        got = beta_loss_estimate(poisson_logpmf(1.0), [0], [0], 0.5)
        assert got == pytest.approx(-2.0 * np.exp(-0.5), abs=1e-12)

    def test_beta_one_coincident_algebra(self):
        rng = np.random.default_rng(0)
        for rate in [0.5, 1.7, 4.0]:
            y = rng.poisson(rate, size=1)
            got = beta_loss_estimate(poisson_logpmf(rate), y, y, 1.0)
            p = np.exp(poisson_logpmf(rate)(y[0]))
            assert got == pytest.approx(-p, abs=1e-12)

    def test_unit_rate_distinct_points(self):
        # p(1) = e^-1 = p(0), so the value repeats the coincident case
        got = beta_loss_estimate(poisson_logpmf(1.0), [0], [1], 0.5)
        assert got == pytest.approx(-2.0 * np.exp(-0.5), abs=1e-12)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(1)
        y = rng.poisson(2.0, size=7)
        u = rng.poisson(2.0, size=11)
        base = beta_loss_estimate(poisson_logpmf(2.0), y, u, 0.5)
        for _ in range(5):
            got = beta_loss_estimate(
                poisson_logpmf(2.0), rng.permutation(y), rng.permutation(u), 0.5
            )
            assert got == base

    def test_rejects_nonpositive_beta(self):
        with pytest.raises(ValueError):
            beta_loss_estimate(poisson_logpmf(1.0), [0], [0], 0.0)

    def test_rejects_nonfinite_density(self):
        bad = lambda v: np.full(np.shape(v), np.inf)
        with pytest.raises(ValueError, match="non-finite"):
            beta_loss_estimate(bad, [0], [0], 0.5)


class TestBetaGradient:
    def test_coincident_samples_cancel(self):
        got = beta_grad_phi(poisson_logpmf(1.3), poisson_score(1.3), [2], [2], 0.7)
        np.testing.assert_allclose(got, 0.0, atol=1e-15)

    def test_monte_carlo_mean_matches_series_oracle(self):
        # single-rate model: ideal loss = sum_u p^{1+beta} - (1+1/beta) mean p^beta(y)
        beta = 0.5
        rng = np.random.default_rng(2)
        y = rng.poisson(2.0, size=6)

        def exact_loss(theta):
            rate = np.exp(theta[0])
            first = oracles.poisson_power_series(rate, 1.0 + beta)[0]
            py = np.exp(beta * poisson_logpmf(rate)(y))
            return first - (1.0 + 1.0 / beta) * py.mean()

        theta = np.array([0.4])
        rate = np.exp(theta[0])
        score = lambda v: ((np.asarray(v, dtype=float) - rate) * rate / rate)[..., None]
        # score wrt theta = log rate: d log p / d theta = (v - rate)
        reps = 60000
        u = rng.poisson(rate, size=(reps, 3))
        phis = np.empty(reps)
        for r in range(reps):
            phis[r] = beta_grad_phi(poisson_logpmf(rate), score, y, u[r], beta)[0]
        se = phis.std(ddof=1) / np.sqrt(reps)
        grad = oracles.central_difference(exact_loss, theta)[0]
        assert abs(phis.mean() - grad) < 4.0 * se

    def test_large_beta_vanishes(self):
        rng = np.random.default_rng(3)
        y = rng.poisson(1.0, size=5)
        u = rng.poisson(1.0, size=(4, 5)).ravel()
        got = beta_grad_phi(poisson_logpmf(1.0), poisson_score(1.0), y, u, 50.0)
        assert np.linalg.norm(got) < 1e-8


class TestRbfKernel:
    def test_peak_value(self):
        k = RbfKernel(1.0, dim=1)
        assert k(np.zeros(1), np.zeros(1)) == pytest.approx((2 * np.pi) ** -0.5)

    def test_bounded_by_peak_everywhere(self):
        rng = np.random.default_rng(4)
        for p in (1, 2, 3):
            for gamma in (0.5, 1.0, 2.5):
                k = RbfKernel(gamma, dim=p)
                a = rng.normal(size=(200, p))
                b = rng.normal(size=(200, p))
                assert np.all(k.cross(a, b) <= k.peak + 1e-15)

    def test_cross_matches_direct_broadcast(self):
        rng = np.random.default_rng(5)
        k = RbfKernel(1.3, dim=2)
        a, b = rng.normal(size=(6, 2)), rng.normal(size=(9, 2))
        direct = k(a[:, None, :], b[None, :, :])
        np.testing.assert_allclose(k.cross(a, b), direct, rtol=1e-12)

    def test_partial_zero_at_peak(self):
        k = RbfKernel(1.0, dim=2)
        assert rbf_partial(k, np.ones(2), np.ones(2), 0) == 0.0

    def test_partial_matches_central_difference(self):
        # frozen oracle value: central difference of k at (y, u) = (0, 1), step 1e-6
        k = RbfKernel(1.0, dim=1)
        got = rbf_partial(k, np.array([0.0]), np.array([1.0]), 0)
        assert got == pytest.approx(-0.24197072451914337, abs=1e-9)
        h = 1e-6
        fd = (k(np.zeros(1), np.array([1 + h])) - k(np.zeros(1), np.array([1 - h]))) / (2 * h)
        assert got == pytest.approx(float(fd), abs=1e-9)

    def test_partial_antisymmetry(self):
        rng = np.random.default_rng(6)
        k = RbfKernel(0.8, dim=3)
        h = 1e-6
        for _ in range(10):
            y, u = rng.normal(size=3), rng.normal(size=3)
            l = int(rng.integers(3))
            du = rbf_partial(k, y, u, l)
            e = np.zeros(3)
            e[l] = h
            dy = float((k(y + e, u) - k(y - e, u)) / (2 * h))
            assert du == pytest.approx(-dy, abs=1e-8)

    def test_index_range_checked(self):
        with pytest.raises(IndexError):
            rbf_partial(RbfKernel(1.0, dim=1), np.zeros(1), np.zeros(1), 1)


class TestMmdLosses:
    def test_biased_coincident(self):
        k = RbfKernel(1.0, dim=1)
        got = mmd_loss_biased(k, [0.0], [0.0])
        assert got == pytest.approx(-((2 * np.pi) ** -0.5), abs=1e-12)

    def test_biased_separated_points(self):
        # oracle: hand evaluation -2 k(2,0) + k(2,2) = (2 pi)^{-1/2}(1 - 2 e^{-2})
        k = RbfKernel(1.0, dim=1)
        got = mmd_loss_biased(k, [0.0], [2.0])
        assert got == pytest.approx(0.2909603473750566, abs=1e-12)

    def test_biased_shift_is_squared_discrepancy(self):
        rng = np.random.default_rng(7)
        k = RbfKernel(1.0, dim=2)
        for _ in range(5):
            y = rng.normal(size=(5, 2))
            u = rng.normal(size=(7, 2))
            loss = mmd_loss_biased(k, y, u)
            sq = oracles.mmd_squared_brute(k, y, u)
            assert loss + k.cross(y, y).mean() == pytest.approx(sq, abs=1e-12)
            assert sq >= -1e-12

    def test_unbiased_coincident(self):
        k = RbfKernel(1.0, dim=1)
        got = mmd_loss_unbiased(k, [0.0], [0.0, 0.0])
        assert got == pytest.approx(-((2 * np.pi) ** -0.5), abs=1e-12)

    def test_unbiased_two_points(self):
        # -(k(0,0) + k(2,0)) + k(0,2) = -k(0,0)
        k = RbfKernel(1.0, dim=1)
        got = mmd_loss_unbiased(k, [0.0], [0.0, 2.0])
        assert got == pytest.approx(-((2 * np.pi) ** -0.5), abs=1e-12)

    def test_unbiased_needs_pairs(self):
        with pytest.raises(ValueError, match="b >= 2"):
            mmd_loss_unbiased(RbfKernel(1.0, dim=1), [0.0], [1.0])

    def test_biased_unbiased_gap_identity(self):
        # gap = (1/b) [mean_offdiag k(u_j, u_j') - k_peak]
        rng = np.random.default_rng(8)
        k = RbfKernel(1.0, dim=1)
        y = rng.normal(size=4)
        for b in (2, 3, 4):
            u = rng.normal(size=b)
            gram = k.cross(u, u)
            off = (gram.sum() - np.trace(gram)) / (b * (b - 1))
            gap = mmd_loss_unbiased(k, y, u) - mmd_loss_biased(k, y, u)
            assert gap == pytest.approx((off - k.peak) / b, abs=1e-12)

    def test_unbiased_expectation_matches_quadrature(self):
        # location model u = theta + v, v standard normal
        rng = np.random.default_rng(9)
        k = RbfKernel(1.0, dim=1)
        y = rng.normal(size=5)
        theta = 0.3
        # quadrature value of the ideal loss
        u_nodes = theta + oracles.GH_NODES
        cross = (
            (2 * np.pi) ** -0.5
            * np.exp(-((y[:, None] - u_nodes[None, :]) ** 2) / 2.0)
            * oracles.GH_WEIGHTS[None, :]
        ).sum(axis=1)
        du = np.sqrt(2.0) * oracles.GH_NODES
        pair = ((2 * np.pi) ** -0.5 * np.exp(-(du**2) / 2.0) * oracles.GH_WEIGHTS).sum()
        ideal = -2.0 * cross.mean() + pair
        reps = 60000
        vals = np.empty(reps)
        for r in range(reps):
            u = theta + rng.standard_normal(3)
            vals[r] = mmd_loss_unbiased(k, y, u)
        se = vals.std(ddof=1) / np.sqrt(reps)
        assert abs(vals.mean() - ideal) < 4.0 * se


def location_generator():
    return Generator(
        sample_noise=lambda rng, b: rng.standard_normal((b, 1)),
        push=lambda theta, v: theta[0] + v,
        dpush=lambda theta, v: np.ones(v.shape[:-1] + (1, 1)),
    )


class TestMmdGradient:
    def test_coincident_pushforward_vanishes(self):
        k = RbfKernel(1.0, dim=1)
        gen = location_generator()
        theta = np.array([2.0])
        v = np.zeros((2, 1))  # both pseudo-points at theta, datum at theta too
        got = mmd_grad_phi(k, gen, theta, [2.0], v)
        np.testing.assert_allclose(got, 0.0, atol=1e-14)

    def test_symmetric_location_model_centered(self):
        # data and noise symmetric around theta: gradient centered at zero
        k = RbfKernel(1.0, dim=1)
        gen = location_generator()
        theta = np.array([0.0])
        y = np.array([-1.2, 1.2, -0.4, 0.4])
        rng = np.random.default_rng(10)
        reps = 50000
        vals = np.empty(reps)
        for r in range(reps):
            vals[r] = mmd_grad_phi(k, gen, theta, y, rng.standard_normal((2, 1)))[0]
        se = vals.std(ddof=1) / np.sqrt(reps)
        assert abs(vals.mean()) < 4.0 * se

    def test_needs_pairs(self):
        k = RbfKernel(1.0, dim=1)
        with pytest.raises(ValueError, match="b >= 2"):
            mmd_grad_phi(k, location_generator(), np.zeros(1), [0.0], np.zeros((1, 1)))
