import math

import numpy as np
import pytest

from ldsm.errors import (
    DegenerateVarianceError,
    InsufficientDataError,
    RejectedInputError,
)
from ldsm.linalg import mat_pow, max_norm, solve_spd
from ldsm.moments import (
    block_estimates,
    block_sample_size_bounds,
    lag_moment,
    moment_bias,
    sample_size_bound,
    state_cross_cov,
)
from ldsm.simulate import observed_view, rollout
from ldsm.systems import SymmetricDynamics, partition, random_stable


def batch_lag_moment(states_batch, m):
    """Vectorized lag moments across a batch of trajectories (test helper)."""
    t = states_batch.shape[1]
    first = np.einsum("bti,btj->bij", states_batch[:, : t - m], states_batch[:, m:]) / (t - m)
    second = np.einsum(
        "bti,btj->bij", states_batch[:, : t - m - 2], states_batch[:, m + 2 :]
    ) / (t - m - 2)
    return first - second


class TestLagMoment:
    def test_zero_states(self):
        est = lag_moment(np.zeros((10, 3)), 1)
        assert max_norm(est.s_hat) == 0.0
        assert est.order_m == 1 and est.t_used == 10

    def test_needs_enough_steps(self):
        with pytest.raises(InsufficientDataError) as err:
            lag_moment(np.zeros((5, 2)), 3)
        assert err.value.required == 6

    def test_restriction_is_literal_subblock(self):
        d = random_stable(5, 0.5, seed=3, n_obs=2)
        traj = rollout(d, 40, seed=4)
        full = lag_moment(traj.states, 1).s_hat
        restricted = lag_moment(observed_view(traj), 1).s_hat
        assert np.array_equal(restricted, full[:2, :2])

    def test_symmetrize_flag(self):
        d = random_stable(3, 0.5, seed=3)
        states = rollout(d, 30, seed=5).states
        raw = lag_moment(states, 1).s_hat
        sym = lag_moment(states, 1, symmetrize=True).s_hat
        assert max_norm(sym - sym.T) == 0.0
        assert max_norm(sym - 0.5 * (raw + raw.T)) == 0.0

    def test_zero_dynamics_mean_matches_bias(self):
        # at A = 0 the lag-0 estimator has mean (1 - 1/T) I
        t_len = 50
        reps = 10000
        rng = np.random.default_rng(77)
        states = np.zeros((reps, t_len, 3))
        states[:, 1:] = rng.standard_normal((reps, t_len - 1, 3))
        ests = batch_lag_moment(states, 0)
        mean = ests.mean(axis=0)
        se = ests.std(axis=0) / np.sqrt(reps)
        expected = (1.0 - 1.0 / t_len) * np.eye(3)
        assert np.all(np.abs(mean - expected) <= 5.0 * se + 1e-12)

    def test_mean_matches_power_plus_bias(self):
        d = random_stable(4, 0.6, seed=8)
        t_len = 5000
        reps = 200
        ests = np.empty((reps, 4, 4))
        for r in range(reps):
            ests[r] = lag_moment(rollout(d, t_len - 1, seed=900 + r).states, 1).s_hat
        mean = ests.mean(axis=0)
        se = ests.std(axis=0) / np.sqrt(reps)
        expected = d.sigma**2 * d.a + moment_bias(d, 1, t_len)
        assert np.all(np.abs(mean - expected) <= 5.0 * se + 1e-12)
        # with a symmetric state matrix the expectation is symmetric too
        assert np.all(np.abs(mean - mean.T) <= 5.0 * np.sqrt(se**2 + se.T**2) + 1e-12)


class TestMomentBias:
    def test_zero_dynamics_closed_form(self):
        d = SymmetricDynamics(a=np.zeros((3, 3)), sigma=2.0)
        h = moment_bias(d, 0, 40)
        assert np.allclose(h, -(2.0**2) * np.eye(3) / 40.0, atol=1e-14)

    def test_decays_like_one_over_t(self):
        d = random_stable(5, 0.5, seed=9)
        t = 400
        ratio = max_norm(moment_bias(d, 1, 2 * t)) / max_norm(moment_bias(d, 1, t))
        assert 0.4 <= ratio <= 0.6

    def test_uniform_bound(self):
        # |bias| <= 8 sigma^2 / (T (1 - rho^2)^2) once T >= 2(m+2)
        for seed, rho in ((1, 0.3), (2, 0.6), (3, 0.85)):
            d = random_stable(4, rho, seed=seed)
            for m in (0, 1, 2, 3):
                for t_len in (2 * (m + 2), 20, 100):
                    bound = 8.0 * d.sigma**2 / (t_len * (1.0 - rho**2) ** 2)
                    assert max_norm(moment_bias(d, m, t_len)) <= bound + 1e-12

    def test_rejects_short_series(self):
        d = random_stable(3, 0.5, seed=1)
        with pytest.raises(RejectedInputError):
            moment_bias(d, 2, 4)


class TestStateCrossCov:
    def test_zero_time_is_zero(self):
        d = random_stable(3, 0.5, seed=2)
        assert max_norm(state_cross_cov(d, 0, 5)) == 0.0

    def test_zero_dynamics_identity(self):
        d = SymmetricDynamics(a=np.zeros((3, 3)), sigma=1.5)
        assert np.allclose(state_cross_cov(d, 4, 4), 1.5**2 * np.eye(3), atol=1e-14)

    def test_stationary_limit(self):
        d = random_stable(4, 0.5, seed=6)
        t = 200
        limit = d.sigma**2 * mat_pow(d.a, 3) @ solve_spd(np.eye(4) - d.a @ d.a, np.eye(4))
        assert max_norm(state_cross_cov(d, t, t + 3) - limit) <= 1e-10

    def test_rejects_bad_times(self):
        d = random_stable(3, 0.5, seed=2)
        with pytest.raises(RejectedInputError):
            state_cross_cov(d, 5, 4)


class TestSampleSizeBound:
    def test_direct_evaluation(self):
        b = sample_size_bound(0.25, 0.1, 1.0, 0.5, 1, 10)
        manual = 64.0 * (1.0 + 2.0 * math.sqrt(math.log(2000.0))) ** 2 / (0.25**2 * 0.5**4)
        assert b.t_required == math.ceil(manual)

    def test_halving_epsilon_quadruples(self):
        big = sample_size_bound(0.125, 0.1, 1.0, 0.5, 1, 10).t_required
        small = sample_size_bound(0.25, 0.1, 1.0, 0.5, 1, 10).t_required
        assert big == pytest.approx(4 * small, abs=4)

    def test_lag_floor_branch(self):
        b = sample_size_bound(3.9, 0.5, 1.0, 0.0, 200, 2)
        assert b.t_required == 2 * (200 + 2)

    def test_epsilon_range_enforced(self):
        with pytest.raises(RejectedInputError):
            sample_size_bound(16.0, 0.1, 1.0, 0.5, 1, 10)
        with pytest.raises(RejectedInputError):
            sample_size_bound(-1.0, 0.1, 1.0, 0.5, 1, 10)

    def test_coverage_at_bound(self):
        # empirical failure rate at the prescribed length stays within delta
        # plus binomial slack (the bound is conservative in practice)
        eps, delta = 1.5, 0.2
        d = random_stable(2, 0.5, seed=21)
        t_req = sample_size_bound(eps, delta, 1.0, 0.5, 0, 2).t_required
        fails = 0
        reps = 200
        for r in range(reps):
            s0 = lag_moment(rollout(d, t_req - 1, seed=3000 + r).states, 0).s_hat
            fails += max_norm(s0 - d.sigma**2 * np.eye(2)) > eps
        assert fails / reps <= delta + 3.0 * math.sqrt(delta * (1 - delta) / reps)


class TestBlockSampleSizeBounds:
    def test_direct_evaluation(self):
        eps, delta, sigma, rho, n = 0.4, 0.1, 1.0, 0.5, 8
        kappa = max(64.0 * sigma**2, 32.0**2)
        base = kappa * (1.0 + 2.0 * math.sqrt(math.log(2.0 * n * n / delta))) ** 2 / (
            eps**2 * (1.0 - rho) ** 4
        )
        t_b, t_cct, t_cect = block_sample_size_bounds(eps, delta, sigma, rho, n)
        assert t_b == math.ceil(max(base, 6))
        assert t_cct == math.ceil(max(400.0 * n**2 * base, 8))
        assert t_cect == math.ceil(max(19600.0 * n**4 * base, 10))

    def test_ratios_when_kappa_shared(self):
        t_b, t_cct, t_cect = block_sample_size_bounds(1.0, 0.1, 4.0, 0.5, 6)
        assert t_cct / t_b == pytest.approx(400.0 * 36.0, rel=1e-6)
        assert t_cect / t_cct == pytest.approx(49.0 * 36.0, rel=1e-6)

    def test_epsilon_range_enforced(self):
        with pytest.raises(RejectedInputError):
            block_sample_size_bounds(0.5, 0.1, 1.0, 0.5, 4)


class TestBlockEstimates:
    def test_fully_observed_coupling_is_near_zero(self):
        d = random_stable(4, 0.5, seed=13)
        traj = rollout(d, 10**5 - 1, seed=14)
        blocks = block_estimates(traj.states)
        assert max_norm(blocks.cct_hat) <= 0.05

    def test_mean_observed_block_recovers_truth(self):
        d = random_stable(4, 0.6, seed=15, n_obs=2)
        b_true, _, _ = partition(d)
        reps = 50
        acc = np.zeros((2, 2))
        for r in range(reps):
            traj = rollout(d, 10**6 // 10 - 1, seed=500 + r)
            acc += block_estimates(observed_view(traj)).b_hat
        assert max_norm(acc / reps - b_true) <= 0.02

    def test_noise_scale_cancels_exactly(self):
        # doubling sigma scales states linearly, so the ratio estimator is
        # unchanged on the same noise stream
        a = random_stable(4, 0.6, seed=16).a
        d1 = SymmetricDynamics(a=a, sigma=1.0, n_obs=2)
        d2 = SymmetricDynamics(a=a, sigma=2.0, n_obs=2)
        b1 = block_estimates(observed_view(rollout(d1, 500, seed=17))).b_hat
        b2 = block_estimates(observed_view(rollout(d2, 500, seed=17))).b_hat
        assert max_norm(b1 - b2) <= 1e-12

    def test_floors_gate_higher_blocks(self):
        d = random_stable(3, 0.5, seed=18)
        states = rollout(d, 6, seed=19).states  # 7 rows
        blocks = block_estimates(states)
        assert blocks.cct_hat is None and blocks.cect_hat is None
        blocks = block_estimates(rollout(d, 8, seed=19).states)  # 9 rows
        assert blocks.cct_hat is not None and blocks.cect_hat is None
        blocks = block_estimates(rollout(d, 9, seed=19).states)  # 10 rows
        assert blocks.cect_hat is not None

    def test_too_short_rejected(self):
        with pytest.raises(InsufficientDataError):
            block_estimates(np.zeros((5, 2)))

    def test_degenerate_variance(self):
        with pytest.raises(DegenerateVarianceError):
            block_estimates(np.zeros((20, 3)))
