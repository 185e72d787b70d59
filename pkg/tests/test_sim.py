import math

import numpy as np
import pytest

from hstjps.core.errors import DomainError, SimulationError
from hstjps.core.models import ExperimentConfig, QuadratureSpec
from hstjps.core.policy import Decision, PolicyKind
from hstjps.core.rates import direct_latency, rate_from_snr
from hstjps.core.reward import decision_probabilities
from hstjps.core.sim import (
    USER_BLOCK,
    SimClock,
    _UserBlock,
    frame_rng,
    ratio_estimate,
    run_experiment,
    run_frame,
    simulate_frames,
)
from hstjps.core.solver import solve_eta_star


@pytest.fixture(scope="module")
def strong_env():
    """卫星直连几乎不会中断的场景"""
    return ExperimentConfig(p_ts_dbm=80.0).network()


def test_single_step_renewal_identity(strong_env):
    seed = 7
    outcome = run_frame(PolicyKind.NO_WAIT_DIRECT, 0.0, strong_env, frame_rng(seed, 0))
    users = _UserBlock.draw(strong_env, frame_rng(seed, 0), USER_BLOCK)
    rate = rate_from_snr(strong_env.gbar_s * users.h_sq[0], strong_env.rates)
    latency = direct_latency(users.size[0], rate, int(users.beta_s[0]), strong_env.timing)

    assert outcome.users_seen == 1
    assert outcome.mode is Decision.DIRECT
    assert outcome.reward == users.size[0]
    assert outcome.time == pytest.approx(users.gap[0] + latency, rel=1e-12)
    assert outcome.probing_time == 0.0
    assert outcome.path.bits == (1, 0)
    assert outcome.path.closed


def test_zero_price_schedules_first_user(strong_env):
    for frame in range(20):
        outcome = run_frame(PolicyKind.HSTJPS, 0.0, strong_env, frame_rng(3, frame))
        assert outcome.users_seen == 1


def test_frame_is_deterministic(env):
    first = run_frame(PolicyKind.HSTJPS, 4e7, env, frame_rng(11, 5))
    second = run_frame(PolicyKind.HSTJPS, 4e7, env, frame_rng(11, 5))
    assert first == second


def test_time_decomposition(env):
    for policy in (PolicyKind.HSTJPS, PolicyKind.NO_WAIT_ASSISTED):
        outcome = run_frame(policy, 4e7, env, frame_rng(2, 1))
        parts = outcome.waiting_time + outcome.probing_time + outcome.delivery_time
        assert outcome.time == pytest.approx(parts, rel=1e-12)
        assert outcome.probing_time == pytest.approx(outcome.probes * env.timing.tau_p)
        assert outcome.path.terminal_index == outcome.users_seen
        assert outcome.mode.delivers


def test_probing_baseline_probes_every_user(env):
    totals = simulate_frames(PolicyKind.NO_WAIT_ASSISTED, 0.0, env, 5, 0, 30)
    assert np.array_equal(totals.users, totals.probes)


def test_renewal_identity_clock(env):
    totals = simulate_frames(PolicyKind.NO_WAIT_NO_TS_CACHE, 0.0, env, 9, 0, 50)
    assert totals.clock == pytest.approx(math.fsum(totals.times), rel=1e-12)
    assert np.all(totals.rewards > 0)


def test_sim_clock_rejects_negative_step():
    clock = SimClock()
    clock.advance(0.5)
    assert clock.now == 0.5 and clock.events == 1
    with pytest.raises(DomainError):
        clock.advance(-1.0)


def test_frame_cap():
    hopeless = ExperimentConfig(p_ts_dbm=-40.0).network()
    with pytest.raises(SimulationError) as info:
        run_frame(PolicyKind.NO_WAIT_DIRECT, 0.0, hopeless, frame_rng(1, 0), max_users=100)
    assert info.value.limit == 100


def test_ratio_estimate_single_frame():
    estimate = ratio_estimate([1e8], [0.7], seed=4)
    assert estimate.throughput == pytest.approx(1e8 / 0.7)
    assert math.isnan(estimate.ci95_halfwidth)
    assert estimate.frames == 1


def test_ratio_estimate_constant_ratio():
    rewards = np.full(60, 1e8)
    estimate = ratio_estimate(rewards, rewards / 2e7, batches=6)
    assert estimate.throughput == pytest.approx(2e7)
    assert estimate.ci95_halfwidth == pytest.approx(0.0, abs=1e-6)
    assert estimate.batches == 6


def test_ratio_estimate_ignores_frame_order(rng):
    rewards = rng.uniform(5e7, 2e8, 500)
    times = rng.uniform(0.5, 3.0, 500)
    order = rng.permutation(500)
    forward = ratio_estimate(rewards, times, batches=10)
    shuffled = ratio_estimate(rewards[order], times[order], batches=10)
    assert shuffled.throughput == pytest.approx(forward.throughput, rel=1e-12)


def test_single_frame_experiment(env):
    estimate = run_experiment(PolicyKind.NO_WAIT_DIRECT, env, 1, 21)
    outcome = run_frame(PolicyKind.NO_WAIT_DIRECT, 0.0, env, frame_rng(21, 0))
    assert estimate.throughput == pytest.approx(outcome.reward / outcome.time, rel=1e-12)
    assert estimate.users == outcome.users_seen


def test_parallel_matches_sequential(env):
    sequential = run_experiment(PolicyKind.NO_WAIT_DIRECT, env, 30, 8, batches=5)
    parallel = run_experiment(PolicyKind.NO_WAIT_DIRECT, env, 30, 8, batches=5, workers=3)
    assert parallel == sequential


def test_optimal_policy_solves_threshold_itself(env, fast_quad):
    estimate = run_experiment(PolicyKind.HSTJPS, env, 20, 1, quad=fast_quad, batches=4)
    assert estimate.throughput > 0
    assert 0 <= estimate.probe_fraction <= 1


def test_experiment_rejects_empty_run(env):
    with pytest.raises(DomainError):
        run_experiment(PolicyKind.NO_WAIT_DIRECT, env, 0, 1)


@pytest.mark.slow
def test_simulation_matches_solver(env):
    quad = QuadratureSpec()
    eta_star = solve_eta_star(env, quad).eta_star
    estimate = run_experiment(PolicyKind.HSTJPS, env, 100_000, 2025, eta_star=eta_star, quad=quad, workers=4)
    assert estimate.throughput == pytest.approx(eta_star, rel=0.02)
    assert abs(estimate.throughput - eta_star) <= max(estimate.ci95_halfwidth, 0.005 * eta_star)
    expected = decision_probabilities(eta_star, env, quad)
    assert abs(estimate.probe_fraction - expected.probe) <= 0.01


@pytest.mark.slow
def test_disjoint_seeds_agree(env):
    a = run_experiment(PolicyKind.NO_WAIT_ASSISTED, env, 100_000, 1, workers=4)
    b = run_experiment(PolicyKind.NO_WAIT_ASSISTED, env, 100_000, 2, workers=4)
    assert abs(a.throughput - b.throughput) < 3 * math.hypot(a.std_error, b.std_error)


@pytest.mark.slow
def test_optimal_policy_beats_baselines():
    env = ExperimentConfig(p_ts_dbm=36.0).network()
    quad = QuadratureSpec()
    eta_star = solve_eta_star(env, quad).eta_star
    optimal = run_experiment(PolicyKind.HSTJPS, env, 50_000, 3, eta_star=eta_star, quad=quad, workers=4)
    for kind in (PolicyKind.NO_WAIT_DIRECT, PolicyKind.NO_WAIT_ASSISTED, PolicyKind.NO_WAIT_NO_TS_CACHE):
        baseline = run_experiment(kind, env, 50_000, 3, workers=4)
        assert optimal.throughput >= 1.1 * baseline.throughput, kind


@pytest.mark.slow
@pytest.mark.parametrize(
    "axis,grid,direction",
    [("p_ts_dbm", (36.0, 41.0, 46.0), 1), ("p_tr_dbm", (23.0, 33.0, 43.0), 1), ("tau_s", (0.5, 5.0, 15.0), -1)],
)
def test_throughput_trends(axis, grid, direction):
    base = ExperimentConfig(frames=20_000)
    values = []
    for value in grid:
        config = base.with_axis(axis, value)
        env = config.network()
        eta_star = solve_eta_star(env, config.quadrature()).eta_star
        est = run_experiment(PolicyKind.HSTJPS, env, config.frames, config.seed, eta_star=eta_star, workers=4)
        values.append((est.throughput, est.std_error))
    for (t0, s0), (t1, s1) in zip(values, values[1:]):
        assert direction * (t1 - t0) >= -2 * math.hypot(s0, s1)
