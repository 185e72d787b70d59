import pytest

from hstjps.core.errors import ConfigError
from hstjps.core.models import ExperimentConfig
from hstjps.core.reward import lambda_of_eta
from hstjps.core.solver import scenario_key, solve_eta_star


def test_linear_seam(env):
    a, b = 1e8, 1.0
    solution = solve_eta_star(env, lambda_fn=lambda eta: a - b * eta)
    assert solution.eta_star == pytest.approx(a / (env.tau_s + b), rel=1e-9)
    assert solution.relative_residual <= 1e-6
    assert solution.bracket == (0.0, env.rates.top_rate)


def test_missing_sign_change_is_reported(env):
    with pytest.raises(ConfigError) as info:
        solve_eta_star(env, lambda_fn=lambda eta: 1e9)
    assert info.value.key == "tau_s_ms"

    with pytest.raises(ConfigError):
        solve_eta_star(env, lambda_fn=lambda eta: -1.0)


def test_solution_properties(env, fast_quad):
    solution = solve_eta_star(env, fast_quad)
    assert 0 < solution.eta_star <= env.rates.top_rate
    assert solution.relative_residual <= 1e-6
    assert lambda_of_eta(solution.eta_star, env, fast_quad) == pytest.approx(
        solution.eta_star * env.tau_s, rel=1e-6
    )


def test_slower_arrivals_lower_throughput(env, fast_quad):
    slow = env.model_copy(update={"tau_s": env.tau_s * 10})
    assert solve_eta_star(slow, fast_quad).eta_star < solve_eta_star(env, fast_quad).eta_star


def test_scenario_key(env, fast_quad):
    assert scenario_key(env, fast_quad) == scenario_key(env, fast_quad)
    slow = env.model_copy(update={"tau_s": env.tau_s * 10})
    assert scenario_key(slow, fast_quad) != scenario_key(env, fast_quad)
    assert scenario_key(env, fast_quad) != scenario_key(env, fast_quad.doubled())


@pytest.mark.slow
def test_quadrature_refinement_is_stable(env):
    from hstjps.core.models import QuadratureSpec

    base = QuadratureSpec()
    coarse = solve_eta_star(env, base).eta_star
    fine = solve_eta_star(env, base.doubled()).eta_star
    assert fine == pytest.approx(coarse, rel=1e-3)


@pytest.mark.parametrize("p_ts_dbm", [0.0, -40.0])
def test_low_satellite_power_still_solves(fast_quad, p_ts_dbm):
    env = ExperimentConfig(p_ts_dbm=p_ts_dbm).network()
    solution = solve_eta_star(env, fast_quad)
    assert 0 < solution.eta_star < env.rates.top_rate
    assert solution.relative_residual <= 1e-6
