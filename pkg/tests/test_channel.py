import logging
import math

import numpy as np
import pytest
from scipy import integrate

from hstjps.core.channel import (
    ChannelDraw,
    RelayIntegrator,
    avg_snr,
    cdf_snr_direct,
    cdf_snr_relay,
    cdf_snr_terrestrial,
    check_relay_cdf,
    combined_relay_snr,
    draw_channel,
    pdf_snr_direct,
    sample_shadowed_rician,
    snr_quantile_direct,
)
from hstjps.core.errors import DomainError
from hstjps.core.models import FadingParams, LinkBudget, RelayCdfMethod, TerrestrialPathLoss
from hstjps.utils.specialfn import kummer_1f1

PARAMS = FadingParams.default()


def test_identity_link_budget():
    link = LinkBudget(p_tx=1, g_tx=1, g_rx=1, noise_power=1, pathloss=TerrestrialPathLoss(ref_loss_db=0.0))
    assert avg_snr(link, 1.0) == pytest.approx(1.0)


def test_terrestrial_reference_loss():
    assert TerrestrialPathLoss().gain(1.0) == pytest.approx(1e-4)


def test_ts_user_mean_snr_matches_db_chain(env):
    snr_db = 33 + 10 + 0 - 40 - 37.6 * math.log10(100) - (-174 + 10 * math.log10(2e7))
    assert env.gbar_u(100.0) == pytest.approx(10 ** (snr_db / 10), rel=1e-9)


def test_avg_snr_rejects_non_positive_distance(env):
    with pytest.raises(DomainError):
        avg_snr(env.ts_user, 0.0)


def test_sampler_mean_matches_moment(rng):
    samples = sample_shadowed_rician(PARAMS, rng, 1_000_000)
    assert samples.mean() == pytest.approx(0.531, rel=0.01)
    assert samples.mean() == pytest.approx(PARAMS.mean_power(), rel=0.01)
    assert np.mean(samples ** 2) == pytest.approx(PARAMS.second_moment(), rel=0.02)


def test_sampler_without_los_is_exponential(rng):
    params = FadingParams(m=2, b=0.3, omega=0.0)
    samples = sample_shadowed_rician(params, rng, 500_000)
    assert samples.mean() == pytest.approx(0.6, rel=0.01)
    assert np.mean(samples > 0.6) == pytest.approx(math.exp(-1), abs=0.005)


def test_sampler_scalar_draw(rng):
    assert isinstance(sample_shadowed_rician(PARAMS, rng), float)


def test_pdf_at_zero():
    gbar = 3.0
    two_bm = 2 * PARAMS.b * PARAMS.m
    expected = (two_bm / (two_bm + PARAMS.omega)) ** PARAMS.m / (2 * PARAMS.b * gbar)
    assert pdf_snr_direct(0.0, gbar, PARAMS) == pytest.approx(expected, rel=1e-12)
    assert pdf_snr_direct(-1.0, gbar, PARAMS) == 0.0


def test_pdf_matches_kummer_form():
    gbar = 2.0
    two_bm = 2 * PARAMS.b * PARAMS.m
    alpha = (two_bm / (two_bm + PARAMS.omega)) ** PARAMS.m
    delta = PARAMS.omega / (two_bm + PARAMS.omega)
    scale = 2 * PARAMS.b * gbar
    x = np.linspace(0.0, 20.0, 41)
    expected = alpha / scale * np.exp(-x / scale) * kummer_1f1(PARAMS.m, 1.0, delta * x / scale)
    np.testing.assert_allclose(pdf_snr_direct(x, gbar, PARAMS), expected, rtol=1e-9, atol=1e-12 * expected.max())


def test_pdf_far_tail_is_zero(env):
    assert pdf_snr_direct(1e4, env.gbar_s, env.sat_fading) == pytest.approx(0.0, abs=1e-12)
    tail = pdf_snr_direct(np.array([1e4, 1e6, 1e9]) * env.gbar_s, env.gbar_s, env.sat_fading)
    assert np.all(np.isfinite(tail)) and np.all(tail >= 0)


@pytest.mark.parametrize("gbar", [1.0, 15.8])
def test_pdf_integrates_to_one(gbar):
    upper = snr_quantile_direct(1 - 1e-12, gbar, PARAMS)
    total, _ = integrate.quad(lambda x: pdf_snr_direct(x, gbar, PARAMS), 0.0, upper, limit=200)
    assert total == pytest.approx(1.0, abs=1e-4)


def test_cdf_is_integral_of_pdf():
    gbar = 2.0
    for x in (0.1, 0.8, 2.5, 9.0):
        area, _ = integrate.quad(lambda t: pdf_snr_direct(t, gbar, PARAMS), 0.0, x)
        assert cdf_snr_direct(x, gbar, PARAMS) == pytest.approx(area, abs=1e-9)


def test_sampler_matches_analytic_cdf(rng):
    gbar = 15.8
    samples = np.sort(gbar * sample_shadowed_rician(PARAMS, rng, 1_000_000))
    grid = np.quantile(samples, np.linspace(0.001, 0.999, 300))
    ecdf = np.searchsorted(samples, grid, side="right") / len(samples)
    assert np.max(np.abs(cdf_snr_direct(grid, gbar, PARAMS) - ecdf)) <= 0.01


def test_quantile_inverts_cdf():
    for q in (0.01, 0.5, 0.999):
        x = snr_quantile_direct(q, 4.0, PARAMS)
        assert cdf_snr_direct(x, 4.0, PARAMS) == pytest.approx(q, abs=1e-9)
    with pytest.raises(DomainError):
        snr_quantile_direct(1.0, 4.0, PARAMS)


def test_terrestrial_cdf():
    assert cdf_snr_terrestrial(0.0, 5.0) == 0.0
    assert cdf_snr_terrestrial(5.0, 5.0) == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert cdf_snr_terrestrial(15.0, 5.0) == pytest.approx(1 - math.exp(-3), rel=1e-12)


def test_combined_relay_snr():
    assert combined_relay_snr(ChannelDraw(0.1, 0.2, 0.4), 100, 100, 50) == pytest.approx(10 + 20 / 2)
    assert combined_relay_snr(ChannelDraw(0.5, 0.6, 1.2), 100, 100, 50) == pytest.approx(80.0)
    assert combined_relay_snr(ChannelDraw(0.5, 0.6, 0.0), 100, 100, 50) == pytest.approx(50.0)
    assert combined_relay_snr(ChannelDraw(0.5, 0.0, 0.0), 100, 100, 50) == pytest.approx(50.0)


@pytest.mark.parametrize("offset", [1e5, 1e6])
def test_relay_cdf_support_and_limit(env, offset):
    h_sq = 0.4
    gbar_u = env.gbar_u(300.0)
    lower = env.gbar_s * h_sq
    assert cdf_snr_relay(lower, env.gbar_s, env.gbar_t, gbar_u, h_sq, env.ts_fading) == 0.0
    assert cdf_snr_relay(lower + offset, env.gbar_s, env.gbar_t, gbar_u, h_sq, env.ts_fading) == pytest.approx(1.0, abs=1e-6)


def test_relay_cdf_monotone(rng):
    for _ in range(20):
        params = FadingParams(m=rng.uniform(0.5, 8), b=rng.uniform(0.05, 0.5), omega=rng.uniform(0, 1.5))
        gbar_s, gbar_t, gbar_u = rng.uniform(1, 50, 3)
        h_sq = rng.uniform(0, 2)
        x = np.linspace(0, gbar_s * h_sq + 10 * gbar_t, 1000)
        cdf = cdf_snr_relay(x, gbar_s, gbar_t, gbar_u, h_sq, params)
        assert np.all(np.diff(cdf) >= -1e-5)
        assert np.all((cdf >= 0) & (cdf <= 1))


@pytest.mark.parametrize("h_sq,d", [(0.05, 150.0), (0.4, 400.0), (1.2, 800.0)])
def test_relay_cdf_matches_monte_carlo(env, rng, h_sq, d):
    check = check_relay_cdf(h_sq, d, env, rng, samples=200_000)
    assert check.passed, check.sup_gap


def test_relay_check_trips_diagnostic(env, rng, caplog):
    caplog.set_level(logging.WARNING, logger="hstjps")
    check = check_relay_cdf(0.4, 400.0, env, rng, samples=20_000, tol=1e-9)
    assert not check.passed
    assert "中继 CDF" in caplog.text


def test_closed_form_is_clamped(env):
    x = np.linspace(0, 200, 50)
    cdf = cdf_snr_relay(x, env.gbar_s, env.gbar_t, env.gbar_u(200.0), 0.3, env.ts_fading, RelayCdfMethod.CLOSED_FORM)
    assert np.all((cdf >= 0) & (cdf <= 1))


def test_draw_channel_shapes(env, rng):
    h_sq, alpha_sq, g_sq = draw_channel(env, rng, 7)
    assert h_sq.shape == alpha_sq.shape == g_sq.shape == (7,)
    assert np.all(h_sq >= 0) and np.all(g_sq >= 0)


def test_relay_integrator_beyond_truncation(env):
    t_max = snr_quantile_direct(1 - 1e-10, env.gbar_t, env.ts_fading)
    median = snr_quantile_direct(0.5, env.gbar_t, env.ts_fading)
    integrator = RelayIntegrator(np.array([median, t_max, 10 * t_max]), env.gbar_t, env.ts_fading)
    survival = integrator.survival(env.gbar_u(300.0))
    assert survival[0] > 0
    assert np.array_equal(survival[1:], [0.0, 0.0])


@pytest.mark.slow
def test_relay_cdf_random_positions_large_sample(env):
    rng = np.random.default_rng(404)
    for _ in range(10):
        h_sq = float(sample_shadowed_rician(env.sat_fading, rng))
        d = float(rng.uniform(1.0, env.cell_radius))
        check = check_relay_cdf(h_sq, d, env, rng, samples=1_000_000)
        assert check.passed, (h_sq, d, check.sup_gap)
