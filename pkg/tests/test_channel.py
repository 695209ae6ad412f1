import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from mmcache import channel as ch
from mmcache.config import SystemParams


def test_sector_gain():
    dth = math.radians(30)
    assert ch.sector_gain(0.0, dth, 8.0, 0.1) == 8.0
    assert ch.sector_gain(dth, dth, 8.0, 0.1) == 8.0
    assert ch.sector_gain(math.pi, dth, 8.0, 0.1) == 0.1
    assert ch.sector_gain(2 * math.pi + 0.1, dth, 8.0, 0.1) == 8.0


@given(st.floats(-100, 100))
def test_wrap_range(theta):
    w = ch.wrap_angle(theta)
    assert -math.pi < w <= math.pi
    assert math.cos(w) == pytest.approx(math.cos(theta), abs=1e-9)


def test_los_probability():
    assert ch.p_los(0.0, 30.0) == 1.0
    assert ch.p_los(30.0, 30.0) == pytest.approx(0.36788, abs=1e-5)
    assert ch.p_los(60.0, 30.0) == pytest.approx(0.13534, abs=1e-5)


def test_pathloss_exponent():
    assert ch.pathloss_exponent(np.array([True, False]), 2.0, 3.0).tolist() == [2.0, 3.0]


def test_received_power():
    p = SystemParams(xi=0.0)
    base = ch.received_power(1, 1, 1, 1, 1.0, 2.0, p.wavelength)
    assert base == pytest.approx(7.2595e-7, rel=1e-4)
    assert 10 * math.log10(base) == pytest.approx(-61.39, abs=0.01)
    assert ch.received_power(1, 1, 1, 0.0, 5.0, 2.0, p.wavelength) == 0.0
    assert ch.received_power(1, 1, 1, 1, 2.0, 2.0, p.wavelength) == pytest.approx(base / 4)
    with pytest.raises(ValueError):
        ch.received_power(1, 1, 1, 1, 0.0, 2.0, p.wavelength)


def test_link_state_invariants():
    with pytest.raises(ValueError):
        ch.LinkState(10.0, True, 2.0, -0.1, 1.0, 1.0)
    with pytest.raises(ValueError):
        ch.LinkState(0.0, True, 2.0, 1.0, 1.0, 1.0)


def test_self_interference(rng):
    p = SystemParams(xi=0.0)
    assert ch.sample_self_interference(p.p_ue, 0.0, rng) == 0.0
    x = ch.sample_self_interference(p.p_ue, p.kappa_si, rng, 100_000)
    mean = p.kappa_si * p.p_ue
    assert x.mean() == pytest.approx(mean, rel=0.02)
    assert 10 * math.log10(mean) + 30 == pytest.approx(-57.0, abs=1e-9)
    assert np.mean(x > mean) == pytest.approx(math.exp(-1), abs=0.01)
    with pytest.raises(ValueError):
        ch.sample_self_interference(p.p_ue, -1.0, rng)


def test_rayleigh(rng):
    eta = ch.sample_fading(rng, 400_000)
    assert eta.mean() == pytest.approx(1.0, rel=0.005)
    for x in (0.5, 1.0, 2.0):
        assert np.mean(eta > x) == pytest.approx(math.exp(-x), rel=0.01)


def test_mixture_30_degrees():
    m = ch.interferer_gain_mixture(math.radians(30), 8.0, 0.125)
    np.testing.assert_allclose(m.probs, [1 / 144, 22 / 144, 121 / 144], rtol=1e-12)
    np.testing.assert_allclose(m.values, [1.0, 1 / 64, 1 / 4096], rtol=1e-12)
    assert m.probs.sum() == pytest.approx(1.0, abs=1e-12)


def test_mixture_isotropic():
    m = ch.interferer_gain_mixture(2 * math.pi, 1.0, 1.0)
    assert m.probs[0] == pytest.approx(1.0)
    assert m.expect(lambda g: g) == pytest.approx(1.0)


def test_mixture_validation():
    with pytest.raises(ValueError):
        ch.GainMixture(np.array([1.0, 0.5]), np.array([0.6, 0.5]))


def test_empirical_gain_matches_mixture(rng):
    dth = math.radians(30)
    n = 1_000_000
    g = ch.interferer_gains(rng.uniform(-math.pi, math.pi, n), rng, dth, 8.0, 0.125, dth, 8.0, 0.125)
    m = ch.interferer_gain_mixture(dth, 8.0, 0.125)
    for value, prob in zip(m.values * 64, m.probs):
        assert np.mean(np.isclose(g, value)) == pytest.approx(prob, abs=0.01 * max(prob, 0.1))


def test_cross_mixture(rng):
    p = SystemParams(xi=0.0)
    m = ch.cross_gain_mixture(p.dtheta_bs, p.g_bs_max, p.g_bs_min, p.dtheta_ue, p.g_ue_max, p.g_ue_min)
    g = ch.interferer_gains(rng.uniform(-math.pi, math.pi, 400_000), rng, p.dtheta_bs, p.g_bs_max,
                            p.g_bs_min, p.dtheta_ue, p.g_ue_max, p.g_ue_min)
    g = g / (p.g_bs_max * p.g_ue_max)
    for value, prob in zip(m.values, m.probs):
        freq = np.mean(np.isclose(g, value, rtol=1e-9))
        assert freq == pytest.approx(prob, abs=4 * math.sqrt(prob * (1 - prob) / g.size))


def test_los_independent_across_links(rng):
    r = np.array([20.0, 35.0])
    flags = np.array([ch.sample_los(r, 30.0, rng) for _ in range(20_000)])
    table = np.array([[np.sum(~flags[:, 0] & ~flags[:, 1]), np.sum(~flags[:, 0] & flags[:, 1])],
                      [np.sum(flags[:, 0] & ~flags[:, 1]), np.sum(flags[:, 0] & flags[:, 1])]])
    assert stats.chi2_contingency(table).pvalue > 0.01
    assert flags[:, 0].mean() == pytest.approx(math.exp(-20 / 30), abs=0.015)
