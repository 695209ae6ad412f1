import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mmcache import popularity as pop

# 1/H_1000, H_200/H_1000 and H_400/(2 H_1000) at 30 digits (mpmath)
Q1_XI1_L1000 = 0.133592130492440
HIT200_XI1 = 0.785258677460042
HDAC_XI1_K200 = 0.438845452314904
HDAC_XI04_K200 = 0.286365069105339


def test_zipf_uniform():
    np.testing.assert_allclose(pop.zipf_pmf(0, 4).pmf, [0.25] * 4, rtol=0, atol=1e-15)


def test_zipf_two_contents():
    np.testing.assert_allclose(pop.zipf_pmf(1, 2).pmf, [2 / 3, 1 / 3], rtol=1e-15)


def test_zipf_head_mass():
    assert pop.zipf_pmf(1, 1000).pmf[0] == pytest.approx(Q1_XI1_L1000, rel=1e-12)


@pytest.mark.parametrize("xi, L", [(-0.1, 10), (1.0, 0), (1.0, 2.5)])
def test_zipf_domain(xi, L):
    with pytest.raises(ValueError):
        pop.zipf_pmf(xi, L)


@given(st.floats(0, 5), st.integers(1, 3000))
def test_zipf_invariants(xi, L):
    pm = pop.zipf_pmf(xi, L)
    assert abs(pm.pmf.sum() - 1) <= 1e-12
    assert np.all(pm.pmf > 0)
    assert np.all(np.diff(pm.pmf) <= 0)
    assert pm.cdf[-1] == 1.0


def test_zipf_sampling_matches_pmf(rng):
    pm = pop.zipf_pmf(0.8, 20)
    draws = pm.sample(rng, 200_000)
    freq = np.bincount(draws, minlength=21)[1:] / draws.size
    np.testing.assert_allclose(freq, pm.pmf, atol=4e-3)


def test_hit_probability_examples():
    assert pop.hit_probability(range(1, 101), pop.zipf_pmf(0, 1000)) == pytest.approx(0.1, abs=1e-14)
    assert pop.hit_probability(range(1, 201), pop.zipf_pmf(1, 1000)) == pytest.approx(HIT200_XI1, rel=1e-12)
    assert pop.hit_probability([], pop.zipf_pmf(1, 10)) == 0.0


@pytest.mark.parametrize("cache", [[0, 1], [11], [2, 2]])
def test_hit_probability_rejects_bad_cache(cache):
    with pytest.raises(ValueError):
        pop.hit_probability(cache, pop.zipf_pmf(1, 10))


def test_h_dac_values():
    assert pop.h_dac(200, pop.zipf_pmf(1.0, 1000)) == pytest.approx(HDAC_XI1_K200, rel=1e-12)
    assert pop.h_dac(200, pop.zipf_pmf(0.4, 1000)) == pytest.approx(HDAC_XI04_K200, rel=1e-12)
    assert pop.h_dac(500, pop.zipf_pmf(0, 1000)) == pytest.approx(0.5, abs=1e-14)
    with pytest.raises(ValueError):
        pop.h_dac(501, pop.zipf_pmf(0, 1000))


def test_mpc_assignment():
    pm = pop.zipf_pmf(0.6, 100)
    a = pop.mpc_assignment(10, pm)
    assert a.cache_a == tuple(range(1, 11)) and a.cache_b == ()
    assert a.h_a == pytest.approx(pop.h_mpc(10, pm))


def test_partition_single_pair():
    a = pop.dac_partition(1, pop.zipf_pmf(0.7, 10))
    assert a.cache_a == (1,) and a.cache_b == (2,)


def test_partition_four_contents():
    a = pop.dac_partition(2, pop.zipf_pmf(1.0, 4))
    assert a.cache_a == (1, 4) and a.cache_b == (2, 3)
    assert a.imbalance == pytest.approx(0.2, abs=1e-14)


def test_partition_uniform_is_balanced():
    a = pop.dac_partition(3, pop.zipf_pmf(0.0, 10))
    assert a.h_a == pytest.approx(a.h_b, abs=1e-15)


def test_partition_rejects_oversized_cache():
    with pytest.raises(ValueError):
        pop.dac_partition(6, pop.zipf_pmf(1.0, 11))


def _brute_force_gap(q, K):
    total = q[: 2 * K].sum()
    return min(abs(2 * q[list(c)].sum() - total) for c in itertools.combinations(range(2 * K), K))


@pytest.mark.parametrize("xi", [0.3, 0.7, 1.1])
@pytest.mark.parametrize("K", range(1, 9))
def test_heuristic_matches_exhaustive(K, xi):
    q = np.asarray(pop.zipf_pmf(xi, 50).pmf)
    a, b = pop.heuristic_partition(q, K)
    assert abs(q[a].sum() - q[b].sum()) <= _brute_force_gap(q, K) + 1e-15


@pytest.mark.parametrize("K", [3, 6, 9, 12])
def test_exact_partition_is_optimal(K):
    q = np.asarray(pop.zipf_pmf(0.9, 40).pmf)
    ea, eb = pop.exact_partition(q, K)
    assert sorted(ea + eb) == list(range(2 * K)) and len(ea) == K
    if K <= 9:
        assert abs(q[ea].sum() - q[eb].sum()) == pytest.approx(_brute_force_gap(q, K), abs=1e-15)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.floats(0, 2.5))
def test_partition_invariants(K, xi):
    pm = pop.zipf_pmf(xi, 2 * K + 5)
    a = pop.dac_partition(K, pm)
    A, B = set(a.cache_a), set(a.cache_b)
    assert len(A) == len(B) == K and not A & B and A | B == set(range(1, 2 * K + 1))
    assert a.h_a >= a.h_b
    assert a.e_a == a.h_b and a.e_b == a.h_a
    assert a.h_a + a.h_b == pytest.approx(2 * pop.h_dac(K, pm), rel=1e-12)


def test_large_partitions_are_fast_and_tight():
    for K in (50, 100, 200):
        for xi in (0.4, 1.0):
            a = pop.dac_partition(K, pop.zipf_pmf(xi, 1000))
            assert a.imbalance < 1e-9


@pytest.mark.parametrize("K, L, xi", [(1, 3, 1.0), (2, 5, 0.8), (2, 4, 0.0)])
def test_pareto_examples(K, L, xi):
    assert pop.verify_partition_pareto(K, pop.zipf_pmf(xi, L))


def test_pareto_rejects_large_instance():
    with pytest.raises(ValueError):
        pop.verify_partition_pareto(5, pop.zipf_pmf(1.0, 40))


def test_exchange_probabilities():
    pm = pop.zipf_pmf(1.0, 4)
    ea, eb = pop.exchange_probabilities((1, 4), (2, 3), pm)
    assert ea == pytest.approx(0.4) and eb == pytest.approx(0.6)


def test_h_ratio_examples():
    assert pop.h_ratio(100, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert pop.h_ratio(10 ** 6, 2.0) == pytest.approx(0.5, abs=1e-3)
    assert pop.h_ratio_limit(0.0) == 1.0
    assert pop.h_ratio_limit(2.0) == 0.5
    assert pop.h_ratio_limit(0.5) == pytest.approx(0.70711, abs=1e-5)


def test_h_ratio_ignores_library_size():
    assert pop.h_ratio(20, 0.8, L=100) == pop.h_ratio(20, 0.8, L=10 ** 5)
    assert pop.h_ratio(20, 0.8) == pytest.approx(
        pop.h_dac(20, pop.zipf_pmf(0.8, 77)) / pop.h_mpc(20, pop.zipf_pmf(0.8, 77)), rel=1e-13)


def test_h_ratio_decreasing_in_K():
    K = np.arange(1, 10_001)
    for xi in np.round(np.arange(0.1, 2.01, 0.1), 1):
        w = K.astype(float) ** (-xi)
        c = np.cumsum(np.concatenate([w, (np.arange(10_001, 20_001, dtype=float)) ** (-xi)]))
        ratio = 0.5 * c[2 * K - 1] / c[K - 1]
        assert np.all(np.diff(ratio) < 0), xi
        # spot-check the vectorized form against the library function
        assert ratio[99] == pytest.approx(pop.h_ratio(100, xi), rel=1e-12)


@given(st.integers(1, 2000), st.floats(0, 3), st.floats(0, 3))
def test_h_ratio_decreasing_in_xi(K, x1, x2):
    if K == 1 or abs(x1 - x2) < 1e-6:
        return
    lo, hi = sorted((x1, x2))
    assert pop.h_ratio(K, lo) > pop.h_ratio(K, hi)


@given(st.integers(1, 5000), st.floats(0, 4))
def test_h_ratio_bounds(K, xi):
    r = pop.h_ratio(K, xi)
    assert 0.5 < r <= 1.0 + 1e-15
    assert pop.h_ratio_limit(xi) <= r + 1e-12


def test_offloading_factors():
    pm0 = pop.zipf_pmf(0.0, 1000)
    assert pop.offloading_factor("DAC", 0.0, 100, pm0) == pytest.approx(pop.h_dac(100, pm0))
    assert pop.offloading_factor("MPC", 0.7, 100, pm0) == pytest.approx(0.1, abs=1e-14)
    assert pop.offloading_factor("DAC", 1.0, 100, pm0) == pytest.approx(0.2, abs=1e-14)
    with pytest.raises(ValueError):
        pop.offloading_factor("LRU", 1.0, 100, pm0)


def test_offloading_gain_maximum():
    assert pop.offloading_gain(1.0, 100, 0.0) == pytest.approx(2.0, abs=1e-12)


def test_min_delta():
    assert pop.min_delta_for_gain(100, 0.0) == 0.0
    # h_ratio > 1/2, so the required pairing fraction never exceeds 1
    assert 0.99 < pop.min_delta_for_gain(100, 3.0) < 1.0
    for xi in (0.2, 0.6, 0.9):
        d = pop.min_delta_for_gain(100, xi)
        assert pop.offloading_gain(d, 100, xi) == pytest.approx(1.0, rel=1e-12)


def test_xi_threshold_inverts_min_delta():
    for delta in (0.5, 0.75, 1.0):
        xi = pop.xi_threshold(delta, 100)
        assert pop.min_delta_for_gain(100, xi) == pytest.approx(delta, abs=1e-3)
    assert pop.xi_threshold(0.0, 100) == 0.0
