import csv
import math

import numpy as np
import pytest

from mmcache import analytics as an
from mmcache import montecarlo as mc
from mmcache.config import SystemParams

P = SystemParams(xi=0.4, cache_size=200, delta=1.0)
SMALL_WINDOW = 300.0   # geometry-insensitive checks run on a smaller window


def _three_sigma(p, n):
    return 3 * math.sqrt(p * (1 - p) / n)


def test_record_invariants():
    ctx = mc.make_context(P, "DAC", "hd", SMALL_WINDOW)
    for i in range(300):
        r = mc.simulate_drop(P, "DAC", "hd", mc.drop_rng(1, i), ctx)
        assert r.request_outcome in ("hit", "d2d", "cellular")
        assert r.load >= 1
        if r.request_outcome == "hit":
            assert r.delay == 0.0 and r.rate == math.inf
        else:
            assert r.delay == pytest.approx(P.sigma_file / r.rate)
        if r.request_outcome == "d2d":
            assert r.target_role.startswith("paired") and r.psi in ("1", "1/2")


def test_record_validation():
    with pytest.raises(ValueError):
        mc.DropRecord("MPC", "unpaired", "hit", math.nan, 1, math.inf, 1.0, "", 1, 1, math.nan,
                      1, math.nan, math.nan)


def test_no_pairs_no_d2d():
    s = mc.run_campaign(P.replace(delta=0.0), "DAC", "hd", 2000, 3, half_width=SMALL_WINDOW)
    assert s.outcome_counts["d2d"] == 0
    assert sum(s.outcome_counts.values()) == s.n_drops


def test_mpc_uniform_hit_rate():
    p = SystemParams(xi=0.0, cache_size=100)
    s = mc.run_campaign(p, "MPC", "hd", 10_000, 4, half_width=SMALL_WINDOW)
    assert s.outcome_counts["hit"] / s.n_drops == pytest.approx(0.10, abs=0.01)
    assert s.outcome_counts["d2d"] == 0


def test_dac_outcome_frequencies():
    s = mc.run_campaign(P, "DAC", "hd", 10_000, 5, half_width=SMALL_WINDOW)
    hit, d2d, cell = an.delay_weights(P, "HD-DAC")
    n = s.n_drops
    assert s.outcome_counts["d2d"] / n == pytest.approx(0.286, abs=0.01)
    for key, w in (("hit", hit), ("d2d", d2d), ("cellular", cell)):
        assert abs(s.outcome_counts[key] / n - w) < _three_sigma(w, n), key


def test_offloading_doubles_at_uniform_popularity():
    p = SystemParams(xi=0.0, cache_size=100, delta=1.0)
    s = mc.run_campaign(p, "DAC", "hd", 5000, 6, half_width=SMALL_WINDOW)
    assert s.offloading_fraction == pytest.approx(0.2, abs=0.01)
    assert mc.simulate_offloading(p, "DAC", 200_000, np.random.default_rng(0)) == pytest.approx(0.2, abs=0.003)
    assert mc.simulate_offloading(p, "MPC", 200_000, np.random.default_rng(0)) == pytest.approx(0.1, abs=0.003)


def test_campaign_independent_of_parallelism():
    a = mc.run_records(P, "DAC", "fd", 600, 11, parallelism=1, half_width=SMALL_WINDOW, chunk=150)
    b = mc.run_records(P, "DAC", "fd", 600, 11, parallelism=2, half_width=SMALL_WINDOW, chunk=150)
    c = mc.run_records(P, "DAC", "fd", 600, 11, parallelism=1, half_width=SMALL_WINDOW, chunk=600)
    assert repr(a) == repr(b) == repr(c)


def test_hd_one_transmitter_per_pair(rng):
    from mmcache.geometry import build_drop
    ctx = mc.make_context(P, "DAC", "hd", SMALL_WINDOW)
    for _ in range(20):
        drop = build_drop(P, "paired_A", rng, SMALL_WINDOW)
        tx, rx, both, n = mc._d2d_transmitters(ctx, drop, rng)
        assert both == 0 and len(tx) <= n
        # each transmitter's receiver is its own partner
        assert np.all(np.hypot(*(tx - rx).T) <= P.r_d2d_max + 1e-9)
        ends = {tuple(x) for x in tx} | {tuple(x) for x in rx}
        assert len(ends) == 2 * len(tx)


def test_hd_activity_rate(rng):
    from mmcache.geometry import build_drop
    ctx = mc.make_context(P, "DAC", "hd", SMALL_WINDOW)
    h = an.hit_probabilities(P)[1]
    active = total = 0
    for _ in range(50):
        drop = build_drop(P, "paired_A", rng, SMALL_WINDOW)
        tx, _, _, n = mc._d2d_transmitters(ctx, drop, rng)
        active += len(tx)
        total += n
    assert active / total == pytest.approx(h * (2 - h), abs=_three_sigma(h * (2 - h), total))


def test_fd_both_active_fraction():
    s = mc.run_campaign(P, "DAC", "fd", 2000, 8, half_width=SMALL_WINDOW)
    h = an.hit_probabilities(P)[1]
    frac = np.nanmean(s.samples["both_active"])
    assert frac == pytest.approx(h * h, abs=0.01)
    assert frac == pytest.approx(0.082, abs=0.005)


def test_fd_laplace_trivial_cases(rng):
    est = mc.empirical_laplace_fd(P, [0.0, 1e5], 50, rng, half_width=SMALL_WINDOW)
    assert est.values[0] == 1.0
    none = mc.empirical_laplace_fd(P.replace(delta=0.0), [1e3, 1e6], 20, rng, half_width=SMALL_WINDOW)
    assert np.all(none.values == 1.0)


def test_fd_laplace_inside_bounds(rng):
    s = np.geomspace(1e3, 1e7, 6)
    est = mc.empirical_laplace_fd(P, s, 1500, rng, half_width=SMALL_WINDOW)
    lo, hi = an.fd_laplace_bounds(s, P)
    assert np.all(est.values >= lo - 2 * est.ci_half_width)
    assert np.all(est.values <= hi + 2 * est.ci_half_width)


def test_simulated_si_matches_mean_form(rng):
    # the FD link adds c * kappa * Exp(1) to the noise, whose transform is the mean form
    ctx = mc.make_context(P, "DAC", "fd")
    si = ctx.si_scale * P.kappa_si * rng.standard_exponential(200_000)
    for s in (1e3, 1e4):
        assert np.mean(np.exp(-s * si)) == pytest.approx(an.si_laplace(s, P, "mean"), abs=0.005)
        assert abs(np.mean(np.exp(-s * si)) - an.si_laplace(s, P, "literal")) > 0.1


def test_mpc_target_partner_counts_in_load():
    ctx = mc.make_context(P, "MPC", "hd", SMALL_WINDOW)
    roles = set()
    for i in range(200):
        r = mc.simulate_drop(P, "MPC", "hd", mc.drop_rng(2, i), ctx)
        roles.add(r.target_role)
        assert math.isnan(r.sinr_d2d) and r.request_outcome != "d2d"
    assert roles == {"cellular-only"}


def test_summary_contents():
    s = mc.run_campaign(P, "DAC", "hd", 500, 9, half_width=SMALL_WINDOW)
    assert s.rate_grid.shape == (201,) and s.delay_grid.shape == (201,)
    assert np.all(np.diff(s.cell_rate_ccdf) <= 0) and np.all(np.diff(s.delay_cdf) >= 0)
    assert s.cell_rate_ccdf[0] == 1.0
    assert s.delay_percentile(0.1) == 0.0
    assert s.ci_half_width(0.5) == pytest.approx(1.959964 * math.sqrt(0.25 / 500), rel=1e-5)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        mc.make_context(P, "LRU")
    with pytest.raises(ValueError):
        mc.make_context(P, "DAC", "xd")
    with pytest.raises(ValueError):
        mc.run_records(P, "DAC", "hd", 0, 1)


def test_records_csv(tmp_path):
    recs = mc.run_records(P, "DAC", "hd", 50, 10, half_width=SMALL_WINDOW)
    path = tmp_path / "records.csv"
    mc.dump_records_csv(recs, path, "hd")
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["drop_id", "policy", "mode", "role", "outcome", "sinr_db", "load", "rate_bps",
                       "delay_s", "psi"]
    assert len(rows) == 51 and rows[1][0] == "0"
