"""Drop-based simulator for the cellular and D2D links.

Each drop places a target UE at the origin on top of freshly sampled BS and
UE processes, draws its request, and measures the link that would serve it.
All per-drop randomness comes from ``default_rng([master_seed, drop_index])``
so campaigns are reproducible for any degree of parallelism.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import popularity as pop
from .analytics import delay_grid, normalized_noise, rate_grid
from .channel import interferer_gains, p_los
from .config import SystemParams
from .geometry import build_drop, window_half_width

LOAD_RADIUS = 250.0   # [m] beyond this a UE needs an empty 250 m disk to stay in the cell
MODES = ("hd", "fd")
POLICIES = ("MPC", "DAC")
Z95 = 1.959963984540054


@dataclass(frozen=True)
class DropRecord:
    policy: str
    target_role: str
    request_outcome: str        # "hit", "d2d" or "cellular"
    sinr_linear: float          # SINR of the serving link, nan on a hit
    load: int
    rate: float                 # served rate [bit/s], inf on a hit
    delay: float                # [s]
    psi: str                    # "1", "1/2" or "fd"; "" when no D2D link exists
    sinr_cell: float = math.nan
    snr_cell: float = math.nan
    sinr_d2d: float = math.nan
    rate_cell: float = math.nan
    rate_d2d: float = math.nan
    both_active: float = math.nan  # FD: fraction of other pairs with both ends transmitting

    def __post_init__(self):
        if self.request_outcome == "hit" and self.delay != 0:
            raise ValueError("a cache hit has zero delay")
        if self.load < 1:
            raise ValueError("the target is always counted in its cell")


@dataclass
class DropContext:
    """Per-campaign constants shared by all drops."""

    params: SystemParams
    policy: str
    mode: str
    pm: pop.PopularityModel
    assignment: pop.CacheAssignment
    in_a: np.ndarray            # in_a[c] is True if content c (1-based) is in cache A
    in_b: np.ndarray
    half_width: float
    n_hat_d2d: float
    si_scale: float             # normalized SI per unit SI gain

    @property
    def h_a(self) -> float:
        return self.assignment.h_a

    @property
    def h_b(self) -> float:
        return self.assignment.h_b


def make_context(params: SystemParams, policy: str, mode: str = "hd",
                 half_width: float | None = None) -> DropContext:
    policy = policy.upper().replace("HD-", "").replace("FD-", "")
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    pm = pop.zipf_pmf(params.xi, params.lib_size)
    K = params.cache_size
    if policy == "MPC":
        asg = pop.mpc_assignment(K, pm)
    else:
        asg = pop.dac_partition(K, pm)
        if not asg.h_a + asg.h_b <= 1.0 + 1e-12:
            raise ValueError("partition masses exceed one")
    in_a = np.zeros(pm.L + 1, dtype=bool)
    in_b = np.zeros(pm.L + 1, dtype=bool)
    in_a[list(asg.cache_a)] = True
    in_b[list(asg.cache_b)] = True
    hw = window_half_width(params) if half_width is None else half_width
    si_scale = (4 * math.pi / (params.wavelength * params.g_ue_max)) ** 2
    return DropContext(params, policy, mode, pm, asg, in_a, in_b, hw,
                       normalized_noise(params, "d2d").n_hat, si_scale)


# single drop -----------------------------------------------------------------

def _bearing(xy):
    return np.arctan2(xy[..., 1], xy[..., 0])


def _cellular_link(ctx: DropContext, bs: np.ndarray, rng):
    """Serving index, distance, SNR and full SINR for the target."""
    p = ctx.params
    d = np.hypot(bs[:, 0], bs[:, 1])
    serving = int(np.argmin(d))
    los = rng.random(len(d)) < p_los(d, p.r_los)
    alpha = np.where(los, p.a_los, p.a_nlos)
    eta = rng.standard_exponential(len(d))
    theta = _bearing(bs)
    gains = interferer_gains(theta - theta[serving], rng, p.dtheta_bs, p.g_bs_max, p.g_bs_min,
                             p.dtheta_ue, p.g_ue_max, p.g_ue_min)
    gains[serving] = p.g_bs_max * p.g_ue_max
    power = p.path_gain_1m * p.p_bs * gains * eta * d ** (-alpha)
    signal = power[serving]
    interference = power.sum() - signal
    snr = signal / p.noise_cell
    sinr = signal / (interference + p.noise_cell)
    return serving, d[serving], snr, sinr


def _cellular_flags(ctx: DropContext, drop, rng) -> np.ndarray:
    """Which non-target UEs are currently served by a BS."""
    n_u, n_p = len(drop.ue_unpaired), len(drop.pairs_1)
    n_total = n_u + 2 * n_p + (1 if drop.peer is not None else 0)
    if ctx.policy == "MPC":
        prob = np.full(n_total, 1.0 - ctx.assignment.h_a)
    else:
        group_a = rng.random(n_u) < 0.5
        prob = np.empty(n_total)
        prob[:n_u] = np.where(group_a, 1.0 - ctx.h_a, 1.0 - ctx.h_b)
        prob[n_u:] = max(1.0 - ctx.h_a - ctx.h_b, 0.0)
    return rng.random(n_total) < prob


def _cell_load(ctx: DropContext, drop, serving: int, rng) -> int:
    flags = _cellular_flags(ctx, drop, rng)
    ues = drop.all_ues()[flags]
    bs = drop.bs
    near = np.hypot(ues[:, 0] - bs[serving, 0], ues[:, 1] - bs[serving, 1]) <= LOAD_RADIUS
    ues = ues[near]
    if len(ues) == 0:
        return 1
    _, idx = cKDTree(bs).query(ues)
    return 1 + int(np.count_nonzero(idx == serving))


def _d2d_transmitters(ctx: DropContext, drop, rng):
    """Transmitting pair ends and the peers they point at."""
    p1, p2 = drop.pairs_1, drop.pairs_2
    n = len(p1)
    end1_a = rng.random(n) < 0.5
    h1 = np.where(end1_a, ctx.h_a, ctx.h_b)   # content held by end 1
    h2 = np.where(end1_a, ctx.h_b, ctx.h_a)
    want1 = rng.random(n) < h2                # end 1 asks end 2
    want2 = rng.random(n) < h1
    if ctx.mode == "hd":
        # one transmitter per active pair, picked at random if both want
        pick2 = want1 & (~want2 | (rng.random(n) < 0.5))
        active = want1 | want2
        tx = np.where(pick2[:, None], p2, p1)[active]
        rx = np.where(pick2[:, None], p1, p2)[active]
        both = 0
    else:
        tx = np.concatenate([p2[want1], p1[want2]])
        rx = np.concatenate([p1[want1], p2[want2]])
        both = int(np.count_nonzero(want1 & want2))
    return tx, rx, both, n


def _d2d_link(ctx: DropContext, drop, rng):
    """SINR at the target for a transmission from its peer."""
    p = ctx.params
    peer = drop.peer
    tx, rx, both, n_pairs = _d2d_transmitters(ctx, drop, rng)
    r0 = float(np.hypot(*peer))
    los0 = rng.random() < math.exp(-r0 / p.r_los)
    signal = rng.standard_exponential() * r0 ** (-(p.a_los if los0 else p.a_nlos))

    d = np.hypot(tx[:, 0], tx[:, 1])
    los = rng.random(len(d)) < p_los(d, p.r_los)
    alpha = np.where(los, p.a_los, p.a_nlos)
    eta = rng.standard_exponential(len(d))
    beam = math.atan2(peer[1], peer[0])
    tx_offset = _bearing(-tx) - _bearing(rx - tx)
    g = interferer_gains(_bearing(tx) - beam, rng, p.dtheta_ue, p.g_ue_max, p.g_ue_min,
                         p.dtheta_ue, p.g_ue_max, p.g_ue_min, tx_offset=tx_offset) / p.g_ue_max ** 2
    interference = float(np.sum(g * eta * d ** (-alpha)))
    noise = ctx.n_hat_d2d
    if ctx.mode == "fd":
        noise += ctx.si_scale * p.kappa_si * rng.standard_exponential()
    return signal / (interference + noise), both, n_pairs


def _target_role(ctx: DropContext, rng) -> str:
    delta = ctx.params.delta
    if ctx.policy == "MPC":
        return "cellular-only"
    if delta > 0 and rng.random() < delta:
        return "paired_A" if rng.random() < 0.5 else "paired_B"
    return "unpaired"


def simulate_drop(params: SystemParams, policy: str, mode: str, rng: np.random.Generator,
                  context: DropContext | None = None) -> DropRecord:
    """One drop: geometry, request, and the serving link's rate and delay."""
    ctx = context if context is not None else make_context(params, policy, mode)
    p = ctx.params
    role = _target_role(ctx, rng)
    # under MPC the target still belongs to a pair w.p. delta; its partner
    # only shows up in the cell load
    partnered = ctx.policy == "MPC" and p.delta > 0 and rng.random() < p.delta
    drop = build_drop(p, role, rng, ctx.half_width, with_peer=partnered)
    if len(drop.bs) == 0:
        raise RuntimeError("drop contains no base station; enlarge the window")

    serving, _, snr, sinr_cell = _cellular_link(ctx, drop.bs, rng)
    load = _cell_load(ctx, drop, serving, rng)
    rate_cell = p.bw_cell / load * math.log2(1.0 + sinr_cell)

    request = int(ctx.pm.sample(rng))
    own_a = role != "paired_B" if role != "unpaired" else rng.random() < 0.5
    if ctx.policy == "MPC":
        hit, via_peer = bool(ctx.in_a[request]), False
    else:
        own = ctx.in_a if own_a else ctx.in_b
        other = ctx.in_b if own_a else ctx.in_a
        hit = bool(own[request])
        via_peer = drop.is_paired and not hit and bool(other[request])

    sinr_d2d = rate_d2d = math.nan
    psi, both = "", math.nan
    if drop.is_paired and ctx.policy != "MPC":
        sinr_d2d, n_both, n_pairs = _d2d_link(ctx, drop, rng)
        if ctx.mode == "fd" and n_pairs:
            both = n_both / n_pairs
        # the peer's own request decides whether it competes for the link
        peer_h = ctx.h_a if own_a else ctx.h_b   # mass held by the target
        peer_wants = rng.random() < peer_h
        if ctx.mode == "hd":
            factor = 0.5 if peer_wants else 1.0
            psi = "1/2" if peer_wants else "1"
        else:
            factor, psi = 1.0, "fd"
        rate_d2d = factor * p.bw_d2d * math.log2(1.0 + sinr_d2d)

    if hit:
        outcome, link_sinr, rate, delay = "hit", math.nan, math.inf, 0.0
    elif via_peer:
        outcome, link_sinr, rate = "d2d", sinr_d2d, rate_d2d
        delay = p.sigma_file / rate
    else:
        outcome, link_sinr, rate = "cellular", sinr_cell, rate_cell
        delay = p.sigma_file / rate
    return DropRecord(ctx.policy if ctx.policy == "MPC" else f"{ctx.mode.upper()}-DAC", role,
                      outcome, link_sinr, load, rate, delay, psi, sinr_cell, snr, sinr_d2d,
                      rate_cell, rate_d2d, both)


def drop_rng(master_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(master_seed), int(index)])


# campaigns -------------------------------------------------------------------

@dataclass
class SimulationSummary:
    n_drops: int
    policy: str
    mode: str
    master_seed: int
    rate_grid: np.ndarray
    delay_grid: np.ndarray
    cell_rate_ccdf: np.ndarray      # over all drops
    d2d_rate_ccdf: np.ndarray       # over paired drops (nan if none)
    delay_cdf: np.ndarray
    offloading_fraction: float
    outcome_counts: dict
    samples: dict = field(repr=False)

    def ci_half_width(self, p) -> np.ndarray:
        """95% normal-approximation half-width for an empirical probability."""
        return Z95 * np.sqrt(np.asarray(p) * (1 - np.asarray(p)) / self.n_drops)

    def quantile(self, name: str, q: float) -> float:
        x = self.samples[name]
        x = x[~np.isnan(x)]
        return float(np.quantile(x, q))

    def delay_percentile(self, q: float) -> float:
        return float(np.quantile(self.samples["delay"], q, method="inverted_cdf"))


def _ccdf(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    x = np.sort(samples[~np.isnan(samples)])
    if len(x) == 0:
        return np.full(len(grid), np.nan)
    return 1.0 - np.searchsorted(x, grid, side="right") / len(x)


def _cdf_strict(samples: np.ndarray, grid: np.ndarray) -> np.ndarray:
    # P(X < d)
    x = np.sort(samples)
    return np.searchsorted(x, grid, side="left") / len(x)


def _run_chunk(args):
    params, policy, mode, seed, start, stop, half_width = args
    ctx = make_context(params, policy, mode, half_width)
    return [simulate_drop(params, policy, mode, drop_rng(seed, i), ctx) for i in range(start, stop)]


def run_records(params: SystemParams, policy: str, mode: str, n_drops: int,
                master_seed: int, parallelism: int = 1, half_width: float | None = None,
                chunk: int = 2000) -> list[DropRecord]:
    """Simulate drops 0..n_drops-1 and return their records in index order."""
    if n_drops < 1:
        raise ValueError("need at least one drop")
    tasks = [(params, policy, mode, master_seed, a, min(a + chunk, n_drops), half_width)
             for a in range(0, n_drops, chunk)]
    if parallelism <= 1 or len(tasks) == 1:
        parts = [_run_chunk(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            parts = list(pool.map(_run_chunk, tasks))
    return [r for part in parts for r in part]


def summarize(records: list[DropRecord], policy: str, mode: str, master_seed: int,
              rgrid=None, dgrid=None) -> SimulationSummary:
    rgrid = rate_grid() if rgrid is None else np.asarray(rgrid)
    dgrid = delay_grid() if dgrid is None else np.asarray(dgrid)
    cols = {
        "sinr_cell": np.array([r.sinr_cell for r in records]),
        "snr_cell": np.array([r.snr_cell for r in records]),
        "sinr_d2d": np.array([r.sinr_d2d for r in records]),
        "load": np.array([r.load for r in records]),
        "rate_cell": np.array([r.rate_cell for r in records]),
        "rate_d2d": np.array([r.rate_d2d for r in records]),
        "delay": np.array([r.delay for r in records]),
        "both_active": np.array([r.both_active for r in records]),
        "paired": np.array([r.target_role.startswith("paired") for r in records]),
    }
    outcomes = [r.request_outcome for r in records]
    counts = {k: outcomes.count(k) for k in ("hit", "d2d", "cellular")}
    n = len(records)
    return SimulationSummary(
        n_drops=n, policy=policy, mode=mode, master_seed=master_seed,
        rate_grid=rgrid, delay_grid=dgrid,
        cell_rate_ccdf=_ccdf(cols["rate_cell"], rgrid),
        d2d_rate_ccdf=_ccdf(cols["rate_d2d"], rgrid),
        delay_cdf=_cdf_strict(cols["delay"], dgrid),
        offloading_fraction=(counts["hit"] + counts["d2d"]) / n,
        outcome_counts=counts, samples=cols)


def run_campaign(params: SystemParams, policy: str, mode: str = "hd", n_drops: int = 100_000,
                 master_seed: int = 0, parallelism: int = 1,
                 half_width: float | None = None) -> SimulationSummary:
    """Aggregate ``n_drops`` independent drops into empirical distributions."""
    records = run_records(params, policy, mode, n_drops, master_seed, parallelism, half_width)
    return summarize(records, policy, mode, master_seed)


def dump_records_csv(records: list[DropRecord], path: str | Path, mode: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["drop_id", "policy", "mode", "role", "outcome", "sinr_db", "load",
                    "rate_bps", "delay_s", "psi"])
        for i, r in enumerate(records):
            sinr_db = 10 * math.log10(r.sinr_linear) if r.sinr_linear > 0 else math.nan
            w.writerow([i, r.policy, mode, r.target_role, r.request_outcome, repr(sinr_db),
                        r.load, repr(r.rate), repr(r.delay), r.psi])


# full-duplex interference oracle ---------------------------------------------

@dataclass(frozen=True)
class LaplaceEstimate:
    s: np.ndarray
    values: np.ndarray
    ci_half_width: np.ndarray


def _fd_conditional_laplace(ctx: DropContext, rng, s: np.ndarray) -> np.ndarray:
    """E[exp(-s I) | positions, beam directions] for one FD interference field.

    Fading and LOS states are independent per link, so they are averaged in
    closed form; only the geometry and the beam directions are sampled.
    """
    p = ctx.params
    hw = ctx.half_width
    n = rng.poisson(p.lambda_p * (2 * hw) ** 2)
    p1 = rng.uniform(-hw, hw, (n, 2))
    r, phi = p.r_d2d_max * np.sqrt(rng.random(n)), rng.uniform(0, 2 * math.pi, n)
    p2 = p1 + np.column_stack([r * np.cos(phi), r * np.sin(phi)])
    end1_a = rng.random(n) < 0.5
    h1 = np.where(end1_a, ctx.h_a, ctx.h_b)
    h2 = np.where(end1_a, ctx.h_b, ctx.h_a)
    want1 = rng.random(n) < h2
    want2 = rng.random(n) < h1
    tx = np.concatenate([p2[want1], p1[want2]])
    rx = np.concatenate([p1[want1], p2[want2]])
    beam = rng.uniform(-math.pi, math.pi)
    tx_offset = _bearing(-tx) - _bearing(rx - tx)
    g = interferer_gains(_bearing(tx) - beam, rng, p.dtheta_ue, p.g_ue_max, p.g_ue_min,
                         p.dtheta_ue, p.g_ue_max, p.g_ue_min, tx_offset=tx_offset) / p.g_ue_max ** 2
    d = np.hypot(tx[:, 0], tx[:, 1])
    pl = p_los(d, p.r_los)
    x = s[:, None] * g[None, :]
    per_link = pl / (1 + x * d ** (-p.a_los)) + (1 - pl) / (1 + x * d ** (-p.a_nlos))
    return np.exp(np.sum(np.log(per_link), axis=1))


def empirical_laplace_fd(params: SystemParams, s_grid, n_drops: int, rng: np.random.Generator,
                         half_width: float | None = None) -> LaplaceEstimate:
    """Monte-Carlo E[exp(-s I_fd)] with both ends of each pair as transmitters."""
    s = np.asarray(s_grid, dtype=float)
    ctx = make_context(params, "DAC", "fd", half_width)
    vals = np.array([_fd_conditional_laplace(ctx, rng, s) for _ in range(n_drops)])
    mean = vals.mean(axis=0)
    half = Z95 * vals.std(axis=0, ddof=1) / math.sqrt(n_drops) if n_drops > 1 else np.zeros_like(mean)
    return LaplaceEstimate(s, mean, half)


# request-only sampling -------------------------------------------------------

def simulate_offloading(params: SystemParams, policy: str, n_requests: int,
                        rng: np.random.Generator) -> float:
    """Fraction of requests served without the cellular link.

    Serving decisions depend only on cache contents and pairing, so no
    geometry is sampled here.
    """
    ctx = make_context(params, policy)
    req = ctx.pm.sample(rng, n_requests)
    if ctx.policy == "MPC":
        return float(np.mean(ctx.in_a[req]))
    paired = rng.random(n_requests) < params.delta
    own_a = rng.random(n_requests) < 0.5
    own = np.where(own_a, ctx.in_a[req], ctx.in_b[req])
    other = np.where(own_a, ctx.in_b[req], ctx.in_a[req])
    return float(np.mean(own | (paired & other)))
