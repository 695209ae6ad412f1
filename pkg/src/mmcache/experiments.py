"""Experiment definitions: parameter sweeps written out as CSV tables.

Every experiment writes one CSV per curve plus ``manifest.json`` with the
resolved parameters, the seed and SHA-256 hashes of inputs and outputs.
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import analytics as an
from . import montecarlo as mc
from . import popularity as pop
from .config import SystemParams, as_dict, dump_params

EXPERIMENTS = ("fig2_hratio", "fig3_gain_vs_xi", "fig4_min_delta", "fig5_gain_vs_K",
               "fig6_hd_rate_delay", "fig7_fd_rate_delay", "fig8_fd_high_xi",
               "fig9_delay_percentiles", "validate")

XI_GRID = np.round(np.arange(0.0, 2.0 + 1e-9, 0.02), 2)
XI_COARSE = np.round(np.arange(0.0, 2.0 + 1e-9, 0.1), 1)
OFFLOAD_REQUESTS = 200_000

# default sweeps; CLI flags replace the matching entry
DEFAULT_SWEEPS = {
    "fig2_hratio": {"xi": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0]},
    "fig3_gain_vs_xi": {"delta": [0.5, 0.75, 1.0], "K": [100], "xi": list(XI_GRID)},
    "fig4_min_delta": {"K": [50, 100, 200], "xi": list(XI_GRID)},
    "fig5_gain_vs_K": {"delta": [0.75], "xi": [0.3, 0.6, 0.9]},
    "fig6_hd_rate_delay": {"delta": [1.0], "K": [200], "xi": [0.4]},
    "fig7_fd_rate_delay": {"delta": [1.0], "K": [200], "xi": [0.4]},
    "fig8_fd_high_xi": {"delta": [1.0], "K": [200], "xi": [1.0]},
    "fig9_delay_percentiles": {"delta": [0.5, 0.75, 1.0], "K": [50, 100, 200],
                               "xi": list(XI_COARSE)},
    "validate": {"delta": [1.0], "K": [200], "xi": [0.4]},
}
DEFAULT_DROPS = {"fig9_delay_percentiles": 10_000}


class UsageError(ValueError):
    """Raised for malformed experiment requests."""


@dataclass
class ExperimentSpec:
    name: str
    base: SystemParams
    sweep: dict = field(default_factory=dict)
    n_drops: int | None = None
    seed: int = 0
    output_dir: Path = Path("results")
    jobs: int = 1
    psi_mode: str = "random"
    k_order: int = an.DEFAULT_ORDER

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise UsageError(f"unknown experiment {self.name!r}; choose from {', '.join(EXPERIMENTS)}")
        merged = {k: list(v) for k, v in DEFAULT_SWEEPS[self.name].items()}
        for key, values in self.sweep.items():
            values = list(values)
            if not values:
                raise UsageError(f"empty sweep for {key!r}")
            if not all(math.isfinite(float(v)) for v in values):
                raise UsageError(f"non-finite value in sweep for {key!r}")
            merged[key] = values
        self.sweep = merged
        if self.n_drops is None:
            self.n_drops = DEFAULT_DROPS.get(self.name, 100_000)
        if self.n_drops < 1:
            raise UsageError("--drops must be >= 1")
        if self.psi_mode not in an.PSI_MODES:
            raise UsageError(f"unknown psi mode {self.psi_mode!r}")
        if self.k_order < 0:
            raise UsageError("--k-order must be >= 0")
        self.output_dir = Path(self.output_dir)


# CSV output ------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to write non-finite value {x!r}")
    return f"{x:.12g}"


@dataclass
class Table:
    name: str
    columns: list
    rows: list = field(default_factory=list)
    probability_columns: tuple = ()

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"{self.name}: expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(values)

    def render(self) -> str:
        for col in self.probability_columns:
            j = self.columns.index(col)
            for row in self.rows:
                if not -1e-12 <= float(row[j]) <= 1 + 1e-12:
                    raise ValueError(f"{self.name}: {col} = {row[j]!r} is not a probability")
        lines = [",".join(self.columns)]
        lines += [",".join(_fmt(v) for v in row) for row in self.rows]
        return "\n".join(lines) + "\n"


def _sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def _write_outputs(spec: ExperimentSpec, tables: list[Table], extra: dict | None = None) -> list[Path]:
    out = spec.output_dir
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written, hashes = [], {}
    for t in tables:
        data = t.render().encode("utf-8")
        path = out / f"{spec.name}__{t.name}.csv"
        path.write_bytes(data)
        written.append(path)
        hashes[path.name] = _sha256(data)
    inputs = {
        "experiment": spec.name,
        "params": {k: (float(v) if isinstance(v, float) else v) for k, v in as_dict(spec.base).items()},
        "sweep": {k: [float(x) for x in v] for k, v in spec.sweep.items()},
        "n_drops": spec.n_drops,
        "seed": spec.seed,
        "psi_mode": spec.psi_mode,
        "k_order": spec.k_order,
    }
    canonical = json.dumps(inputs, sort_keys=True).encode("utf-8")
    manifest = {
        **inputs,
        "config": dump_params(spec.base),
        "input_sha256": _sha256(canonical),
        "outputs": hashes,
    }
    if extra:
        manifest["summary"] = extra
    mpath = out / f"{spec.name}__manifest.json"
    mpath.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    written.append(mpath)
    return written


def _tag(**kw) -> str:
    return "_".join(f"{k}{_fmt(v)}" for k, v in kw.items())


# offloading figures ----------------------------------------------------------

def _fig2(spec: ExperimentSpec):
    Ks = spec.sweep.get("K") or sorted({int(k) for k in np.round(np.geomspace(1, 1e4, 41))})
    tables = []
    for xi in spec.sweep["xi"]:
        t = Table(_tag(xi=xi), ["K", "h_ratio", "h_ratio_limit"])
        for K in Ks:
            t.add(int(K), pop.h_ratio(int(K), xi), pop.h_ratio_limit(xi))
        tables.append(t)
    return tables


def _fig3(spec: ExperimentSpec):
    rng = np.random.default_rng(spec.seed)
    tables = []
    for K in spec.sweep["K"]:
        for delta in spec.sweep["delta"]:
            t = Table(_tag(K=int(K), delta=delta),
                      ["xi", "F_gain_analytic", "F_gain_sim", "F_dac", "F_mpc"])
            for xi in spec.sweep["xi"]:
                p = spec.base.replace(xi=float(xi), cache_size=int(K), delta=float(delta))
                pm = pop.zipf_pmf(p.xi, p.lib_size)
                f_dac = pop.offloading_factor("DAC", p.delta, p.cache_size, pm)
                f_mpc = pop.offloading_factor("MPC", p.delta, p.cache_size, pm)
                sim_dac = mc.simulate_offloading(p, "DAC", OFFLOAD_REQUESTS, rng)
                sim_mpc = mc.simulate_offloading(p, "MPC", OFFLOAD_REQUESTS, rng)
                t.add(xi, pop.offloading_gain(p.delta, p.cache_size, p.xi), sim_dac / sim_mpc,
                      f_dac, f_mpc)
            tables.append(t)
    return tables


def _fig4(spec: ExperimentSpec):
    tables = []
    for K in list(spec.sweep["K"]) + ["inf"]:
        t = Table(_tag(K=K), ["xi", "min_delta", "feasible"])
        for xi in spec.sweep["xi"]:
            if K == "inf":
                d = 1.0 / pop.h_ratio_limit(xi) - 1.0
            else:
                d = 1.0 / pop.h_ratio(int(K), xi) - 1.0
            t.add(xi, max(d, 0.0), d <= 1.0)
        tables.append(t)
    return tables


def _fig5(spec: ExperimentSpec):
    Ks = spec.sweep.get("K") or list(range(1, spec.base.lib_size // 2 + 1))
    tables = []
    for delta in spec.sweep["delta"]:
        for xi in spec.sweep["xi"]:
            t = Table(_tag(delta=delta, xi=xi), ["K", "F_gain", "F_gain_limit"])
            limit = (1 + delta) * pop.h_ratio_limit(xi)
            for K in Ks:
                t.add(int(K), pop.offloading_gain(delta, int(K), xi), limit)
            tables.append(t)
    return tables


# rate / delay figures --------------------------------------------------------

def _point_params(spec: ExperimentSpec) -> list[SystemParams]:
    return [spec.base.replace(xi=float(xi), cache_size=int(K), delta=float(delta))
            for delta in spec.sweep["delta"] for K in spec.sweep["K"] for xi in spec.sweep["xi"]]


def _rate_delay(spec: ExperimentSpec, mode: str):
    tables, summary = [], {}
    rg, dg = an.rate_grid(), an.delay_grid()
    for p in _point_params(spec):
        tag = _tag(delta=p.delta, K=p.cache_size, xi=p.xi)
        sim = mc.run_campaign(p, "DAC", mode, spec.n_drops, spec.seed, spec.jobs)
        cell = an.cellular_rate_ccdf(rg, p, "DAC")
        policy = "HD-DAC" if mode == "hd" else "FD-DAC"
        if mode == "hd":
            d2d = an.hd_d2d_rate_ccdf(rg, p, spec.k_order, spec.psi_mode)
            t = Table(f"rate_{tag}", ["rate_bps", "cell_ccdf_analytic", "cell_ccdf_sim",
                                      "d2d_ccdf_analytic", "d2d_ccdf_sim"],
                      probability_columns=("cell_ccdf_analytic", "cell_ccdf_sim",
                                           "d2d_ccdf_analytic", "d2d_ccdf_sim"))
            for row in zip(rg, cell, sim.cell_rate_ccdf, d2d, sim.d2d_rate_ccdf):
                t.add(*row)
        else:
            lo, hi = an.fd_d2d_rate_ccdf_bounds(rg, p, spec.k_order)
            t = Table(f"rate_{tag}", ["rate_bps", "cell_ccdf_analytic", "cell_ccdf_sim",
                                      "d2d_ccdf_lower", "d2d_ccdf_upper", "d2d_ccdf_sim"],
                      probability_columns=("cell_ccdf_analytic", "cell_ccdf_sim",
                                           "d2d_ccdf_lower", "d2d_ccdf_upper", "d2d_ccdf_sim"))
            for row in zip(rg, cell, sim.cell_rate_ccdf, lo, hi, sim.d2d_rate_ccdf):
                t.add(*row)
        tables.append(t)
        delay = an.delay_cdf(dg, p, policy, spec.k_order, spec.psi_mode)
        td = Table(f"delay_{tag}", ["delay_s", "cdf_analytic", "cdf_sim"],
                   probability_columns=("cdf_analytic", "cdf_sim"))
        for row in zip(dg, delay, sim.delay_cdf):
            td.add(*row)
        tables.append(td)
        d2d_med = (np.interp(0.5, 1 - d2d, rg) if mode == "hd"
                   else np.interp(0.5, 1 - hi, rg))
        summary[tag] = {
            "median_cell_analytic_bps": float(np.interp(0.5, 1 - cell, rg)),
            "median_cell_sim_bps": sim.quantile("rate_cell", 0.5),
            "median_d2d_analytic_bps": float(d2d_med),
            "median_d2d_sim_bps": sim.quantile("rate_d2d", 0.5),
            "outcomes": sim.outcome_counts,
        }
    return tables, summary


def _fig9(spec: ExperimentSpec):
    tables = []
    for K in spec.sweep["K"]:
        t = Table(_tag(K=int(K)), ["xi", "mpc_analytic_s", "mpc_sim_s"]
                  + [c for d in spec.sweep["delta"]
                     for c in (f"hd_dac_delta{_fmt(d)}_analytic_s", f"hd_dac_delta{_fmt(d)}_sim_s")])
        for xi in spec.sweep["xi"]:
            row = [xi]
            p = spec.base.replace(xi=float(xi), cache_size=int(K))
            row.append(an.delay_percentile(0.9, p, "MPC", spec.k_order))
            row.append(mc.run_campaign(p, "MPC", "hd", spec.n_drops, spec.seed, spec.jobs)
                       .delay_percentile(0.9))
            for delta in spec.sweep["delta"]:
                q = p.replace(delta=float(delta))
                row.append(an.delay_percentile(0.9, q, "HD-DAC", spec.k_order, spec.psi_mode))
                row.append(mc.run_campaign(q, "DAC", "hd", spec.n_drops, spec.seed, spec.jobs)
                           .delay_percentile(0.9))
            t.add(*row)
        tables.append(t)
    return tables


# validation ------------------------------------------------------------------

SNR_GRID_DB = np.linspace(-10.0, 50.0, 121)


def sup_gap_ccdf(samples: np.ndarray, grid: np.ndarray, analytic: np.ndarray) -> float:
    x = np.sort(samples[~np.isnan(samples)])
    emp = 1.0 - np.searchsorted(x, grid, side="right") / len(x)
    return float(np.max(np.abs(emp - analytic)))


def load_tv_distance(loads: np.ndarray, params: SystemParams, policy: str) -> float:
    n_max = max(int(loads.max()), 1)
    n, pmf = an.load_support(an.lambda_cell(params, policy), params.lambda_bs, tail=1e-12)
    top = max(n_max, int(n[-1]))
    ana = np.zeros(top + 1)
    ana[n] = pmf
    emp = np.bincount(loads, minlength=top + 1) / len(loads)
    return 0.5 * float(np.abs(emp - ana).sum())


@dataclass
class Check:
    name: str
    value: float
    tolerance: float
    passed: bool
    note: str = ""


def validation_checks(params: SystemParams, n_drops: int, seed: int, jobs: int = 1,
                      k: int = an.DEFAULT_ORDER, laplace_drops: int | None = None) -> list[Check]:
    """Analytic-vs-simulation gaps at one operating point.

    The load law is checked on an unpaired network (delta = 0), where the
    UE process is Poisson; the paired value is reported next to it.
    """
    T = 10 ** (SNR_GRID_DB / 10)
    checks = []
    unpaired = params.replace(delta=0.0)
    mpc0 = mc.run_campaign(unpaired, "MPC", "hd", n_drops, seed, jobs)
    tv0 = load_tv_distance(mpc0.samples["load"], unpaired, "MPC")
    checks.append(Check("load_tv_unpaired", tv0, 0.02, tv0 <= 0.02))

    hd = mc.run_campaign(params, "DAC", "hd", n_drops, seed, jobs)
    tv1 = load_tv_distance(hd.samples["load"], params, "DAC")
    checks.append(Check("load_tv_paired_dac", tv1, 0.02, tv1 <= 0.02, "pair clustering not modeled"))

    ana = an.cellular_sinr_ccdf(T, params)
    g_snr = sup_gap_ccdf(mpc0.samples["snr_cell"], T, ana)
    g_sinr = sup_gap_ccdf(mpc0.samples["sinr_cell"], T, ana)
    checks.append(Check("cell_snr_sup_gap", g_snr, 0.02, g_snr <= 0.02))
    checks.append(Check("cell_sinr_sup_gap", g_sinr, 0.05, g_sinr <= 0.05))

    g_hd = sup_gap_ccdf(hd.samples["sinr_d2d"], T, an.hd_d2d_sinr_ccdf(T, params, k))
    checks.append(Check("hd_d2d_sinr_sup_gap", g_hd, 0.03, g_hd <= 0.03))

    s = np.geomspace(1e2, 1e8, 20)
    rng = np.random.default_rng([seed, 7_000_001])
    est = mc.empirical_laplace_fd(params, s, laplace_drops or max(n_drops // 5, 100), rng)
    lo, hi = an.fd_laplace_bounds(s, params, k)
    excess = np.maximum(lo - est.ci_half_width - est.values, 0) + \
        np.maximum(est.values - hi - est.ci_half_width, 0)
    checks.append(Check("fd_laplace_outside_bounds", float(excess.max()), 0.0, bool(np.all(excess == 0))))
    return checks


def _validate(spec: ExperimentSpec):
    p = _point_params(spec)[0]
    checks = validation_checks(p, spec.n_drops, spec.seed, spec.jobs, spec.k_order)
    t = Table("report", ["check", "value", "tolerance", "passed"])
    for c in checks:
        t.add(c.name, c.value, c.tolerance, c.passed)
    return [t], {c.name: {"value": c.value, "tolerance": c.tolerance, "passed": c.passed,
                          "note": c.note} for c in checks}


def run_experiment(spec: ExperimentSpec) -> list[Path]:
    """Run one experiment and return the written file paths."""
    extra = None
    if spec.name == "fig2_hratio":
        tables = _fig2(spec)
    elif spec.name == "fig3_gain_vs_xi":
        tables = _fig3(spec)
    elif spec.name == "fig4_min_delta":
        tables = _fig4(spec)
    elif spec.name == "fig5_gain_vs_K":
        tables = _fig5(spec)
    elif spec.name == "fig6_hd_rate_delay":
        tables, extra = _rate_delay(spec, "hd")
    elif spec.name in ("fig7_fd_rate_delay", "fig8_fd_high_xi"):
        tables, extra = _rate_delay(spec, "fd")
    elif spec.name == "fig9_delay_percentiles":
        tables = _fig9(spec)
    else:
        tables, extra = _validate(spec)
    return _write_outputs(spec, tables, extra)
