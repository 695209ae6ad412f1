"""Closed-form rate, SINR and delay distributions.

Signal, interference and noise are normalized by the aligned-link constant
(lambda/4pi)^2 P G_tx G_rx, so a link of length r with fading eta has
normalized power eta * r^-a.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

from . import popularity as pop
from .channel import interferer_gain_mixture
from .config import SystemParams
from .specfun import erfc, gauss_legendre, hyp2f1_special, truncated_power_moment

KAPPA_LOAD = 3.5          # shape of the size-biased Voronoi area law
LOAD_TAIL = 1e-8          # stop summing the load pmf past this remaining mass
LOAD_MAX_N = 10_000
N_RADIAL = 64             # Gauss-Legendre nodes over the pair distance
DEFAULT_ORDER = 2         # order of the polynomial LOS approximation

POLICIES = ("MPC", "HD-DAC", "FD-DAC")
PSI_MODES = ("random", "half", "one")
SI_FORMS = ("mean", "literal")


# containers ------------------------------------------------------------------

@dataclass(frozen=True)
class NormalizedBudget:
    n_hat: float
    context: str

    def __post_init__(self):
        if not self.n_hat > 0:
            raise ValueError("normalized noise must be > 0")
        if self.context not in ("cellular", "d2d"):
            raise ValueError(f"unknown context {self.context!r}")


@dataclass(frozen=True)
class DistributionEstimate:
    """CCDF or CDF values on a sorted grid, with optional FD bounds."""

    grid: np.ndarray
    values: np.ndarray
    kind: str
    bounds: tuple | None = None
    label: str = field(default="", compare=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if self.kind not in ("ccdf", "cdf"):
            raise ValueError(f"kind must be 'ccdf' or 'cdf', got {self.kind!r}")
        if grid.shape != values.shape or grid.ndim != 1:
            raise ValueError("grid and values must be 1-d arrays of equal length")
        if np.any(np.diff(grid) < 0):
            raise ValueError("grid must be sorted")
        _check_distribution(values, self.kind)
        if self.bounds is not None:
            lo, hi = (np.asarray(b, dtype=float) for b in self.bounds)
            _check_distribution(lo, self.kind)
            _check_distribution(hi, self.kind)
            if np.any(lo > hi + 1e-12):
                raise ValueError("lower bound exceeds upper bound")

    def quantile(self, p: float) -> float:
        """Grid-interpolated point where the CDF reaches ``p``."""
        cdf = np.asarray(self.values) if self.kind == "cdf" else 1.0 - np.asarray(self.values)
        return float(np.interp(p, cdf, self.grid))


def _check_distribution(values: np.ndarray, kind: str, tol: float = 1e-9):
    if np.any(~np.isfinite(values)):
        raise ValueError("non-finite probability")
    if np.any(values < -tol) or np.any(values > 1 + tol):
        raise ValueError("probability outside [0, 1]")
    step = np.diff(values)
    if kind == "ccdf" and np.any(step > tol):
        raise ValueError("CCDF must be non-increasing")
    if kind == "cdf" and np.any(step < -tol):
        raise ValueError("CDF must be non-decreasing")


def _policy(policy: str) -> str:
    p = policy.upper()
    if p == "DAC":
        p = "HD-DAC"
    if p not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
    return p


# caching quantities ----------------------------------------------------------

@lru_cache(maxsize=256)
def _hits(xi: float, L: int, K: int) -> tuple[float, float]:
    pm = pop.zipf_pmf(xi, L)
    return pop.h_mpc(K, pm), pop.h_dac(K, pm)


def hit_probabilities(params: SystemParams) -> tuple[float, float]:
    """(h_mpc, h_dac) for the parameter set."""
    return _hits(params.xi, params.lib_size, params.cache_size)


def cellular_probabilities(params: SystemParams, policy: str) -> tuple[float, float]:
    """Probability that an unpaired / paired UE is served over the cellular link."""
    policy = _policy(policy)
    h_m, h_d = hit_probabilities(params)
    if policy == "MPC":
        return 1.0 - h_m, 1.0 - h_m
    c_p = 1.0 - 2.0 * h_d
    if c_p < -1e-12:
        warnings.warn(f"2*h_dac = {2 * h_d:.6g} > 1; paired cellular probability clamped at 0",
                      RuntimeWarning, stacklevel=2)
    c_p = max(c_p, 0.0)
    return 1.0 - h_d, c_p


def lambda_cell(params: SystemParams, policy: str) -> float:
    """Intensity of UEs that are served by the BSs [1/m^2]."""
    c_u, c_p = cellular_probabilities(params, policy)
    return ((1.0 - params.delta) * c_u + params.delta * c_p) * params.lambda_ue


# cell load -------------------------------------------------------------------

def _load_mu(lam_cell: float, lam_bs: float) -> float:
    if lam_cell < 0 or not lam_bs > 0:
        raise ValueError("densities must satisfy lambda_cell >= 0, lambda_bs > 0")
    return lam_cell / (KAPPA_LOAD * lam_bs + lam_cell)


def cell_load_pmf(lam_cell: float, lam_bs: float, n):
    """P(N = n) for the number of UEs in the target's cell, target included.

    N - 1 is negative binomial with KAPPA_LOAD + 1 successes of probability
    1 - mu, mu = lam_cell / (KAPPA_LOAD lam_bs + lam_cell).
    """
    n = np.asarray(n)
    if np.any(n < 1):
        raise ValueError("load counts start at 1")
    mu = _load_mu(lam_cell, lam_bs)
    if mu == 0.0:
        out = (n == 1).astype(float)
    else:
        out = stats.nbinom.pmf(n - 1, KAPPA_LOAD + 1.0, 1.0 - mu)
    return out if out.ndim else float(out)


def load_support(lam_cell: float, lam_bs: float, tail: float = LOAD_TAIL,
                 n_max: int = LOAD_MAX_N):
    """Counts 1..n* and their pmf, cut once the cumulative mass passes 1 - tail."""
    mu = _load_mu(lam_cell, lam_bs)
    if mu == 0.0:
        return np.array([1]), np.array([1.0])
    dist = stats.nbinom(KAPPA_LOAD + 1.0, 1.0 - mu)
    n_stop = int(min(dist.ppf(1.0 - tail) + 1, n_max))
    n = np.arange(1, n_stop + 1)
    return n, dist.pmf(n - 1)


# noise -----------------------------------------------------------------------

def normalized_noise(params: SystemParams, context: str) -> NormalizedBudget:
    if context == "cellular":
        n = params.noise_cell / (params.path_gain_1m * params.p_bs * params.g_bs_max * params.g_ue_max)
    elif context == "d2d":
        n = params.noise_d2d / (params.path_gain_1m * params.p_ue * params.g_ue_max ** 2)
    else:
        raise ValueError(f"unknown context {context!r}")
    return NormalizedBudget(n, context)


# cellular link ---------------------------------------------------------------

def cellular_radii(params: SystemParams) -> tuple[float, float]:
    """Cut-off radii of the linear and quadratic distance-pdf surrogates."""
    rc = params.r_cell
    u = rc / (2.0 * params.r_los)
    r1 = math.sqrt(3.0) * rc
    # exp(u^2) erfc(u) is evaluated as a product; fine for u below ~25
    r2 = math.sqrt(6.0) * math.sqrt(1.0 - math.sqrt(math.pi) * u * math.exp(u * u) * erfc(u)) * rc
    return r1, r2


def cellular_sinr_ccdf(T, params: SystemParams, n_hat: NormalizedBudget | float | None = None):
    """Noise-limited P(SINR_cell > T) via incomplete-gamma surrogates."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0) or np.any(np.isnan(T)):
        raise ValueError("threshold must be >= 0")
    if n_hat is None:
        n_hat = normalized_noise(params, "cellular")
    nh = n_hat.n_hat if isinstance(n_hat, NormalizedBudget) else float(n_hat)
    r1, r2 = cellular_radii(params)
    scale = 2.0 / params.r_cell ** 2
    c = nh * np.minimum(T, 1e300)

    def j1(a):
        return scale * (truncated_power_moment(1, c, r1, a)
                        - truncated_power_moment(2, c, r1, a) / r1)

    def j2(a):
        return scale * (truncated_power_moment(1, c, r2, a)
                        - 2.0 * truncated_power_moment(2, c, r2, a) / r2
                        + truncated_power_moment(3, c, r2, a) / r2 ** 2)

    out = np.clip(j1(params.a_nlos) + j2(params.a_los) - j2(params.a_nlos), 0.0, 1.0)
    return out if out.ndim else float(out)


def _rate_threshold(rho, bandwidth):
    # 2^(rho/bw) - 1 without overflow warnings
    x = np.minimum(np.asarray(rho, dtype=float) / bandwidth, 1000.0)
    return np.expm1(x * math.log(2.0))


def cellular_rate_ccdf(rho, params: SystemParams, policy: str):
    """P(R_cell > rho) with the load and SINR treated as independent."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rate must be >= 0")
    n, pmf = load_support(lambda_cell(params, policy), params.lambda_bs)
    pmf = pmf / pmf.sum()   # condition on the retained counts
    T = _rate_threshold(rho[..., None] * n, params.bw_cell)
    out = cellular_sinr_ccdf(T, params) @ pmf
    out = np.clip(out, 0.0, 1.0)
    return out if out.ndim else float(out)


# D2D interference ------------------------------------------------------------

def los_cutoff(params: SystemParams, k: int = DEFAULT_ORDER) -> float:
    """Support of the (1 - r/r4)^k surrogate of exp(-r/r_los)."""
    return math.sqrt((k + 1) * (k + 2)) * params.r_los


def _j3(x, a):
    """int_0^inf r (1 - 1/(1 + x r^-a)) dr for NLOS everywhere."""
    return 0.5 * math.gamma(1 - 2 / a) * math.gamma(1 + 2 / a) * x ** (2 / a)


def _j4(x, a, r4, k):
    """int_0^r4 (1 - r/r4)^k r / (1 + x r^-a) dr (LOS-weighted survival)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    xp = x[pos]
    acc = np.zeros_like(xp)
    for l in range(k + 1):
        b = 1.0 + (l + 2) / a
        z = r4 ** a / xp
        acc += math.comb(k, l) * (-1) ** l * r4 ** (a + 2) / ((l + a + 2) * xp) * hyp2f1_special(b, z)
    out[pos] = acc
    # x -> 0: the integrand loses its 1/(1 + .) factor
    out[~pos] = r4 ** 2 / ((k + 1) * (k + 2))
    return out


def _interference_exponent(s, params: SystemParams, k: int):
    """E_g[J3 + J4(a_N) - J4(a_L)]: mean 'int r (1 - L_link) dr' per interferer."""
    s = np.asarray(s, dtype=float)
    mix = interferer_gain_mixture(params.dtheta_ue, params.g_ue_max, params.g_ue_min)
    r4 = los_cutoff(params, k)
    aN, aL = params.a_nlos, params.a_los

    def term(g):
        x = g * s
        return _j3(x, aN) + _j4(x, aN, r4, k) - _j4(x, aL, r4, k)

    return np.maximum(mix.expect(term), 0.0)


def _check_s(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0) or np.any(np.isnan(s)):
        raise ValueError("Laplace argument must be >= 0")
    return s


def hd_laplace(s, params: SystemParams, k: int = DEFAULT_ORDER):
    """Laplace transform of the normalized half-duplex D2D interference."""
    s = _check_s(s)
    _, h = hit_probabilities(params)
    dens = params.delta * h * (2.0 - h) * params.lambda_ue
    out = np.exp(-math.pi * dens * _interference_exponent(s, params, k))
    return out if out.ndim else float(out)


def si_laplace(s, params: SystemParams, form: str = "mean"):
    """Laplace transform of the normalized residual self-interference.

    ``form="mean"`` treats kappa_si as the mean SI gain, giving
    1/(1 + c kappa_si s). ``form="literal"`` puts kappa_si in the
    denominator, 1/(1 + c s / kappa_si). Here c = (4 pi/(lambda G_ue_max))^2.
    """
    s = _check_s(s)
    c = (4 * math.pi / (params.wavelength * params.g_ue_max)) ** 2
    if form == "mean":
        out = 1.0 / (1.0 + c * params.kappa_si * s)
    elif form == "literal":
        if params.kappa_si == 0:
            out = np.where(s > 0, 0.0, 1.0)
        else:
            out = 1.0 / (1.0 + c * s / params.kappa_si)
    else:
        raise ValueError(f"unknown SI form {form!r}")
    return out if np.ndim(out) else float(out)


def fd_laplace_bounds(s, params: SystemParams, k: int = DEFAULT_ORDER):
    """(lower, upper) on the Laplace transform of full-duplex D2D interference.

    The two ends of each pair act as separate thinned processes; positive
    correlation gives the product of their transforms as a lower bound and
    Cauchy-Schwarz gives the upper one.
    """
    s = _check_s(s)
    _, h = hit_probabilities(params)
    dens = params.delta * h * params.lambda_ue
    lower = np.exp(-2.0 * math.pi * dens * _interference_exponent(s, params, k))
    upper = np.exp(-math.pi * dens * _interference_exponent(2.0 * s, params, k))
    if lower.ndim == 0:
        return float(lower), float(upper)
    return lower, upper


def _radial_expectation(T, params: SystemParams, laplace, n_nodes: int = N_RADIAL):
    """E_{r, LOS}[laplace(T r^a) exp(-N_hat T r^a)] over the pair distance."""
    T = np.asarray(T, dtype=float)
    if np.any(T < 0) or np.any(np.isnan(T)):
        raise ValueError("threshold must be >= 0")
    rule = gauss_legendre(n_nodes, 0.0, params.r_d2d_max)
    r = rule.nodes
    w = rule.weights * 2.0 * r / params.r_d2d_max ** 2
    pl = np.exp(-r / params.r_los)
    nh = normalized_noise(params, "d2d").n_hat
    Tm = np.minimum(T, 1e300)[..., None]
    total = 0.0
    for a, weight in ((params.a_los, pl), (params.a_nlos, 1.0 - pl)):
        s = Tm * r ** a
        total = total + (laplace(s) * np.exp(-nh * s)) @ (w * weight)
    return total


def hd_d2d_sinr_ccdf(T, params: SystemParams, k: int = DEFAULT_ORDER, n_nodes: int = N_RADIAL):
    out = np.clip(_radial_expectation(T, params, lambda s: hd_laplace(s, params, k), n_nodes), 0, 1)
    return out if np.ndim(out) else float(out)


def psi_weights(params: SystemParams, psi_mode: str = "random") -> dict:
    """Distribution of the half-duplex rate factor."""
    if psi_mode == "random":
        _, h = hit_probabilities(params)
        return {0.5: h, 1.0: 1.0 - h}
    if psi_mode == "half":
        return {0.5: 1.0}
    if psi_mode == "one":
        return {1.0: 1.0}
    raise ValueError(f"unknown psi mode {psi_mode!r}; expected one of {PSI_MODES}")


def hd_d2d_rate_ccdf(rho, params: SystemParams, k: int = DEFAULT_ORDER, psi_mode: str = "random"):
    """P(psi * BW_d2d * log2(1 + SINR) > rho) averaging over psi."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rate must be >= 0")
    out = sum(p * hd_d2d_sinr_ccdf(_rate_threshold(rho, psi * params.bw_d2d), params, k)
              for psi, p in psi_weights(params, psi_mode).items() if p > 0)
    out = np.clip(out, 0.0, 1.0)
    return out if np.ndim(out) else float(out)


def fd_d2d_sinr_ccdf_bounds(T, params: SystemParams, k: int = DEFAULT_ORDER,
                            si_form: str = "mean", n_nodes: int = N_RADIAL):
    def lower(s):
        return fd_laplace_bounds(s, params, k)[0] * si_laplace(s, params, si_form)

    def upper(s):
        return fd_laplace_bounds(s, params, k)[1] * si_laplace(s, params, si_form)

    lo = np.clip(_radial_expectation(T, params, lower, n_nodes), 0, 1)
    hi = np.clip(_radial_expectation(T, params, upper, n_nodes), 0, 1)
    if np.ndim(lo) == 0:
        return float(lo), float(hi)
    return lo, hi


def fd_d2d_rate_ccdf_bounds(rho, params: SystemParams, k: int = DEFAULT_ORDER, si_form: str = "mean"):
    """Bounds on P(BW_d2d log2(1 + SINR_fd) > rho); no half-duplex factor."""
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise ValueError("rate must be >= 0")
    return fd_d2d_sinr_ccdf_bounds(_rate_threshold(rho, params.bw_d2d), params, k, si_form)


# delay -----------------------------------------------------------------------

def delay_weights(params: SystemParams, policy: str) -> tuple[float, float, float]:
    """(hit, D2D, cellular) probabilities of how a request is served."""
    policy = _policy(policy)
    h_m, h_d = hit_probabilities(params)
    if policy == "MPC":
        return h_m, 0.0, 1.0 - h_m
    d2d = params.delta * h_d
    return h_d, d2d, 1.0 - h_d - d2d


def delay_cdf(d, params: SystemParams, policy: str, k: int = DEFAULT_ORDER,
              psi_mode: str = "random", si_form: str = "mean"):
    """P(D < d): a point mass at 0 for hits plus transmission delays sigma/R."""
    policy = _policy(policy)
    d = np.asarray(d, dtype=float)
    if np.any(d < 0):
        raise ValueError("delay must be >= 0")
    hit, w_d2d, w_cell = delay_weights(params, policy)
    rho = np.divide(params.sigma_file, d, out=np.full(d.shape, np.inf), where=d > 0)
    rho = np.minimum(rho, 1e15)
    out = hit + w_cell * cellular_rate_ccdf(rho, params, policy)
    if w_d2d > 0:
        if policy == "HD-DAC":
            out = out + w_d2d * hd_d2d_rate_ccdf(rho, params, k, psi_mode)
        else:
            # only the upper interference bound is used for FD delays
            out = out + w_d2d * fd_d2d_rate_ccdf_bounds(rho, params, k, si_form)[1]
    out = np.where(d > 0, np.clip(out, 0.0, 1.0), 0.0)
    return out if out.ndim else float(out)


def delay_percentile(p: float, params: SystemParams, policy: str, k: int = DEFAULT_ORDER,
                     psi_mode: str = "random", si_form: str = "mean", rtol: float = 1e-4) -> float:
    """Smallest delay d with P(D < d) >= p, by bisection on log d."""
    if not 0 < p < 1:
        raise ValueError("percentile level must lie in (0, 1)")
    hit, _, _ = delay_weights(params, policy)
    if hit >= p:
        return 0.0
    f = lambda d: delay_cdf(d, params, policy, k, psi_mode, si_form) - p
    lo, hi = 1e-4, 1.0
    while f(lo) >= 0:
        lo /= 10.0
        if lo < 1e-12:
            return lo
    while f(hi) < 0:
        hi *= 10.0
        if hi > 1e9:
            raise RuntimeError("delay distribution does not reach the requested level")
    while hi / lo - 1.0 > rtol:
        mid = math.sqrt(lo * hi)
        if f(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


# grid helpers ----------------------------------------------------------------

def rate_grid(n: int = 201, lo: float = 1e6, hi: float = 1e10) -> np.ndarray:
    """Log-spaced rate grid [bit/s]; the first point is 0."""
    return np.concatenate([[0.0], np.geomspace(lo, hi, n - 1)])


def delay_grid(n: int = 201, lo: float = 1e-3, hi: float = 10.0) -> np.ndarray:
    return np.geomspace(lo, hi, n)


def rate_ccdf_estimate(params: SystemParams, link: str, policy: str = "HD-DAC",
                       grid=None, k: int = DEFAULT_ORDER, psi_mode: str = "random",
                       si_form: str = "mean") -> DistributionEstimate:
    grid = rate_grid() if grid is None else np.asarray(grid, dtype=float)
    if link == "cellular":
        return DistributionEstimate(grid, cellular_rate_ccdf(grid, params, policy), "ccdf",
                                    label=f"cellular/{policy}")
    if link == "hd":
        return DistributionEstimate(grid, hd_d2d_rate_ccdf(grid, params, k, psi_mode), "ccdf",
                                    label="d2d/hd")
    if link == "fd":
        lo, hi = fd_d2d_rate_ccdf_bounds(grid, params, k, si_form)
        return DistributionEstimate(grid, hi, "ccdf", bounds=(lo, hi), label="d2d/fd")
    raise ValueError(f"unknown link {link!r}")


def delay_cdf_estimate(params: SystemParams, policy: str, grid=None, k: int = DEFAULT_ORDER,
                       psi_mode: str = "random", si_form: str = "mean") -> DistributionEstimate:
    grid = delay_grid() if grid is None else np.asarray(grid, dtype=float)
    return DistributionEstimate(grid, delay_cdf(grid, params, policy, k, psi_mode, si_form), "cdf",
                                label=f"delay/{policy}")
