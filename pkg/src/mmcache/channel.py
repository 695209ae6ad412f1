"""Link-level model: sectorized antennas, LOS blockage, pathloss and fading."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LinkState:
    distance: float
    los: bool
    alpha: float
    eta: float
    tx_gain: float
    rx_gain: float

    def __post_init__(self):
        if self.eta < 0:
            raise ValueError("fading gain must be >= 0")
        if self.distance <= 0:
            raise ValueError("link distance must be > 0")


@dataclass(frozen=True)
class GainMixture:
    """Discrete law of an interfering link's antenna gain product.

    ``values`` are normalized by the aligned gain, so the first entry is 1.
    """

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        if abs(float(np.sum(self.probs)) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {np.sum(self.probs)!r}")
        if np.any(np.asarray(self.probs) < 0):
            raise ValueError("negative probability")

    def expect(self, f):
        """E[f(g)] for a vectorized ``f``."""
        return sum(p * f(g) for g, p in zip(self.values, self.probs) if p > 0)


def wrap_angle(theta):
    """Map angles to (-pi, pi]."""
    t = np.mod(np.asarray(theta, dtype=float) + math.pi, 2 * math.pi) - math.pi
    t = np.where(t == -math.pi, math.pi, t)
    return t if t.ndim else float(t)


def sector_gain(theta, dtheta: float, g_max: float, g_min: float):
    """Two-level pattern: ``g_max`` inside |theta| <= dtheta, ``g_min`` outside."""
    inside = np.abs(wrap_angle(theta)) <= dtheta
    out = np.where(inside, g_max, g_min)
    return out if out.ndim else float(out)


def p_los(r, r_los: float):
    return np.exp(-np.asarray(r, dtype=float) / r_los)


def pathloss_exponent(los, a_los: float, a_nlos: float):
    return np.where(los, a_los, a_nlos)


def received_power(p_tx, g_tx, g_rx, eta, r, alpha, wavelength: float):
    """Free-space-referenced received power (lambda/4pi)^2 P G_t G_r eta r^-alpha."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("link distance must be > 0")
    out = (wavelength / (4 * math.pi)) ** 2 * p_tx * g_tx * g_rx * eta * r ** (-np.asarray(alpha))
    return out if np.ndim(out) else float(out)


def sample_fading(rng: np.random.Generator, size=None):
    """Rayleigh power gains, Exp(1)."""
    return rng.standard_exponential(size)


def sample_los(r, r_los: float, rng: np.random.Generator):
    r = np.asarray(r, dtype=float)
    return rng.random(r.shape) < p_los(r, r_los)


def sample_self_interference(p_ue: float, kappa_si: float, rng: np.random.Generator, size=None):
    """Residual SI power eta_si * p_ue with eta_si exponential of mean kappa_si."""
    if kappa_si < 0:
        raise ValueError("kappa_si must be >= 0")
    if kappa_si == 0:
        return np.zeros(size) if size is not None else 0.0
    return p_ue * kappa_si * rng.standard_exponential(size)


def interferer_gain_mixture(dtheta: float, g_max: float, g_min: float) -> GainMixture:
    """Gain of a link whose two ends point in independent uniform directions.

    Each end falls in the other's mainlobe with probability dtheta/(2 pi),
    which requires the mainlobe to span dtheta in total (half-width
    dtheta/2 in :func:`sector_gain` terms).
    """
    p = dtheta / (2 * math.pi)
    ratio = g_min / g_max
    values = np.array([1.0, ratio, ratio ** 2])
    probs = np.array([p * p, 2 * p * (1 - p), (1 - p) ** 2])
    return GainMixture(values, probs)


def cross_gain_mixture(dtheta_tx: float, g_tx_max: float, g_tx_min: float,
                       dtheta_rx: float, g_rx_max: float, g_rx_min: float) -> GainMixture:
    """Same construction for two different antennas (e.g. BS -> UE).

    Values are normalized by g_tx_max * g_rx_max.
    """
    pt, pr = dtheta_tx / (2 * math.pi), dtheta_rx / (2 * math.pi)
    rt, rr = g_tx_min / g_tx_max, g_rx_min / g_rx_max
    values = np.array([1.0, rt, rr, rt * rr])
    probs = np.array([pt * pr, (1 - pt) * pr, pt * (1 - pr), (1 - pt) * (1 - pr)])
    return GainMixture(values, probs)


def interferer_gains(rx_offset, rng: np.random.Generator, dtheta_tx: float, g_tx_max: float,
                     g_tx_min: float, dtheta_rx: float, g_rx_max: float, g_rx_min: float,
                     tx_offset=None):
    """Antenna gain products for links into one receiver.

    ``rx_offset`` is the angle between the receiver's beam and the direction
    of each interferer; ``tx_offset`` is the same for the interferer's beam
    and is drawn uniformly when not given (random boresight). Mainlobes are
    ``dtheta`` wide in total.
    """
    rx_offset = np.asarray(rx_offset, dtype=float)
    if tx_offset is None:
        tx_offset = rng.uniform(-math.pi, math.pi, rx_offset.shape)
    g_tx = np.where(np.abs(wrap_angle(tx_offset)) <= 0.5 * dtheta_tx, g_tx_max, g_tx_min)
    g_rx = np.where(np.abs(wrap_angle(rx_offset)) <= 0.5 * dtheta_rx, g_rx_max, g_rx_min)
    return g_tx * g_rx
