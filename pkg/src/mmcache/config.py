"""System parameters for the mmWave device-caching model.

Everything inside :class:`SystemParams` is stored in linear SI units
(W, Hz, m, rad, bits). Decibels and "human" units (GHz, km^-2, MB, degrees)
only appear at the config-file boundary handled by :func:`load_params` and
:func:`dump_params`.
"""
from __future__ import annotations

import decimal
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Raised when a config file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ParamValidationError(ValueError):
    """Raised when a parameter violates a model invariant."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_w: float) -> float:
    return 10.0 * math.log10(x_w) + 30.0


@dataclass(frozen=True)
class SystemParams:
    """Network, channel and caching parameters (linear SI units)."""

    xi: float
    lambda_bs: float = 127e-6
    lambda_ue: float = 1270e-6
    delta: float = 1.0
    r_d2d_max: float = 15.0
    f_c: float = 28e9
    bw_total: float = 2e9
    chi_d2d: float = 0.2
    r_los: float = 30.0
    a_los: float = 2.0
    a_nlos: float = 3.0
    p_bs: float = dbm_to_watt(30.0)
    p_ue: float = dbm_to_watt(23.0)
    kappa_si: float = db_to_linear(-80.0)
    n0: float = dbm_to_watt(-174.0)
    f_n: float = db_to_linear(10.0)
    dtheta_ue: float = math.radians(30.0)
    dtheta_bs: float = math.radians(10.0)
    g_bs_max: float = db_to_linear(18.0)
    g_bs_min: float = db_to_linear(-2.0)
    g_ue_max: float = db_to_linear(9.0)
    g_ue_min: float = db_to_linear(-9.0)
    sigma_file: float = 100 * 8e6
    lib_size: int = 1000
    cache_size: int = 100

    def __post_init__(self):
        for name in ("lambda_bs", "lambda_ue", "r_d2d_max", "f_c", "bw_total", "r_los",
                     "p_bs", "p_ue", "n0", "f_n", "dtheta_ue", "dtheta_bs", "g_bs_max",
                     "g_bs_min", "g_ue_max", "g_ue_min", "sigma_file"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ParamValidationError(name, f"must be finite and > 0, got {value!r}")
        if not 0.0 <= self.delta <= 1.0:
            raise ParamValidationError("delta", f"must lie in [0, 1], got {self.delta!r}")
        if not 0.0 < self.chi_d2d < 1.0:
            raise ParamValidationError("chi_d2d", f"must lie in (0, 1), got {self.chi_d2d!r}")
        if not (np.isfinite(self.xi) and self.xi >= 0):
            raise ParamValidationError("xi", f"must be >= 0, got {self.xi!r}")
        if not (np.isfinite(self.kappa_si) and self.kappa_si >= 0):
            raise ParamValidationError("kappa_si", f"must be >= 0, got {self.kappa_si!r}")
        if self.a_los < 2:
            raise ParamValidationError("a_los", f"must be >= 2, got {self.a_los!r}")
        if self.a_nlos < self.a_los:
            raise ParamValidationError("a_nlos", "must be >= a_los")
        if self.dtheta_ue > 2 * math.pi or self.dtheta_bs > 2 * math.pi:
            raise ParamValidationError("dtheta_ue" if self.dtheta_ue > 2 * math.pi else "dtheta_bs",
                                       "beamwidth cannot exceed 2*pi")
        if self.g_ue_min > self.g_ue_max:
            raise ParamValidationError("g_ue_min", "sidelobe gain exceeds mainlobe gain")
        if self.g_bs_min > self.g_bs_max:
            raise ParamValidationError("g_bs_min", "sidelobe gain exceeds mainlobe gain")
        for name in ("lib_size", "cache_size"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ParamValidationError(name, f"must be a positive integer, got {value!r}")
        if 2 * self.cache_size > self.lib_size:
            raise ParamValidationError("cache_size", "2*cache_size must not exceed lib_size")

    # derived quantities -------------------------------------------------
    @property
    def bw_cell(self) -> float:
        return (1.0 - self.chi_d2d) * self.bw_total

    @property
    def bw_d2d(self) -> float:
        return self.chi_d2d * self.bw_total

    @property
    def r_cell(self) -> float:
        """Equivalent cell radius 1/sqrt(pi*lambda_bs)."""
        return 1.0 / math.sqrt(math.pi * self.lambda_bs)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f_c

    @property
    def lambda_p(self) -> float:
        """Intensity of each of the two paired-UE processes (pairs per m^2)."""
        return 0.5 * self.delta * self.lambda_ue

    @property
    def lambda_u(self) -> float:
        return (1.0 - self.delta) * self.lambda_ue

    @property
    def noise_cell(self) -> float:
        """Thermal noise power over the cellular band [W]."""
        return self.n0 * self.f_n * self.bw_cell

    @property
    def noise_d2d(self) -> float:
        return self.n0 * self.f_n * self.bw_d2d

    @property
    def path_gain_1m(self) -> float:
        """Free-space constant (wavelength / 4 pi)^2."""
        return (self.wavelength / (4 * math.pi)) ** 2

    def replace(self, **changes) -> "SystemParams":
        return replace(self, **changes)


# config-file schema: key -> (field, to_linear, from_linear)
def _scale(k):
    return (lambda v: v * k), (lambda x: x / k)


_DEC = decimal.Context(prec=40)


def _dec_db_to_linear(v) -> float:
    return float(_DEC.power(10, _DEC.divide(decimal.Decimal(str(v)), 10)))


def _dec_linear_to_db(x: float) -> str:
    return format(_DEC.multiply(10, _DEC.log10(decimal.Decimal(x))), ".25g")


def _dec_dbm_to_watt(v) -> float:
    return float(_DEC.power(10, _DEC.divide(_DEC.subtract(decimal.Decimal(str(v)), 30), 10)))


def _dec_watt_to_dbm(x: float) -> str:
    return format(_DEC.add(_DEC.multiply(10, _DEC.log10(decimal.Decimal(x))), 30), ".25g")


# dB fields go through 40-digit decimals so that dumping and re-loading a
# power or gain reproduces the same double
_DB = (_dec_db_to_linear, _dec_linear_to_db)
_DBM = (_dec_dbm_to_watt, _dec_watt_to_dbm)
_DEG = (math.radians, math.degrees)
_ID = (float, float)
_INT = (int, int)

SCHEMA = {
    "lambda_bs_per_km2": ("lambda_bs", *_scale(1e-6)),
    "lambda_ue_per_km2": ("lambda_ue", *_scale(1e-6)),
    "delta": ("delta", *_ID),
    "r_d2d_max_m": ("r_d2d_max", *_ID),
    "f_c_ghz": ("f_c", *_scale(1e9)),
    "bw_ghz": ("bw_total", *_scale(1e9)),
    "chi_d2d": ("chi_d2d", *_ID),
    "r_los_m": ("r_los", *_ID),
    "a_los": ("a_los", *_ID),
    "a_nlos": ("a_nlos", *_ID),
    "p_bs_dbm": ("p_bs", *_DBM),
    "p_ue_dbm": ("p_ue", *_DBM),
    "kappa_si_db": ("kappa_si", *_DB),
    "n0_dbm_hz": ("n0", *_DBM),
    "f_n_db": ("f_n", *_DB),
    "dtheta_ue_deg": ("dtheta_ue", *_DEG),
    "dtheta_bs_deg": ("dtheta_bs", *_DEG),
    "g_bs_max_db": ("g_bs_max", *_DB),
    "g_bs_min_db": ("g_bs_min", *_DB),
    "g_ue_max_db": ("g_ue_max", *_DB),
    "g_ue_min_db": ("g_ue_min", *_DB),
    "sigma_file_mb": ("sigma_file", *_scale(8e6)),
    "lib_size": ("lib_size", *_INT),
    "cache_size": ("cache_size", *_INT),
    "xi": ("xi", *_ID),
}


def parse_params(text: str, **overrides) -> SystemParams:
    """Parse ``key = value`` text into :class:`SystemParams`.

    Omitted keys fall back to the defaults baked into the
    dataclass; ``xi`` has no default. ``overrides`` are config-unit values
    applied after parsing (same keys as the file).
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {line!r}", lineno)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r}", lineno)
        try:
            float(value)
        except ValueError:
            raise ConfigError(f"value for {key!r} is not a number: {value!r}", lineno) from None
        raw[key] = value
    for key, value in overrides.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        raw[key] = str(value)

    if "xi" not in raw:
        raise ParamValidationError("xi", "the popularity exponent is mandatory")

    kwargs = {}
    for key, value in raw.items():
        name, to_linear, _ = SCHEMA[key]
        number = float(value)
        if to_linear is int:
            if number != int(number):
                raise ParamValidationError(name, f"must be an integer, got {value!r}")
            kwargs[name] = int(number)
        elif to_linear in (_dec_db_to_linear, _dec_dbm_to_watt):
            kwargs[name] = to_linear(value)
        else:
            kwargs[name] = to_linear(number)
    return SystemParams(**kwargs)


def load_params(file_path: str | Path, **overrides) -> SystemParams:
    path = Path(file_path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_params(text, **overrides)


def _roundtrip_repr(x, to_linear, from_linear) -> str:
    if from_linear in (_dec_linear_to_db, _dec_watt_to_dbm):
        return from_linear(x)
    # pick a decimal for the config unit that maps back to exactly x
    v = float(from_linear(x))
    candidates = [v]
    up = down = v
    for _ in range(8):
        up, down = np.nextafter(up, np.inf), np.nextafter(down, -np.inf)
        candidates += [float(up), float(down)]
    for c in candidates:
        if to_linear(c) == x:
            return repr(c)
    return repr(v)


def dump_params(params: SystemParams) -> str:
    """Serialize to the config format; :func:`parse_params` inverts it."""
    lines = []
    for key, (name, to_linear, from_linear) in SCHEMA.items():
        value = getattr(params, name)
        if to_linear is int:
            lines.append(f"{key} = {int(value)}")
        else:
            lines.append(f"{key} = {_roundtrip_repr(value, to_linear, from_linear)}")
    return "\n".join(lines) + "\n"


def as_dict(params: SystemParams) -> dict:
    """Linear-unit field values, for manifests."""
    return {f.name: getattr(params, f.name) for f in fields(params)}
