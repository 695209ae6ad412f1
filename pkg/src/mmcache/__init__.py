"""Analysis and simulation of D2D-aware caching in mmWave cellular networks."""
from .config import ConfigError, ParamValidationError, SystemParams, dump_params, load_params, parse_params
from .popularity import (
    CacheAssignment,
    PopularityModel,
    dac_partition,
    h_dac,
    h_mpc,
    h_ratio,
    h_ratio_limit,
    hit_probability,
    min_delta_for_gain,
    offloading_factor,
    offloading_gain,
    verify_partition_pareto,
    xi_threshold,
    zipf_pmf,
)

__version__ = "0.1.0"

__all__ = [
    "CacheAssignment", "ConfigError", "ParamValidationError", "PopularityModel", "SystemParams",
    "dac_partition", "dump_params", "h_dac", "h_mpc", "h_ratio", "h_ratio_limit", "hit_probability",
    "load_params", "min_delta_for_gain", "offloading_factor", "offloading_gain", "parse_params",
    "verify_partition_pareto", "xi_threshold", "zipf_pmf",
]
