import math

import pytest
from hypothesis import given, settings, strategies as st

from mmcache.config import (SCHEMA, ConfigError, ParamValidationError, SystemParams, as_dict,
                            dbm_to_watt, dump_params, linear_to_db, load_params, parse_params,
                            watt_to_dbm)


def test_defaults_give_50m_cell():
    p = SystemParams(xi=0.4)
    assert p.r_cell == pytest.approx(50.0637, abs=1e-4)
    assert p.delta == 1.0 and p.cache_size == 100 and p.chi_d2d == 0.2


def test_unit_density_gives_unit_radius():
    assert SystemParams(xi=0.0, lambda_bs=1 / math.pi).r_cell == pytest.approx(1.0, rel=1e-15)


def test_cellular_noise_power_dbm():
    p = SystemParams(xi=0.0)
    assert p.bw_cell == pytest.approx(1.6e9)
    assert watt_to_dbm(p.noise_cell) == pytest.approx(-71.9588, abs=1e-4)


def test_bandwidth_split_sums_to_total():
    p = SystemParams(xi=1.0, chi_d2d=0.37)
    assert p.bw_cell + p.bw_d2d == pytest.approx(p.bw_total, rel=1e-15)


def test_pair_and_unpaired_intensities():
    p = SystemParams(xi=1.0, delta=0.5)
    assert p.lambda_u + 2 * p.lambda_p == pytest.approx(p.lambda_ue)


def test_missing_xi_is_rejected():
    with pytest.raises(ParamValidationError, match="mandatory") as err:
        parse_params("delta = 0.5\n")
    assert err.value.field == "xi"


@pytest.mark.parametrize("text, field", [
    ("xi = 0.4\ndelta = 1.5", "delta"),
    ("xi = 0.4\nchi_d2d = 0", "chi_d2d"),
    ("xi = 0.4\ncache_size = 600", "cache_size"),
    ("xi = 0.4\na_los = 1.5", "a_los"),
    ("xi = 0.4\na_nlos = 1.9", "a_nlos"),
    ("xi = -1", "xi"),
    ("xi = 0.4\nlambda_bs_per_km2 = 0", "lambda_bs"),
    ("xi = 0.4\nlib_size = 10.5", "lib_size"),
])
def test_invariant_violation_names_field(text, field):
    with pytest.raises(ParamValidationError) as err:
        parse_params(text)
    assert err.value.field == field


@pytest.mark.parametrize("text, line", [
    ("xi = 0.4\nnot a pair", 2),
    ("xi = 0.4\n\n# c\nfoo = 1", 4),
    ("xi = 0.4\nxi = 0.5", 2),
    ("xi = abc", 1),
])
def test_parse_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as err:
        parse_params(text)
    assert err.value.line == line


def test_units_converted_at_boundary(tmp_path):
    f = tmp_path / "p.cfg"
    f.write_text("# example\nxi = 0.7   # exponent\np_bs_dbm = 30\ndtheta_ue_deg = 30\n"
                 "kappa_si_db = -80\nf_c_ghz = 28\nsigma_file_mb = 100\n", encoding="utf-8")
    p = load_params(f)
    assert p.p_bs == pytest.approx(1.0)
    assert p.dtheta_ue == pytest.approx(math.pi / 6)
    assert p.kappa_si == pytest.approx(1e-8)
    assert p.f_c == 28e9 and p.sigma_file == 8e8


def test_override_after_parse():
    p = parse_params("xi = 0.4\ndelta = 0.5", delta=0.25, cache_size=50)
    assert p.delta == 0.25 and p.cache_size == 50


def test_missing_file_is_config_error(tmp_path):
    with pytest.raises(ConfigError):
        load_params(tmp_path / "absent.cfg")


def test_schema_covers_every_field():
    assert {v[0] for v in SCHEMA.values()} == set(as_dict(SystemParams(xi=0.0)))


def test_dump_load_roundtrip_defaults():
    p = SystemParams(xi=0.4)
    assert parse_params(dump_params(p)) == p


@settings(max_examples=60, deadline=None)
@given(
    xi=st.floats(0, 4),
    delta=st.floats(0, 1),
    p_ue=st.floats(1e-4, 10),
    kappa=st.floats(1e-12, 1e-2),
    dth=st.floats(1e-3, 2 * math.pi),
    lam=st.floats(1e-6, 1e-2),
)
def test_dump_load_roundtrip_exact(xi, delta, p_ue, kappa, dth, lam):
    p = SystemParams(xi=xi, delta=delta, p_ue=p_ue, kappa_si=kappa, dtheta_ue=dth, lambda_bs=lam)
    q = parse_params(dump_params(p))
    for name, value in as_dict(p).items():
        got = getattr(q, name)
        assert got == value or math.isclose(got, value, rel_tol=2.3e-16), name


@given(st.floats(-200, 100))
def test_dbm_roundtrip(x):
    assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, rel=1e-9, abs=1e-12)


def test_linear_to_db():
    assert linear_to_db(100.0) == pytest.approx(20.0)


def test_perfect_cancellation_roundtrip():
    p = SystemParams(xi=0.4, kappa_si=0.0)
    assert parse_params(dump_params(p)) == p
