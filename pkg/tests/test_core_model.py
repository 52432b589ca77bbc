import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st_

from swan_isac import (
    DegenerateGeometryError,
    InvalidSolutionError,
    Position3D,
    Protocol,
    ProtocolSolution,
    ScenarioConfig,
    SwanLayout,
    cascaded_channels,
    dbm_to_watt,
    free_space_coeff,
    in_waveguide_coeff,
    snr_and_rate,
    watt_to_dbm,
)
from swan_isac.experiments import default_scenario

CFG = default_scenario()
ST = Position3D(10.0, -6.0)
CU = Position3D(14.0, 2.0)


def one_hot(n, i):
    e = np.zeros(n)
    e[i] = 1.0
    return e


def random_unit(rng, n):
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    return v / np.linalg.norm(v)


# -- configuration --------------------------------------------------------------

def test_default_scenario_derived_values():
    assert CFG.lambda_c == pytest.approx(1.0714e-2, rel=1e-4)
    assert CFG.beta == pytest.approx(9.2103e-3, rel=1e-4)
    assert CFG.eta == pytest.approx(8.526e-4, rel=1e-3)
    assert CFG.lambda_g == pytest.approx(CFG.lambda_c / 1.4)
    assert CFG.delta_min == pytest.approx(CFG.lambda_c / 2)
    assert CFG.delta_tx(ST) == pytest.approx(np.sqrt(130))
    assert CFG.delta_rx(ST) == pytest.approx(np.sqrt(10))


def test_derived_values_follow_field_changes():
    cfg = CFG.with_(carrier_freq_hz=14e9, delta_min=None)
    assert cfg.lambda_c == pytest.approx(2 * CFG.lambda_c)
    assert cfg.delta_min == pytest.approx(cfg.lambda_c / 2)


@pytest.mark.parametrize("field", ["carrier_freq_hz", "n_eff", "d", "P_max", "sigma_s_sq", "alpha"])
def test_config_rejects_nonpositive(field):
    with pytest.raises(ValueError):
        CFG.with_(**{field: 0.0})


def test_config_rejects_negative_kappa():
    with pytest.raises(ValueError):
        CFG.with_(kappa_db_per_m=-0.1)


@given(st_.floats(min_value=-150, max_value=60))
def test_dbm_round_trip(p_dbm):
    assert float(watt_to_dbm(dbm_to_watt(p_dbm))) == pytest.approx(p_dbm, rel=1e-12, abs=1e-12)


# -- layouts ------------------------------------------------------------------

def test_uniform_layout_geometry():
    lay = SwanLayout.uniform(4, 20.0)
    np.testing.assert_allclose(lay.feed_x, [0, 5, 10, 15])
    np.testing.assert_allclose(lay.pa_x, [2.5, 7.5, 12.5, 17.5])
    assert lay.segment_bounds(2) == (10.0, 15.0)
    assert lay.is_feasible(CFG.delta_min)


def test_segment_index_ceiling_rule():
    lay = SwanLayout.uniform(4, 20.0)
    assert lay.segment_index(0.0) == 0
    assert lay.segment_index(5.0) == 0       # shared boundary goes left
    assert lay.segment_index(5.0001) == 1
    assert lay.segment_index(20.0) == 3
    np.testing.assert_array_equal(lay.segment_index(np.array([1.0, 6.0, 19.0])), [0, 1, 3])


def test_layout_violations_are_reported():
    lay = SwanLayout(2, 1.0, [0.999, 1.0])
    assert any("closer" in v for v in lay.violations(0.005))
    lay = SwanLayout(2, 1.0, [0.5, 2.5])
    assert any("outside" in v for v in lay.violations(0.005))
    with pytest.raises(ValueError):
        SwanLayout(3, 1.0, [0.5, 1.5])


def test_layout_positions_are_read_only():
    lay = SwanLayout.uniform(2, 2.0)
    with pytest.raises(ValueError):
        lay.pa_x[0] = 0.1


# -- coefficients ---------------------------------------------------------------

def test_in_waveguide_coeff_examples():
    assert in_waveguide_coeff(CFG, 0.0, 0.0) == 1 + 0j
    assert abs(in_waveguide_coeff(CFG.with_(kappa_db_per_m=0.0), 0.0, 7.3)) == pytest.approx(1.0)
    assert abs(in_waveguide_coeff(CFG, 0.0, 10.0)) == pytest.approx(10 ** -0.04, rel=1e-12)
    assert abs(in_waveguide_coeff(CFG, 0.0, 10.0)) == pytest.approx(0.9120, abs=1e-4)


def test_free_space_coeff_examples():
    pa = Position3D(0.0, 0.0, 0.0)
    c = free_space_coeff(CFG, pa, Position3D(1.0, 0.0, 0.0))
    assert abs(c) == pytest.approx(8.526e-4, rel=1e-3)
    c = free_space_coeff(CFG, pa, Position3D(CFG.lambda_c, 0.0, 0.0))
    assert np.angle(c) == pytest.approx(0.0, abs=1e-9)
    c = free_space_coeff(CFG, Position3D(2.0, 1.0, 3.0), Position3D(2.0, 1.0, 0.0))
    assert abs(c) == pytest.approx(CFG.eta / 3)
    with pytest.raises(DegenerateGeometryError):
        free_space_coeff(CFG, pa, pa)


def test_cascaded_channel_single_segment_lossless():
    cfg = CFG.with_(kappa_db_per_m=0.0)
    point = Position3D(3.0, cfg.y_t, 0.0)
    lay = SwanLayout(1, 10.0, [3.0])
    h = cascaded_channels(cfg, lay, point, "tx")[0]
    expect = cfg.eta / cfg.d * np.exp(-1j * cfg.k_c * cfg.d) * np.exp(-1j * cfg.k_g * 3.0)
    assert h == pytest.approx(expect, rel=1e-12)


def test_cascaded_channel_mirror_symmetry():
    lay = SwanLayout(2, 10.0, [8.0, 12.0])
    h = cascaded_channels(CFG, lay, Position3D(10.0, 0.0), "tx")
    assert abs(h[0]) / abs(in_waveguide_coeff(CFG, 0.0, 8.0)) == pytest.approx(
        abs(h[1]) / abs(in_waveguide_coeff(CFG, 10.0, 12.0)))


def test_cascaded_channel_matches_separate_products():
    lay = SwanLayout(3, 5.0, [1.2, 6.6, 14.1])
    for side, y in (("tx", CFG.y_t), ("rx", CFG.y_r)):
        h = cascaded_channels(CFG, lay, CU, side)
        fs = [free_space_coeff(CFG, Position3D(x, y, CFG.d), CU) for x in lay.pa_x]
        wg = in_waveguide_coeff(CFG, lay.feed_x, lay.pa_x)
        np.testing.assert_allclose(h, np.array(fs) * wg, rtol=1e-12)


# -- SNRs -----------------------------------------------------------------------

def test_ss_snr_matches_direct_formula():
    cfg = CFG.with_(kappa_db_per_m=0.0)
    lay = SwanLayout(1, 20.0, [CU.x])
    sol = ProtocolSolution(Protocol.SS, lay, lay, cfg.P_max, [1.0], [1.0])
    rep = snr_and_rate(cfg, sol, CU, ST)
    assert rep.gamma_c == pytest.approx(cfg.P_max * cfg.eta ** 2
                                        / (cfg.sigma_c_sq * cfg.delta_tx(CU) ** 2), rel=1e-12)
    assert rep.rate == pytest.approx(np.log2(1 + rep.gamma_c))


def test_sm_mrt_maximises_gamma_c():
    rng = np.random.default_rng(0)
    lay = SwanLayout.uniform(4, 20.0)
    h_c = cascaded_channels(CFG, lay, CU, "tx")
    f_s = cascaded_channels(CFG, lay, ST, "rx")
    w_r = np.conj(f_s) / np.linalg.norm(f_s)
    mrt = np.conj(h_c) / np.linalg.norm(h_c)
    best = snr_and_rate(CFG, ProtocolSolution("SM", lay, lay, CFG.P_max, mrt, w_r), CU, ST)
    assert best.gamma_c == pytest.approx(CFG.P_max * np.linalg.norm(h_c) ** 2 / CFG.sigma_c_sq)
    for _ in range(200):
        other = snr_and_rate(CFG, ProtocolSolution("SM", lay, lay, CFG.P_max,
                                                   random_unit(rng, 4), w_r), CU, ST)
        assert other.gamma_c <= best.gamma_c * (1 + 1e-12)


def test_sa_single_segment_equals_ss():
    lay = SwanLayout(1, 20.0, [7.7])
    rx = SwanLayout(1, 20.0, [11.3])
    sa = snr_and_rate(CFG, ProtocolSolution("SA", lay, rx, CFG.P_max), CU, ST)
    ss = snr_and_rate(CFG, ProtocolSolution("SS", lay, rx, CFG.P_max, [1.0], [1.0]), CU, ST)
    assert sa.gamma_s == pytest.approx(ss.gamma_s, rel=1e-12)
    assert sa.gamma_c == pytest.approx(ss.gamma_c, rel=1e-12)


def test_ss_best_pair_matches_brute_force():
    tx = SwanLayout.uniform(3, 20.0)
    rx = SwanLayout.uniform(4, 20.0)
    h_s = cascaded_channels(CFG, tx, ST, "tx")
    f_s = cascaded_channels(CFG, rx, ST, "rx")
    direct = max(CFG.alpha * CFG.P_max * abs(f_s[m] * h_s[n]) ** 2 / CFG.sigma_s_sq
                 for n in range(3) for m in range(4))
    swept = max(snr_and_rate(CFG, ProtocolSolution("SS", tx, rx, CFG.P_max, one_hot(3, n),
                                                   one_hot(4, m)), CU, ST).gamma_s
                for n in range(3) for m in range(4))
    assert swept == pytest.approx(direct, rel=1e-12)


def test_sa_noise_and_power_split():
    tx, rx = SwanLayout.uniform(3, 20.0), SwanLayout.uniform(2, 20.0)
    rep = snr_and_rate(CFG, ProtocolSolution("SA", tx, rx, CFG.P_max), CU, ST)
    h_s = cascaded_channels(CFG, tx, ST, "tx").sum()
    f_s = cascaded_channels(CFG, rx, ST, "rx").sum()
    expect = CFG.alpha * CFG.P_max * abs(h_s * f_s) ** 2 / (3 * 2 * CFG.sigma_s_sq)
    assert rep.gamma_s == pytest.approx(expect, rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(st_.floats(0, 2 * np.pi), st_.floats(1e-3, 10.0), st_.integers(1, 5))
def test_sm_snrs_phase_invariant_and_homogeneous(theta, P, K):
    rng = np.random.default_rng(1)
    lay = SwanLayout.uniform(3, 20.0)
    w, v = random_unit(rng, 3), random_unit(rng, 3)
    base = snr_and_rate(CFG, ProtocolSolution("SM", lay, lay, 1.0, w, v), CU, ST, K)
    rot = snr_and_rate(CFG, ProtocolSolution("SM", lay, lay, P, w * np.exp(1j * theta), v),
                       CU, ST, K)
    assert rot.gamma_c == pytest.approx(P * base.gamma_c, rel=1e-10)
    assert rot.gamma_s == pytest.approx(P * base.gamma_s, rel=1e-10)
    assert rot.rate == pytest.approx(np.log2(1 + rot.gamma_c) / K)


def test_invalid_solutions_are_rejected():
    lay = SwanLayout.uniform(2, 20.0)
    with pytest.raises(InvalidSolutionError, match="SS"):
        snr_and_rate(CFG, ProtocolSolution("SS", lay, lay, 1.0, [1.0, 1.0], [1.0, 0.0]), CU, ST)
    with pytest.raises(InvalidSolutionError, match="SM"):
        snr_and_rate(CFG, ProtocolSolution("SM", lay, lay, 1.0, [1.0, 1.0], [1.0, 0.0]), CU, ST)
    with pytest.raises(InvalidSolutionError, match="dimension"):
        snr_and_rate(CFG, ProtocolSolution("SS", lay, lay, 1.0, [1.0], [1.0, 0.0]), CU, ST)
    with pytest.raises(ValueError):
        snr_and_rate(CFG, ProtocolSolution("SA", lay, lay, 1.0), CU, ST, K=0)
