import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st_

from swan_isac import (
    Position3D,
    SearchConfig,
    SwanLayout,
    aggregate_gain,
    cascaded_channels,
    coarse_placement,
    elementwise_search,
    refine_rx_chain,
    rx_chain_placement,
)
from swan_isac.core_model import cascade_batch
from swan_isac.experiments import default_scenario
from swan_isac.placement import rx_phase

CFG = default_scenario()
ST = Position3D(10.0, -6.0)


def test_single_segment_anchor():
    lay, steps = refine_rx_chain(CFG, SwanLayout.uniform(1, 20.0), ST)
    assert lay.pa_x[0] == ST.x
    assert steps[0].phi == 0.0 and steps[0].l == 0


def test_anchor_on_target_segment_and_feasible():
    tmpl = SwanLayout.uniform(7, 20.0)
    lay, steps = refine_rx_chain(CFG, tmpl, ST)
    m = tmpl.segment_index(ST.x)
    assert lay.pa_x[m] == ST.x
    assert lay.is_feasible(CFG.delta_min)
    assert [s.segment_index for s in steps] == list(range(7))


@settings(max_examples=40, deadline=None)
@given(st_.floats(5.0, 60.0), st_.integers(1, 25), st_.floats(0.0, 1.0), st_.floats(-10.0, 10.0))
def test_refined_chain_properties(D, M, u, y):
    cfg = CFG.with_(D_x=D)
    st = Position3D(u * D, y)
    tmpl = SwanLayout.uniform(M, D)
    lay, steps = refine_rx_chain(cfg, tmpl, st)
    assert lay.is_feasible(cfg.delta_min)
    m = tmpl.segment_index(st.x)
    ref = rx_phase(cfg, lay, st, m, lay.pa_x[m])
    for s in steps:
        if s.clipped:
            continue
        assert abs(s.phase_residual) <= 1e-9
        # direct recomputation of the phase offset
        off = ref - rx_phase(cfg, lay, st, s.segment_index, s.final_x) - 2 * np.pi * s.l
        assert abs(off) <= 1e-9
        # shifts move away from the target
        if s.segment_index > m:
            assert s.phi >= -1e-12
        elif s.segment_index < m:
            assert s.phi <= 1e-12
    assert aggregate_gain(cfg, lay, st) >= aggregate_gain(cfg, coarse_placement(cfg, tmpl, st), st) * (1 - 1e-12)


def test_right_side_shift_within_guided_wavelength():
    tmpl = SwanLayout.uniform(20, 40.0)
    st = Position3D(1.0, -6.0)
    _, steps = refine_rx_chain(CFG, tmpl, st)
    assert all(abs(s.phi) <= CFG.lambda_g for s in steps if not s.clipped)


def test_alignment_boosts_aggregate_gain():
    tmpl = SwanLayout.uniform(30, 20.0)
    aligned = aggregate_gain(CFG, rx_chain_placement(CFG, tmpl, ST), ST)
    coarse = aggregate_gain(CFG, coarse_placement(CFG, tmpl, ST), ST)
    assert aligned > 5 * coarse


def test_single_pa_gain_is_inverse_square():
    lay = rx_chain_placement(CFG, SwanLayout.uniform(1, 20.0), ST)
    att = 10 ** (-CFG.kappa_db_per_m * ST.x / 10)
    assert aggregate_gain(CFG, lay, ST) == pytest.approx(att / CFG.delta_rx(ST) ** 2)


def test_chain_is_deterministic():
    tmpl = SwanLayout.uniform(9, 20.0)
    a = refine_rx_chain(CFG, tmpl, ST)[0].pa_x
    b = refine_rx_chain(CFG, tmpl, ST)[0].pa_x
    assert a.tobytes() == b.tobytes()


def test_delta_min_longer_than_segment_rejected():
    with pytest.raises(ValueError):
        refine_rx_chain(CFG.with_(delta_min=2.0), SwanLayout.uniform(20, 20.0), ST)


# -- element-wise search ------------------------------------------------------

def test_search_config_validation():
    with pytest.raises(ValueError):
        SearchConfig(grid_step=0.0)
    with pytest.raises(ValueError):
        SearchConfig(tie_break="random")
    assert SearchConfig(grid_step=0.1).grid_count(1.0) == 10


def test_one_dimensional_concave():
    lay = SwanLayout(1, 10.0, [1.0])
    res = elementwise_search(lambda x: -(x[0] - 3.14159) ** 2, None, lay,
                             SearchConfig(grid_step=0.01), 0.005)
    assert abs(res.layout.pa_x[0] - 3.14) <= 0.005 + 1e-12


def test_separable_objective_in_one_cycle():
    c = np.array([0.37, 1.81, 2.22, 3.59])
    lay = SwanLayout.uniform(4, 4.0)
    res = elementwise_search(lambda x: -np.sum((x - c) ** 2), None, lay,
                             SearchConfig(grid_step=0.01), 0.005)
    assert np.all(np.abs(res.layout.pa_x - c) <= 0.01)
    assert res.n_iters <= 2


def test_history_is_nondecreasing_and_improves():
    rng = np.random.default_rng(0)
    w = rng.uniform(-1, 1, (3, 3))
    obj = lambda x: float(np.sin(x @ w).sum())
    lay = SwanLayout.uniform(3, 6.0)
    res = elementwise_search(obj, None, lay, SearchConfig(grid_step=0.05), 0.005)
    assert np.all(np.diff(res.history) > 0)
    assert res.value >= obj(lay.pa_x)
    assert res.layout.is_feasible(0.005)


def test_spacing_respected_at_every_accepted_state():
    seen = []

    def obj(x):
        seen.append(np.array(x))
        return -abs(x[0] - x[1])  # pulls the PAs together at the boundary

    lay = SwanLayout(2, 1.0, [0.2, 1.8])
    res = elementwise_search(obj, None, lay, SearchConfig(grid_step=0.01), 0.05)
    assert res.layout.is_feasible(0.05)
    assert all(abs(x[0] - x[1]) >= 0.05 - 1e-12 for x in seen)


def test_feasibility_callback_and_infeasible_start():
    lay = SwanLayout(1, 10.0, [1.0])
    res = elementwise_search(lambda x: x[0], lambda x: x[0] <= 4.0, lay,
                             SearchConfig(grid_step=0.5), 0.005)
    assert res.layout.pa_x[0] == 4.0
    with pytest.raises(ValueError):
        elementwise_search(lambda x: x[0], lambda x: x[0] > 5.0, lay, SearchConfig(), 0.005)
    with pytest.raises(ValueError):
        elementwise_search(lambda x: x[0], None, SwanLayout(2, 1.0, [1.0, 1.0]),
                           SearchConfig(), 0.005)


def test_non_finite_points_are_skipped():
    lay = SwanLayout(1, 1.0, [0.5])
    res = elementwise_search(lambda x: np.nan if x[0] > 0.75 else x[0], None, lay,
                             SearchConfig(grid_step=0.1), 0.005)
    assert res.layout.pa_x[0] == pytest.approx(0.7)


def test_vectorized_matches_scalar():
    obj = lambda X: -np.sum((np.atleast_2d(X) - 0.3) ** 2, axis=1)
    lay = SwanLayout.uniform(3, 3.0)
    sc = SearchConfig(grid_step=0.05)
    a = elementwise_search(obj, None, lay, sc, 0.005, vectorized=True)
    b = elementwise_search(lambda x: float(obj(x)[0]), None, lay, sc, 0.005)
    np.testing.assert_array_equal(a.layout.pa_x, b.layout.pa_x)


def test_matches_exhaustive_grid_on_aggregated_rate():
    """Three segments, coarse grid: the best of several searches equals the
    product-grid maximum of the aggregated rate under an echo-SNR floor.

    Coordinate ascent is a local method on this objective, so (as in the
    protocol solvers) it is run from several feasible starts.
    """
    cfg = CFG.with_(D_x=3.0, kappa_db_per_m=0.08)
    cu, st = Position3D(2.2, 1.0), Position3D(0.8, -6.0)
    tmpl = SwanLayout.uniform(3, 3.0)
    rx = rx_chain_placement(cfg, tmpl, st)
    f_sum = abs(cascaded_channels(cfg, rx, st, "rx").sum()) ** 2
    feed = tmpl.feed_x

    def parts(X):
        hc = cascade_batch(cfg, feed, X, cfg.y_t, cu).sum(axis=-1)
        hs = cascade_batch(cfg, feed, X, cfg.y_t, st).sum(axis=-1)
        rate = np.log2(1 + cfg.P_max * np.abs(hc) ** 2 / (3 * cfg.sigma_c_sq))
        gs = cfg.alpha * cfg.P_max * f_sum * np.abs(hs) ** 2 / (9 * cfg.sigma_s_sq)
        return rate, gs

    step = 0.1
    grid = [np.minimum(lo + step * np.arange(11), lo + 1.0) for lo in feed]
    X = np.array(list(itertools.product(*grid)))
    rate, gs = parts(X)
    G = np.quantile(gs, 0.3)
    brute = rate[gs >= G].max()
    start = tmpl.with_pa(X[np.argmax(np.where(gs >= G, 0.0, -np.inf) - np.abs(X - 0.5 - feed).sum(1))])
    obj = lambda Y: np.where(parts(Y)[1] >= G, parts(Y)[0], -np.inf)
    feas = lambda Y: parts(Y)[1] >= G
    best = -np.inf
    for s in [start] + [tmpl.with_pa(x) for x in X[gs >= G][::40]]:
        res = elementwise_search(obj, feas, s, SearchConfig(grid_step=step, rel_tol=1e-12),
                                 cfg.delta_min, vectorized=True)
        best = max(best, res.value)
    assert best == pytest.approx(brute, abs=1e-6)
