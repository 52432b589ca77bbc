"""Single-user, single-target rate versus sensing-threshold fronts for the
selection (SS), aggregation (SA) and multiplexing (SM) protocols."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .beamforming import mrc_combiner, subspace_beamformer, subspace_comm_gain
from .core_model import (
    Position3D,
    Protocol,
    ProtocolSolution,
    ScenarioConfig,
    SwanLayout,
    cascade_batch,
    cascaded_channels,
    snr_and_rate,
)
from .placement import SearchConfig, coarse_placement, elementwise_search, refine_rx_chain

log = logging.getLogger(__name__)

__all__ = [
    "ParetoPoint",
    "solve_ss_single",
    "solve_sa_single",
    "solve_sm_single",
    "pareto_sweep",
    "pareto_fronts",
    "default_layouts",
]

Layouts = Tuple[SwanLayout, SwanLayout]


@dataclass
class ParetoPoint:
    """One point of a front.

    ``achieved_rate``/``achieved_gamma_s`` are recomputed from the returned
    solution through :func:`snr_and_rate` and are ``nan`` for infeasible
    points.  ``closed_form_rate`` is only set by the SS solver (the
    loss-free analytic value).
    """

    gamma_sen_threshold: float
    achieved_rate: float
    achieved_gamma_s: float
    solution: Optional[ProtocolSolution]
    feasible: bool
    closed_form_rate: Optional[float] = None
    info: Dict[str, float] = field(default_factory=dict)


def default_layouts(cfg: ScenarioConfig, n_tx: int, m_rx: int) -> Layouts:
    return SwanLayout.uniform(n_tx, cfg.D_x), SwanLayout.uniform(m_rx, cfg.D_x)


def _infeasible(G) -> ParetoPoint:
    return ParetoPoint(G, float("nan"), float("nan"), None, False)


def _evaluate(cfg, sol, cu, st, G, **kw) -> ParetoPoint:
    rep = snr_and_rate(cfg, sol, cu, st)
    ok = rep.gamma_s >= G * (1 - 1e-9)
    if not ok:
        log.warning("recomputed echo SNR %.6g misses threshold %.6g", rep.gamma_s, G)
    return ParetoPoint(G, rep.rate, rep.gamma_s, sol, ok,
                       info={"gamma_c": rep.gamma_c}, **kw)


def _place_single(layout: SwanLayout, x: float) -> Tuple[SwanLayout, np.ndarray]:
    """Layout with PA ``x`` on its own segment, others at segment centres,
    plus the matching one-hot selection vector."""
    i = layout.segment_index(x)
    pa = (np.arange(layout.n_segments) + 0.5) * layout.segment_len
    pa[i] = x
    sel = np.zeros(layout.n_segments)
    sel[i] = 1.0
    return layout.with_pa(pa), sel


def solve_ss_single(cfg: ScenarioConfig, cu: Position3D, st: Position3D, Gamma_sen: float,
                    layouts: Optional[Layouts] = None, include_loss: bool = True,
                    init_x: Optional[float] = None, grid_step: float = 1e-3) -> ParetoPoint:
    """Segment selection with the analytic Tx interval.

    The receive PA sits at ``x_s``.  Ignoring waveguide loss, the echo SNR
    constraint confines the Tx PA to an interval around ``x_s``; the rate is
    maximised by the point of that interval nearest ``x_c`` and its rate is
    returned as ``closed_form_rate``.

    With ``include_loss`` the Tx position is then chosen among the analytic
    point, ``init_x`` (e.g. the solution at a higher threshold) and a grid of
    step ``grid_step`` over the waveguide, keeping the best loss-inclusive
    rate that still meets the threshold with loss.  Without it the analytic
    point is returned as is.
    """
    tx_t, rx_t = layouts or default_layouts(cfg, 1, 1)
    P, eta = cfg.P_max, cfg.eta
    D = min(tx_t.length, rx_t.length)
    dt, dr, dc = cfg.delta_tx(st), cfg.delta_rx(st), cfg.delta_tx(cu)
    if Gamma_sen <= 0:
        lo, hi = 0.0, D
    else:
        radicand = eta ** 4 * cfg.alpha * P / (cfg.sigma_s_sq * Gamma_sen * dr ** 2) - dt ** 2
        if radicand < 0:
            return _infeasible(Gamma_sen)
        lo, hi = max(0.0, st.x - np.sqrt(radicand)), min(D, st.x + np.sqrt(radicand))
        if lo > hi:
            return _infeasible(Gamma_sen)
    x_t = float(np.clip(cu.x, lo, hi))
    closed_rate = float(np.log2(1 + P * eta ** 2 / (cfg.sigma_c_sq * ((x_t - cu.x) ** 2 + dc ** 2))))

    rx, e_r = _place_single(rx_t, float(np.clip(st.x, 0.0, rx_t.length)))

    def build(x):
        tx, e_t = _place_single(tx_t, x)
        return ProtocolSolution(Protocol.SS, tx, rx, P, e_t, e_r)

    if not include_loss:
        return _evaluate(cfg.with_(kappa_db_per_m=0.0), build(x_t), cu, st, Gamma_sen,
                         closed_form_rate=closed_rate)

    extra = [x_t] if init_x is None else [x_t, float(init_x)]
    cand = np.concatenate([np.linspace(0.0, tx_t.length,
                                       int(np.ceil(tx_t.length / grid_step)) + 1), extra])
    feed = tx_t.segment_index(cand) * tx_t.segment_len
    f_r = cascaded_channels(cfg, rx, st, "rx")[rx_t.segment_index(rx.pa_x[np.argmax(e_r)])]
    h_c = cascade_batch(cfg, feed, cand, cfg.y_t, cu)
    h_s = cascade_batch(cfg, feed, cand, cfg.y_t, st)
    rate = np.log2(1 + P * np.abs(h_c) ** 2 / cfg.sigma_c_sq)
    gs = cfg.alpha * P * np.abs(f_r * h_s) ** 2 / cfg.sigma_s_sq
    ok = gs >= Gamma_sen
    if not ok.any():
        return _infeasible(Gamma_sen)
    order = np.lexsort((cand, -np.where(ok, rate, -np.inf)))  # best rate, then lowest x
    return _evaluate(cfg, build(float(cand[order[0]])), cu, st, Gamma_sen,
                     closed_form_rate=closed_rate)


def _penalised(rate, gamma_s, G):
    """Rate where the echo SNR meets ``G``; a negative shortfall otherwise."""
    with np.errstate(divide="ignore"):
        short = -np.log(G / np.maximum(gamma_s, 1e-300))
    return np.where(gamma_s >= G, rate, np.minimum(short, 0.0) - 1e-12)


def _starts(cfg, tx_t, cu, st, init_tx) -> List[SwanLayout]:
    starts = [tx_t]
    for target in (cu, st):
        try:
            starts.append(refine_rx_chain(cfg, tx_t, target, side="tx")[0])
        except ValueError as exc:
            log.debug("skipping aligned start: %s", exc)
    if init_tx is not None:
        starts = ([init_tx] if isinstance(init_tx, SwanLayout) else list(init_tx)) + starts
    return [s for s in starts if s.is_feasible(cfg.delta_min)]


def _best_search(objective, starts, sc, dmin):
    best = None
    for s in starts:
        res = elementwise_search(objective, None, s, sc, dmin, vectorized=True)
        if best is None or res.value > best.value:
            best = res
    return best


def solve_sa_single(cfg: ScenarioConfig, layouts: Layouts, cu: Position3D, st: Position3D,
                    Gamma_sen: float, sc: SearchConfig = SearchConfig(),
                    init_tx=None) -> ParetoPoint:
    """Segment aggregation: phase-aligned Rx chain, grid-searched Tx.

    The Tx search maximises the rate among layouts meeting the echo SNR
    threshold; infeasible candidates score by their (negative) shortfall so
    the search can climb into the feasible set.  It is started from the
    template layout, from layouts phase-aligned toward the user and the
    target, and from ``init_tx`` if given; the best result is kept.
    """
    tx_t, rx_t = layouts
    P, N, M = cfg.P_max, tx_t.n_segments, rx_t.n_segments
    rx = refine_rx_chain(cfg, rx_t, st)[0]
    f_sum = abs(cascaded_channels(cfg, rx, st, "rx").sum()) ** 2
    feed = tx_t.feed_x

    def objective(X):
        hc = cascade_batch(cfg, feed, X, cfg.y_t, cu).sum(axis=1)
        hs = cascade_batch(cfg, feed, X, cfg.y_t, st).sum(axis=1)
        gc = P * np.abs(hc) ** 2 / (N * cfg.sigma_c_sq)
        gs = cfg.alpha * P * f_sum * np.abs(hs) ** 2 / (N * M * cfg.sigma_s_sq)
        return _penalised(np.log2(1 + gc), gs, Gamma_sen)

    best = _best_search(objective, _starts(cfg, tx_t, cu, st, init_tx), sc, cfg.delta_min)
    if best.value < 0:
        return _infeasible(Gamma_sen)
    sol = ProtocolSolution(Protocol.SA, best.layout, rx, P)
    return _evaluate(cfg, sol, cu, st, Gamma_sen)


def solve_sm_single(cfg: ScenarioConfig, layouts: Layouts, cu: Position3D, st: Position3D,
                    Gamma_sen: float, sc: SearchConfig = SearchConfig(),
                    init_tx=None) -> ParetoPoint:
    """Segment multiplexing: coarse Rx placement with MRC, grid-searched Tx
    with the rate-optimal beamformer under the echo SNR floor at every
    candidate."""
    tx_t, rx_t = layouts
    P = cfg.P_max
    rx = coarse_placement(cfg, rx_t, st)
    f_s = cascaded_channels(cfg, rx, st, "rx")
    fs2 = float(np.vdot(f_s, f_s).real)
    feed = tx_t.feed_x

    def objective(X):
        hc = cascade_batch(cfg, feed, X, cfg.y_t, cu)
        hs = cascade_batch(cfg, feed, X, cfg.y_t, st)
        gain, ok = subspace_comm_gain(hc, hs, fs2, P, Gamma_sen, cfg.alpha, cfg.sigma_s_sq)
        rate = np.log2(1 + np.where(ok, gain, 0.0) / cfg.sigma_c_sq)
        # best reachable echo SNR (all power on the target direction)
        gs_max = cfg.alpha * fs2 * P * np.sum(np.abs(hs) ** 2, axis=1) / cfg.sigma_s_sq
        return _penalised(rate, np.where(ok, np.inf, gs_max), Gamma_sen)

    best = _best_search(objective, _starts(cfg, tx_t, cu, st, init_tx), sc, cfg.delta_min)
    if best.value < 0:
        return _infeasible(Gamma_sen)
    tx = best.layout
    h_c = cascaded_channels(cfg, tx, cu, "tx")
    h_s = cascaded_channels(cfg, tx, st, "tx")
    bf = subspace_beamformer(h_c, h_s, f_s, P, Gamma_sen, cfg.alpha, cfg.sigma_s_sq)
    w_t = bf.w / np.linalg.norm(bf.w)
    sol = ProtocolSolution(Protocol.SM, tx, rx, P, w_t, mrc_combiner(f_s))
    pt = _evaluate(cfg, sol, cu, st, Gamma_sen)
    pt.info["branch_mrt"] = float(bf.branch == "mrt")
    return pt


_SOLVERS = {Protocol.SA: solve_sa_single, Protocol.SM: solve_sm_single}


def pareto_sweep(protocol, cfg: ScenarioConfig, cu: Position3D, st: Position3D,
                 thresholds: Sequence[float], layouts: Optional[Layouts] = None,
                 sc: SearchConfig = SearchConfig(), extra_starts=None) -> List[ParetoPoint]:
    """One :class:`ParetoPoint` per threshold (ascending order).

    Thresholds are solved from the largest down, each search also starting
    from the previous solution.  A layout feasible at a higher threshold is
    feasible at every lower one, so the returned front is non-increasing by
    construction; this is asserted.  ``extra_starts[i]`` optionally adds
    starting Tx layouts for threshold ``i``.
    """
    protocol = Protocol(protocol)
    thresholds = [float(t) for t in thresholds]
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise ValueError("thresholds must be sorted ascending")
    if not thresholds:
        return []
    layouts = layouts or default_layouts(cfg, 15, 15)
    out: List[Optional[ParetoPoint]] = [None] * len(thresholds)
    prev, prev_sel = None, None
    for i in range(len(thresholds) - 1, -1, -1):
        G = thresholds[i]
        if protocol is Protocol.SS:
            x0 = None if prev is None else float(prev.pa_x[np.argmax(prev_sel)])
            pt = solve_ss_single(cfg, cu, st, G, layouts, init_x=x0)
            if pt.feasible:
                prev, prev_sel = pt.solution.tx, pt.solution.tx_weights
        else:
            starts = [] if prev is None else [prev]
            if extra_starts is not None:
                starts += list(extra_starts[i])
            pt = _SOLVERS[protocol](cfg, layouts, cu, st, G, sc, init_tx=starts or None)
            if pt.feasible:
                prev = pt.solution.tx
        out[i] = pt
    rates = [p.achieved_rate for p in out if p.feasible]
    if any(b > a + 1e-12 * max(1.0, abs(a)) for a, b in zip(rates, rates[1:])):
        raise AssertionError(f"{protocol.value} front is not monotone: {rates}")
    return out


def pareto_fronts(cfg: ScenarioConfig, cu: Position3D, st: Position3D,
                  thresholds: Sequence[float], layouts: Optional[Layouts] = None,
                  sc: SearchConfig = SearchConfig(),
                  protocols=("SS", "SA", "SM")) -> Dict[Protocol, List[ParetoPoint]]:
    """Fronts of several protocols on one scenario.

    When both SA and SM are requested, each SA Tx layout also seeds the SM
    search at the same threshold.
    """
    protocols = [Protocol(p) for p in protocols]
    fronts: Dict[Protocol, List[ParetoPoint]] = {}
    for p in (Protocol.SS, Protocol.SA):
        if p in protocols:
            fronts[p] = pareto_sweep(p, cfg, cu, st, thresholds, layouts, sc)
    if Protocol.SM in protocols:
        extra = None
        if Protocol.SA in fronts:
            extra = [[pt.solution.tx] if pt.feasible else [] for pt in fronts[Protocol.SA]]
        fronts[Protocol.SM] = pareto_sweep(Protocol.SM, cfg, cu, st, thresholds, layouts, sc,
                                           extra_starts=extra)
    return {p: fronts[p] for p in protocols}
