"""Multi-user TDMA with pinch multiplexing: one PA placement shared by all
slots, per-slot power by water-filling and, for the multiplexing protocol,
per-slot beamformers from a one-parameter family."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .beamforming import epsilon_beamformer, mrc_combiner
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
    "InfeasibleQoSError",
    "TdmaProblem",
    "TdmaSolution",
    "water_fill",
    "water_fill_batch",
    "slot_floors",
    "solve_ss_multi",
    "solve_sa_multi",
    "solve_sm_multi",
]

_BIG = 1e300


class InfeasibleQoSError(ValueError):
    """The per-slot power floors exceed the budget."""


@dataclass(frozen=True)
class TdmaProblem:
    """``Gamma_com`` is a per-user rate floor in bits/s/Hz (after the 1/K
    TDMA factor) unless ``unscaled_floors`` is set, in which case the
    floor is applied to ``log2(1+SNR)`` directly."""

    cus: Sequence[Position3D]
    st: Position3D
    Gamma_sen: float
    Gamma_com: float
    P_max: float
    unscaled_floors: bool = False

    def __post_init__(self):
        object.__setattr__(self, "cus", tuple(self.cus))
        if not self.cus:
            raise ValueError("need at least one user")
        if self.Gamma_sen < 0 or self.Gamma_com < 0 or not self.P_max > 0:
            raise ValueError("thresholds must be nonnegative and P_max positive")

    @property
    def K(self) -> int:
        return len(self.cus)

    @property
    def snr_floor(self) -> float:
        """Communication SNR each slot must reach."""
        e = self.Gamma_com if self.unscaled_floors else self.K * self.Gamma_com
        return float(2.0 ** e - 1.0)


@dataclass
class TdmaSolution:
    protocol: Protocol
    tx: SwanLayout
    rx: SwanLayout
    per_slot_power: np.ndarray
    per_slot_rates: np.ndarray
    sum_rate: float
    feasible: bool
    per_slot_beamformers: Optional[np.ndarray] = None  # (K, N), SM only
    per_slot_eps: Optional[np.ndarray] = None
    per_slot_gamma_s: Optional[np.ndarray] = None
    history: List[float] = field(default_factory=list)


# -- water-filling ----------------------------------------------------------

def water_fill_batch(g, floors, P_max: float, iters: int = 200):
    """Water-filling for many independent problems at once.

    ``g`` and ``floors`` have shape ``(Q, K)``.  Returns ``(powers, level,
    feasible)``; rows with ``sum(floors) > P_max`` (or an infinite floor)
    are infeasible and get their floors as powers.  ``g`` may contain zeros:
    such slots never rise above their floor.
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    F = np.atleast_2d(np.asarray(floors, dtype=float))
    with np.errstate(divide="ignore"):
        inv = np.where(g > 0, 1.0 / np.where(g > 0, g, 1.0), np.inf)
    feasible = np.all(np.isfinite(F), axis=1) & (F.sum(axis=1) <= P_max * (1 + 1e-12))
    Fz = np.where(np.isfinite(F), F, 0.0)

    def total(W):
        return np.maximum(Fz, W[:, None] - inv).sum(axis=1)

    finite_inv = np.where(np.isfinite(inv), inv, np.inf).min(axis=1)
    lo = np.zeros(len(g))
    hi = P_max + np.where(np.isfinite(finite_inv), finite_inv, 0.0)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        over = total(mid) > P_max
        hi = np.where(over, mid, hi)
        lo = np.where(over, lo, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(hi, 1.0)):
            break
    W = 0.5 * (lo + hi)
    # Exact level on the active set so the budget is met to rounding.
    active = (W[:, None] - inv) > Fz
    n_act = active.sum(axis=1)
    rest = P_max - np.where(active, 0.0, Fz).sum(axis=1)
    W_ex = (rest + np.where(active, inv, 0.0).sum(axis=1)) / np.maximum(n_act, 1)
    W = np.where(n_act > 0, W_ex, W)
    P = np.where(active, np.maximum(W[:, None] - inv, Fz), Fz)
    # Budget left with no slot able to use it (all gains zero): spread evenly.
    slack = P_max - P.sum(axis=1)
    dead = (n_act == 0) & (slack > 0) & np.all(~np.isfinite(inv), axis=1)
    P = np.where(dead[:, None], P + slack[:, None] / g.shape[1], P)
    return P, W, feasible


def water_fill(g_tilde, floors, P_max: float, K: Optional[int] = None,
               return_level: bool = False):
    """Sum-rate maximising powers ``P_k = max(floor_k, W - 1/g_k)`` with
    ``sum(P) = P_max``.

    ``K`` (the TDMA prefactor) only rescales the objective and is accepted
    for completeness.  Raises :class:`InfeasibleQoSError` ("infeasible
    QoS") when the floors exceed the budget.
    """
    g = np.asarray(g_tilde, dtype=float).reshape(-1)
    f = np.asarray(floors, dtype=float).reshape(-1)
    if g.shape != f.shape:
        raise ValueError("g_tilde and floors must have the same length")
    if K is not None and K != g.size:
        raise ValueError("K does not match the number of slots")
    if np.any(g < 0) or np.any(f < 0):
        raise ValueError("gains and floors must be nonnegative")
    P, W, ok = water_fill_batch(g[None, :], f[None, :], P_max)
    if not ok[0]:
        raise InfeasibleQoSError("infeasible QoS: floors exceed the power budget")
    return (P[0], float(W[0])) if return_level else P[0]


def slot_floors(prob: TdmaProblem, g_c, g_s):
    """Per-slot power floors ``max(com floor, sensing floor)``; broadcasts."""
    g_c = np.asarray(g_c, dtype=float)
    g_s = np.asarray(g_s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        fc = np.where(g_c > 0, prob.snr_floor / np.where(g_c > 0, g_c, 1.0),
                      np.inf if prob.snr_floor > 0 else 0.0)
        fs = np.where(g_s > 0, prob.Gamma_sen / np.where(g_s > 0, g_s, 1.0),
                      np.inf if prob.Gamma_sen > 0 else 0.0)
    return np.maximum(fc, fs)


def _score(prob, g_c, g_s):
    """Water-filled sum rate per row, or a negative budget shortfall when
    the floors cannot be met.  Returns ``(score, powers, feasible)``."""
    F = slot_floors(prob, g_c, g_s)
    P, _, ok = water_fill_batch(g_c, F, prob.P_max)
    rate = np.sum(np.log2(1 + P * g_c), axis=1) / prob.K
    need = np.minimum(np.where(np.isfinite(F), F, _BIG).sum(axis=1), _BIG)
    short = -np.log(np.maximum(need / prob.P_max, 1.0)) - 1e-12
    return np.where(ok, rate, short), P, ok


# -- common finishing -------------------------------------------------------

def _finish(cfg, prob, protocol, tx, rx, powers, ok, weights=None, rx_w=None,
            eps=None, history=None) -> TdmaSolution:
    K = prob.K
    if not ok:
        return TdmaSolution(protocol, tx, rx, np.zeros(K), np.zeros(K), 0.0, False,
                            weights, eps, None, history or [])
    rates, gs = np.empty(K), np.empty(K)
    floor_ok = True
    for k, cu in enumerate(prob.cus):
        w_k = weights[k] if protocol is Protocol.SM else weights
        sol = ProtocolSolution(protocol, tx, rx, float(powers[k]), w_k, rx_w)
        rep = snr_and_rate(cfg, sol, cu, prob.st, K)
        rates[k], gs[k] = rep.rate, rep.gamma_s
        floor_ok &= rep.gamma_s >= prob.Gamma_sen * (1 - 1e-9)
        floor_ok &= rep.gamma_c >= prob.snr_floor * (1 - 1e-9)
    if not floor_ok:
        log.warning("recomputed slot SNRs miss a floor")
    return TdmaSolution(protocol, tx, rx, np.asarray(powers, float), rates, float(rates.sum()),
                        bool(floor_ok), weights, eps, gs, history or [])


def _channels(cfg, feed, X, targets):
    return [cascade_batch(cfg, feed, X, cfg.y_t, t) for t in targets]


# -- segment selection --------------------------------------------------------

def solve_ss_multi(cfg: ScenarioConfig, prob: TdmaProblem, layouts=None,
                   sc: SearchConfig = SearchConfig()) -> TdmaSolution:
    """Segment selection: Rx PA at the target, one Tx PA position scanned
    over the whole waveguide with a water-filled sum rate per candidate."""
    tx_t, rx_t = layouts or (SwanLayout.uniform(1, cfg.D_x), SwanLayout.uniform(1, cfg.D_x))
    st = prob.st

    def single(layout, x):
        i = layout.segment_index(x)
        pa = (np.arange(layout.n_segments) + 0.5) * layout.segment_len
        pa[i] = x
        e = np.zeros(layout.n_segments)
        e[i] = 1.0
        return layout.with_pa(pa), e, i

    rx, e_r, m = single(rx_t, float(np.clip(st.x, 0, rx_t.length)))
    f2 = abs(cascaded_channels(cfg, rx, st, "rx")[m]) ** 2
    xs = np.linspace(0.0, tx_t.length, int(np.ceil(tx_t.length / sc.grid_step - 1e-9)) + 1)
    feed = tx_t.segment_index(xs) * tx_t.segment_len
    g_c = np.stack([np.abs(h) ** 2 / cfg.sigma_c_sq
                    for h in _channels(cfg, feed, xs, prob.cus)], axis=1)
    g_s1 = cfg.alpha * f2 * np.abs(cascade_batch(cfg, feed, xs, cfg.y_t, st)) ** 2 / cfg.sigma_s_sq
    score, P, ok = _score(prob, g_c, np.repeat(g_s1[:, None], prob.K, axis=1))
    q = int(np.argmax(score))  # first maximiser = lowest x
    tx, e_t, _ = single(tx_t, float(xs[q]))
    return _finish(cfg, prob, Protocol.SS, tx, rx, P[q], bool(ok[q]), e_t, e_r,
                   history=[float(score[q])])


# -- segment aggregation ------------------------------------------------------

def _tx_starts(cfg, tx_t, prob, init) -> list:
    starts = [tx_t]
    for target in (prob.st, *prob.cus):
        starts.append(refine_rx_chain(cfg, tx_t, target, side="tx")[0])
    if init is not None:
        init = [init] if isinstance(init, (SwanLayout, TdmaSolution)) else list(init)
        starts = init + starts
    return starts


def solve_sa_multi(cfg: ScenarioConfig, prob: TdmaProblem, layouts,
                   sc: SearchConfig = SearchConfig(), init_tx=None) -> TdmaSolution:
    """Segment aggregation: phase-aligned Rx chain, then a grid search of
    the Tx layout scored by the water-filled sum rate.

    The search runs from the template layout, from layouts phase-aligned to
    the target and to each user, and from ``init_tx`` (layouts or earlier
    solutions); the best result is kept.
    """
    tx_t, rx_t = layouts
    N, M = tx_t.n_segments, rx_t.n_segments
    rx = refine_rx_chain(cfg, rx_t, prob.st)[0]
    B = abs(cascaded_channels(cfg, rx, prob.st, "rx").sum()) ** 2 / M
    feed = tx_t.feed_x

    def gains(X):
        g_c = np.stack([np.abs(h.sum(axis=1)) ** 2 / (N * cfg.sigma_c_sq)
                        for h in _channels(cfg, feed, X, prob.cus)], axis=1)
        hs = cascade_batch(cfg, feed, X, cfg.y_t, prob.st).sum(axis=1)
        g_s = cfg.alpha * B * np.abs(hs) ** 2 / (N * cfg.sigma_s_sq)
        return g_c, np.repeat(g_s[:, None], prob.K, axis=1)

    objective = lambda X: _score(prob, *gains(X))[0]
    best = None
    for s in _tx_starts(cfg, tx_t, prob, init_tx):
        s = s.tx if isinstance(s, TdmaSolution) else s
        res = elementwise_search(objective, None, s, sc, cfg.delta_min, vectorized=True)
        if best is None or res.value > best.value:
            best = res
    score, P, ok = _score(prob, *gains(best.layout.pa_x[None, :]))
    return _finish(cfg, prob, Protocol.SA, best.layout, rx, P[0], bool(ok[0]),
                   history=best.history)


# -- segment multiplexing -----------------------------------------------------

def _sm_terms(cfg, feed, X, prob):
    """Per-slot ``(||h_c||^2, |h_s @ u_c|, ||h_s residual||)`` with shape (Q, K)."""
    hs = cascade_batch(cfg, feed, X, cfg.y_t, prob.st)
    hs2 = np.sum(np.abs(hs) ** 2, axis=1)
    hc2, p, r = [], [], []
    for hc in _channels(cfg, feed, X, prob.cus):
        n2 = np.sum(np.abs(hc) ** 2, axis=1)
        pk = np.abs(np.sum(hs * np.conj(hc), axis=1)) / np.sqrt(n2)
        hc2.append(n2)
        p.append(pk)
        r.append(np.sqrt(np.maximum(hs2 - pk ** 2, 0.0)))
    return np.stack(hc2, 1), np.stack(p, 1), np.stack(r, 1)


def _sm_gains(cfg, fs2, terms, eps):
    hc2, p, r = terms
    eps = np.asarray(eps, dtype=float)
    g_c = (1 - eps) * hc2 / cfg.sigma_c_sq
    g_s = cfg.alpha * fs2 * (np.sqrt(1 - eps) * p + np.sqrt(eps) * r) ** 2 / cfg.sigma_s_sq
    return g_c, g_s


def solve_sm_multi(cfg: ScenarioConfig, prob: TdmaProblem, layouts,
                   sc: SearchConfig = SearchConfig(), eps_step: float = 0.1,
                   init_tx=None) -> TdmaSolution:
    """Segment multiplexing by alternating optimisation.

    The Rx side uses coarse placement and one MRC combiner for all slots.
    Slot ``k`` transmits ``epsilon_beamformer(h_c_k, h_s, P_k, eps_k)``.
    Each round (i) grid-searches the Tx layout with the eps vector fixed and
    (ii) sweeps each ``eps_k`` over ``{0, eps_step, ..., 1}`` with the rest
    fixed; both steps only accept strict improvements, so the water-filled
    sum rate never decreases.  Rounds stop when the relative gain drops
    below ``sc.rel_tol`` or after ``sc.max_iters``.  Every start (template,
    aligned layouts, ``init_tx``) is run to convergence and the best kept;
    earlier :class:`TdmaSolution` starts also contribute their eps vector.
    """
    if not 0 < eps_step <= 1:
        raise ValueError("eps_step must lie in (0, 1]")
    tx_t, rx_t = layouts
    K = prob.K
    rx = coarse_placement(cfg, rx_t, prob.st)
    f_s = cascaded_channels(cfg, rx, prob.st, "rx")
    fs2 = float(np.vdot(f_s, f_s).real)
    feed = tx_t.feed_x
    grid = np.unique(np.append(np.arange(0.0, 1.0, eps_step), 1.0))

    def evaluate(X, eps):
        return _score(prob, *_sm_gains(cfg, fs2, _sm_terms(cfg, feed, X, prob), eps))

    def run(layout, eps):
        eps = np.array(eps, dtype=float)
        x = layout
        f = float(evaluate(x.pa_x[None, :], eps)[0][0])
        history = [f]
        for _ in range(sc.max_iters):
            f_start = f
            res = elementwise_search(lambda X: evaluate(X, eps)[0], None, x, sc,
                                     cfg.delta_min, vectorized=True)
            x, f = res.layout, res.value
            terms = _sm_terms(cfg, feed, x.pa_x[None, :], prob)
            for k in range(K):
                E = np.repeat(eps[None, :], grid.size, axis=0)
                E[:, k] = grid
                g_c, g_s = _sm_gains(cfg, fs2, tuple(t.repeat(grid.size, 0) for t in terms), E)
                s = _score(prob, g_c, g_s)[0]
                j = int(np.argmax(s))  # lowest eps among ties
                if s[j] > f:
                    eps, f = E[j].copy(), float(s[j])
            if f < history[-1]:
                raise AssertionError("alternating optimisation decreased the objective")
            history.append(f)
            if f - f_start <= sc.rel_tol * max(abs(f_start), 1e-300):
                break
        return x, eps, f, history

    best = None
    for s in _tx_starts(cfg, tx_t, prob, init_tx):
        if isinstance(s, TdmaSolution):
            eps0 = s.per_slot_eps if s.per_slot_eps is not None else np.zeros(K)
            s = s.tx
        else:
            eps0 = np.zeros(K)
        out = run(s, eps0)
        if best is None or out[2] > best[2]:
            best = out
    tx, eps, _, history = best
    _, P, ok = evaluate(tx.pa_x[None, :], eps)
    P, ok = P[0], bool(ok[0])
    h_s = cascaded_channels(cfg, tx, prob.st, "tx")
    W = np.empty((K, tx.n_segments), dtype=complex)
    for k, cu in enumerate(prob.cus):
        h_c = cascaded_channels(cfg, tx, cu, "tx")
        w = epsilon_beamformer(h_c, h_s, 1.0, float(eps[k]))
        W[k] = w / np.linalg.norm(w)
    return _finish(cfg, prob, Protocol.SM, tx, rx, P, ok, W, mrc_combiner(f_s), eps,
                   history)
