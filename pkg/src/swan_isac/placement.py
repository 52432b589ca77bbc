"""Pinching-antenna placement: the receive-side coarse-then-refine chain and
the coordinate-wise grid search used on the transmit side."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .core_model import Position3D, ScenarioConfig, SwanLayout, cascade_batch

log = logging.getLogger(__name__)

__all__ = [
    "RefinementStep",
    "SearchConfig",
    "SearchResult",
    "anchor_segment",
    "rx_phase",
    "refine_rx_chain",
    "rx_chain_placement",
    "coarse_placement",
    "aggregate_gain",
    "elementwise_search",
]


@dataclass(frozen=True)
class RefinementStep:
    """One PA of the receive chain.

    ``phase_residual`` is ``F(phi) - 2*pi*l`` in radians; it is zero up to
    rounding unless the step was clipped to its segment.
    """

    segment_index: int
    coarse_x: float
    phi: float
    l: int
    final_x: float
    clipped: bool = False
    phase_residual: float = 0.0


@dataclass(frozen=True)
class SearchConfig:
    grid_step: float = 1e-2
    max_iters: int = 50
    rel_tol: float = 1e-4
    tie_break: str = "lowest_x"

    def __post_init__(self):
        if not self.grid_step > 0 or not self.rel_tol > 0 or self.max_iters < 1:
            raise ValueError("grid_step, rel_tol and max_iters must be positive")
        if self.tie_break != "lowest_x":
            raise ValueError("only 'lowest_x' tie-breaking is supported")

    def grid_count(self, segment_len: float) -> int:
        return math.ceil(segment_len / self.grid_step - 1e-9)


def anchor_segment(layout: SwanLayout, x: float) -> int:
    """0-based index of the segment that holds ``x`` (ceiling rule)."""
    return layout.segment_index(x)


def _y_line(cfg, side):
    return {"rx": cfg.y_r, "tx": cfg.y_t}[side]


def rx_phase(cfg: ScenarioConfig, layout: SwanLayout, st: Position3D, i: int, x,
             side: str = "rx"):
    """Total phase of the cascaded coefficient of segment ``i`` with its PA
    at ``x`` (receive waveguide by default)."""
    y = _y_line(cfg, side)
    dist = np.sqrt((np.asarray(x) - st.x) ** 2 + (y - st.y) ** 2 + (cfg.d - st.z) ** 2)
    return -cfg.k_c * dist - cfg.k_g * np.abs(np.asarray(x) - layout.feed_x[i])


def _solve_aligned(cfg, layout, st, i, target, side="rx"):
    """Position ``u`` in segment ``i`` (unbounded) whose phase equals ``target``.

    The phase is strictly decreasing in ``u`` for ``n_eff > 1``, so squaring
    ``sqrt((u-x_s)^2 + D^2) = C - n u`` leaves one valid root.
    """
    n = cfg.n_eff
    x_s = st.x
    delta_sq = (_y_line(cfg, side) - st.y) ** 2 + (cfg.d - st.z) ** 2
    feed = layout.feed_x[i]
    C = -target / cfg.k_c + n * feed
    i3 = -C
    i1 = x_s + n * i3
    i2 = delta_sq + x_s ** 2 - i3 ** 2
    disc = i1 ** 2 - (1 - n ** 2) * i2
    if disc < 0 or n == 1:
        return None
    roots = [(i1 + s * math.sqrt(disc)) / (1 - n ** 2) for s in (1.0, -1.0)]
    valid = [u for u in roots if C - n * u >= -1e-9]
    if not valid:
        return None
    u = min(valid, key=lambda r: abs(rx_phase(cfg, layout, st, i, r, side) - target))
    for _ in range(3):
        # Newton polish on the unsquared equation
        r = math.sqrt((u - x_s) ** 2 + delta_sq)
        g = r + n * (u - feed) + target / cfg.k_c
        u -= g / ((u - x_s) / r + n)
    return u


def refine_rx_chain(cfg: ScenarioConfig, layout: SwanLayout, st: Position3D,
                    refine: bool = True, side: str = "rx"):
    """Place the receive PAs around the target.

    The PA on the segment holding ``st.x`` sits at ``st.x``.  Moving outward,
    each PA starts as close to the target as the segment bounds and
    ``delta_min`` allow, and is then shifted (away from the target) by the
    smallest amount that brings its phase in line with the anchor's modulo
    ``2*pi``.  Returns ``(layout, steps)`` with one :class:`RefinementStep`
    per segment, in segment order.

    ``side='tx'`` applies the same construction to the transmit waveguide,
    which gives a good starting layout for steering toward a point.
    """
    M, L, dmin = layout.n_segments, layout.segment_len, cfg.delta_min
    if dmin > L:
        raise ValueError("delta_min exceeds the segment length")
    m = anchor_segment(layout, st.x)
    lo_m, hi_m = layout.segment_bounds(m)
    x_anchor = float(np.clip(st.x, lo_m, hi_m))
    x = np.empty(M)
    x[m] = x_anchor
    steps = {m: RefinementStep(m, x_anchor, 0.0, 0, x_anchor)}
    theta_ref = float(rx_phase(cfg, layout, st, m, x_anchor, side))

    def place(i, coarse, direction):
        lo, hi = layout.segment_bounds(i)
        coarse = float(np.clip(coarse, lo, hi))
        if not refine:
            return RefinementStep(i, coarse, 0.0, 0, coarse)
        F = lambda u: theta_ref - float(rx_phase(cfg, layout, st, i, u, side))
        f0 = F(coarse) / (2 * np.pi)
        # F increases with u: ceil keeps the shift >= 0 (right side), floor <= 0.
        l = math.ceil(f0) if direction > 0 else math.floor(f0)
        u = _solve_aligned(cfg, layout, st, i, theta_ref - 2 * np.pi * l, side)
        if u is None:
            log.warning("no real phase-aligned shift for segment %d; keeping coarse", i)
            res = F(coarse) - 2 * np.pi * round(f0)
            return RefinementStep(i, coarse, 0.0, round(f0), coarse, True, res)
        if lo <= u <= hi:
            return RefinementStep(i, coarse, u - coarse, l, u, False, F(u) - 2 * np.pi * l)
        u_clip = float(np.clip(u, lo, hi))
        l_clip = round(F(u_clip) / (2 * np.pi))
        log.info("segment %d: aligned shift leaves the segment; clipped", i)
        return RefinementStep(i, coarse, u_clip - coarse, l_clip, u_clip, True,
                              F(u_clip) - 2 * np.pi * l_clip)

    for i in range(m + 1, M):
        coarse = max(x[i - 1] + dmin, layout.feed_x[i])
        steps[i] = place(i, coarse, +1)
        x[i] = steps[i].final_x
    for i in range(m - 1, -1, -1):
        coarse = min(x[i + 1] - dmin, layout.feed_x[i + 1])
        steps[i] = place(i, coarse, -1)
        x[i] = steps[i].final_x
    return layout.with_pa(x), [steps[i] for i in range(M)]


def rx_chain_placement(cfg: ScenarioConfig, layout: SwanLayout, st: Position3D) -> SwanLayout:
    """Phase-aligned receive layout maximising the aggregated echo gain."""
    return refine_rx_chain(cfg, layout, st, refine=True)[0]


def coarse_placement(cfg: ScenarioConfig, layout: SwanLayout, st: Position3D,
                     side: str = "rx") -> SwanLayout:
    """Path-loss-greedy layout without phase refinement."""
    return refine_rx_chain(cfg, layout, st, refine=False, side=side)[0]


def aggregate_gain(cfg: ScenarioConfig, layout: SwanLayout, st: Position3D,
                   side: str = "rx") -> float:
    """``|sum_m f_m|**2`` of the cascaded channel, normalised by ``eta**2``."""
    f = cascade_batch(cfg, layout.feed_x, layout.pa_x, _y_line(cfg, side), st)
    return float(abs(f.sum()) ** 2 / cfg.eta ** 2)


@dataclass
class SearchResult:
    layout: SwanLayout
    value: float
    history: List[float] = field(default_factory=list)
    n_iters: int = 0


def elementwise_search(objective: Callable, feasible: Optional[Callable],
                       layout: SwanLayout, sc: SearchConfig, delta_min: float,
                       vectorized: bool = False) -> SearchResult:
    """Coordinate-wise grid ascent over PA positions.

    Each sweep visits the segments in order and moves that segment's PA to
    the best grid point (step ``sc.grid_step``, lowest x on ties) that keeps
    ``delta_min`` spacing and passes ``feasible``; a move is accepted only if
    it strictly improves the objective.  Stops when one sweep improves the
    objective by less than ``sc.rel_tol`` (relative) or after
    ``sc.max_iters`` sweeps.

    With ``vectorized=True`` both callables receive a ``(Q, N)`` array of
    candidate layouts and return ``(Q,)`` arrays; otherwise they receive a
    single ``(N,)`` position vector.
    """
    if not layout.is_feasible(delta_min):
        raise ValueError("initial layout infeasible: " + "; ".join(layout.violations(delta_min)))

    def evaluate(X):
        if vectorized:
            vals = np.asarray(objective(X), dtype=float)
            ok = np.ones(len(X), bool) if feasible is None else np.asarray(feasible(X), bool)
        else:
            vals = np.array([objective(row) for row in X], dtype=float)
            ok = np.array([True if feasible is None else bool(feasible(row)) for row in X])
        return vals, ok

    x = np.array(layout.pa_x, dtype=float)
    vals, ok = evaluate(x[None, :])
    if not (ok[0] and np.isfinite(vals[0])):
        raise ValueError("initial layout infeasible for the objective")
    f = float(vals[0])
    history = [f]
    N, L = layout.n_segments, layout.segment_len
    Q = sc.grid_count(L)
    it = 0
    for it in range(1, sc.max_iters + 1):
        f_start = f
        for n in range(N):
            lo, hi = layout.segment_bounds(n)
            grid = np.minimum(lo + sc.grid_step * np.arange(Q + 1), hi)
            others = np.delete(x, n)
            spaced = np.all(np.abs(grid[:, None] - others[None, :]) >= delta_min - 1e-12, axis=1)
            grid = grid[spaced]
            if grid.size == 0:
                continue
            X = np.repeat(x[None, :], grid.size, axis=0)
            X[:, n] = grid
            vals, ok = evaluate(X)
            finite = np.isfinite(vals)
            if not finite.all():
                log.debug("skipping %d non-finite grid points on segment %d",
                          int((~finite).sum()), n)
            ok &= finite
            if not ok.any():
                continue
            cand = np.where(ok, vals, -np.inf)
            k = int(np.argmax(cand))  # first maximiser = lowest x
            if cand[k] > f:
                x[n] = grid[k]
                f = float(cand[k])
                history.append(f)
        if f - f_start <= sc.rel_tol * max(abs(f_start), 1e-300):
            break
    return SearchResult(layout.with_pa(x), f, history, it)
