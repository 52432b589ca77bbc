"""Geometry, channel coefficients and SNR/rate evaluation for segmented
pinching-antenna waveguides.

Conventions
-----------
* The x-axis runs along the waveguides; segment ``i`` (0-based) covers
  ``[i*L, (i+1)*L]`` and is fed from its left end.
* All weights are applied to channel vectors with a plain (non-conjugated)
  product, ``h.T @ w``.  Maximum-ratio weights are therefore proportional to
  ``conj(h)``.
* Powers are in watts everywhere in the library.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

SPEED_OF_LIGHT = 3e8

__all__ = [
    "SPEED_OF_LIGHT",
    "Protocol",
    "ScenarioConfig",
    "Position3D",
    "SwanLayout",
    "ProtocolSolution",
    "SnrReport",
    "DegenerateGeometryError",
    "InvalidSolutionError",
    "in_waveguide_coeff",
    "free_space_coeff",
    "cascaded_channels",
    "cascade_batch",
    "snr_and_rate",
    "dbm_to_watt",
    "watt_to_dbm",
]


class DegenerateGeometryError(ValueError):
    """Raised when a PA coincides with the point it radiates to."""


class InvalidSolutionError(ValueError):
    """Raised when weights do not satisfy the constraints of a protocol."""


class Protocol(str, enum.Enum):
    SS = "SS"
    SA = "SA"
    SM = "SM"


def dbm_to_watt(p_dbm):
    return 10.0 ** ((np.asarray(p_dbm, dtype=float) - 30.0) / 10.0)


def watt_to_dbm(p_w):
    return 10.0 * np.log10(np.asarray(p_w, dtype=float)) + 30.0


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants, geometry and power budgets of one scenario.

    Derived quantities (wavelengths, wavenumbers, ``eta`` and the amplitude
    attenuation constant ``beta``) are properties so they can never go out
    of sync with the fields.
    """

    carrier_freq_hz: float = 28e9
    n_eff: float = 1.4
    kappa_db_per_m: float = 0.08
    d: float = 3.0
    y_t: float = 5.0
    y_r: float = -5.0
    D_x: float = 20.0
    D_y: float = 20.0
    P_max: float = 0.1
    sigma_c_sq: float = 1e-12
    sigma_s_sq: float = 1e-12
    alpha: float = 1.0
    delta_min: Optional[float] = None  # None -> half a free-space wavelength

    def __post_init__(self):
        positive = ("carrier_freq_hz", "n_eff", "d", "D_x", "D_y", "P_max",
                    "sigma_c_sq", "sigma_s_sq", "alpha")
        for name in positive:
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa_db_per_m < 0:
            raise ValueError("kappa_db_per_m must be nonnegative")
        if self.delta_min is None:
            object.__setattr__(self, "delta_min", self.lambda_c / 2)
        elif not self.delta_min > 0:
            raise ValueError("delta_min must be positive")

    @property
    def lambda_c(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def lambda_g(self) -> float:
        return self.lambda_c / self.n_eff

    @property
    def k_c(self) -> float:
        return 2 * np.pi / self.lambda_c

    @property
    def k_g(self) -> float:
        return 2 * np.pi / self.lambda_g

    @property
    def eta(self) -> float:
        return self.lambda_c / (4 * np.pi)

    @property
    def beta(self) -> float:
        return self.kappa_db_per_m * np.log(10) / 20

    def with_(self, **changes) -> "ScenarioConfig":
        return replace(self, **changes)

    def delta_tx(self, point: "Position3D") -> float:
        """Perpendicular distance from ``point`` to the Tx waveguide line."""
        return float(np.hypot(self.y_t - point.y, self.d - point.z))

    def delta_rx(self, point: "Position3D") -> float:
        return float(np.hypot(self.y_r - point.y, self.d - point.z))


@dataclass(frozen=True)
class Position3D:
    x: float
    y: float
    z: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True, eq=False)
class SwanLayout:
    """One segmented waveguide: ``n_segments`` segments of length
    ``segment_len`` with one PA each."""

    n_segments: int
    segment_len: float
    pa_x: np.ndarray = field(repr=False)

    def __post_init__(self):
        pa = np.array(self.pa_x, dtype=float).reshape(-1)
        if self.n_segments < 1 or self.segment_len <= 0:
            raise ValueError("need at least one segment of positive length")
        if pa.size != self.n_segments:
            raise ValueError(
                f"expected {self.n_segments} PA positions, got {pa.size}")
        pa.setflags(write=False)
        object.__setattr__(self, "pa_x", pa)

    @classmethod
    def uniform(cls, n_segments: int, D_x: float, pa_x=None) -> "SwanLayout":
        """Layout covering ``[0, D_x]``; PAs default to segment centres."""
        L = D_x / n_segments
        if pa_x is None:
            pa_x = (np.arange(n_segments) + 0.5) * L
        return cls(n_segments, L, pa_x)

    @property
    def feed_x(self) -> np.ndarray:
        return np.arange(self.n_segments) * self.segment_len

    @property
    def length(self) -> float:
        return self.n_segments * self.segment_len

    def segment_bounds(self, i: int):
        return i * self.segment_len, (i + 1) * self.segment_len

    def segment_index(self, x):
        """0-based index of the segment containing ``x`` (ceiling rule,
        so a shared boundary belongs to the left segment).  Accepts arrays."""
        i = np.ceil(np.asarray(x, dtype=float) / self.segment_len - 1e-12).astype(int) - 1
        i = np.clip(i, 0, self.n_segments - 1)
        return int(i) if i.ndim == 0 else i

    def with_pa(self, pa_x) -> "SwanLayout":
        return SwanLayout(self.n_segments, self.segment_len, pa_x)

    def violations(self, delta_min: float, tol: float = 1e-12) -> list:
        """Human-readable list of feasibility violations (empty if feasible)."""
        out = []
        lo = self.feed_x
        hi = lo + self.segment_len
        bad = np.flatnonzero((self.pa_x < lo - tol) | (self.pa_x > hi + tol))
        out += [f"PA {i} outside its segment" for i in bad]
        gaps = np.abs(self.pa_x[:, None] - self.pa_x[None, :])
        np.fill_diagonal(gaps, np.inf)
        i, j = np.nonzero(np.triu(gaps < delta_min - tol))
        out += [f"PAs {a} and {b} closer than delta_min" for a, b in zip(i, j)]
        return out

    def is_feasible(self, delta_min: float) -> bool:
        return not self.violations(delta_min)


def in_waveguide_coeff(cfg: ScenarioConfig, feed_x, pa_x):
    """Guided propagation coefficient from a feed point to a PA."""
    delta = np.abs(np.asarray(feed_x, dtype=float) - np.asarray(pa_x, dtype=float))
    return 10.0 ** (-cfg.kappa_db_per_m * delta / 20.0) * np.exp(-1j * cfg.k_g * delta)


def free_space_coeff(cfg: ScenarioConfig, pa: Position3D, point: Position3D) -> complex:
    """Line-of-sight coefficient ``eta/r * exp(-j k_c r)`` between two points."""
    r = float(np.linalg.norm(pa.as_array() - point.as_array()))
    if r == 0.0:
        raise DegenerateGeometryError("degenerate geometry: PA coincides with point")
    return cfg.eta / r * np.exp(-1j * cfg.k_c * r)


def cascade_batch(cfg: ScenarioConfig, feed_x, pa_x, y_line: float,
                  point: Position3D) -> np.ndarray:
    """Cascaded (waveguide x free-space) coefficients for arrays of PA
    positions; broadcasts ``pa_x`` of any shape against ``feed_x``."""
    pa_x = np.asarray(pa_x, dtype=float)
    r = np.sqrt((pa_x - point.x) ** 2 + (y_line - point.y) ** 2 + (cfg.d - point.z) ** 2)
    if np.any(r == 0.0):
        raise DegenerateGeometryError("degenerate geometry: PA coincides with point")
    return cfg.eta / r * np.exp(-1j * cfg.k_c * r) * in_waveguide_coeff(cfg, feed_x, pa_x)


def cascaded_channels(cfg: ScenarioConfig, layout: SwanLayout, point: Position3D,
                      side: str = "tx") -> np.ndarray:
    """Per-segment cascaded channel between ``point`` and the Tx (``side='tx'``)
    or Rx waveguide."""
    y_line = {"tx": cfg.y_t, "rx": cfg.y_r}[side]
    return cascade_batch(cfg, layout.feed_x, layout.pa_x, y_line, point)


@dataclass(eq=False)
class ProtocolSolution:
    """Protocol tag, PA layouts and the weights used on each side.

    ``tx_weights``/``rx_weights`` are the selection vectors for SS and the
    unit-norm beamformer/combiner for SM; they are ignored for SA, where the
    all-ones aggregation is implied.  ``power`` is the transmit power of the
    slot in watts.
    """

    protocol: Protocol
    tx: SwanLayout
    rx: SwanLayout
    power: float
    tx_weights: Optional[np.ndarray] = None
    rx_weights: Optional[np.ndarray] = None

    def __post_init__(self):
        self.protocol = Protocol(self.protocol)


@dataclass(frozen=True)
class SnrReport:
    gamma_c: float
    gamma_s: float
    rate: float


def _one_hot(v, n) -> np.ndarray:
    if v is None:
        raise InvalidSolutionError("invalid solution for protocol SS: missing selection vector")
    v = np.asarray(v)
    if v.shape != (n,):
        raise InvalidSolutionError("invalid solution for protocol: dimension mismatch")
    if not (np.allclose(v.imag, 0) and np.all(np.isin(v.real, (0.0, 1.0)))
            and np.count_nonzero(v) == 1):
        raise InvalidSolutionError("invalid solution for protocol SS: not one-hot")
    return v.real.astype(float)


def _unit(v, n, what) -> np.ndarray:
    if v is None:
        raise InvalidSolutionError(f"invalid solution for protocol SM: missing {what}")
    v = np.asarray(v, dtype=complex)
    if v.shape != (n,):
        raise InvalidSolutionError("invalid solution for protocol: dimension mismatch")
    if not np.isclose(np.linalg.norm(v), 1.0, rtol=1e-9, atol=0):
        raise InvalidSolutionError(f"invalid solution for protocol SM: {what} not unit-norm")
    return v


def snr_and_rate(cfg: ScenarioConfig, sol: ProtocolSolution, cu: Position3D,
                 st: Position3D, K: int = 1) -> SnrReport:
    """Communication SNR, echo SNR and TDMA rate ``log2(1+gamma_c)/K``."""
    if K < 1:
        raise ValueError("K must be a positive integer")
    N, M = sol.tx.n_segments, sol.rx.n_segments
    h_c = cascaded_channels(cfg, sol.tx, cu, "tx")
    h_s = cascaded_channels(cfg, sol.tx, st, "tx")
    f_s = cascaded_channels(cfg, sol.rx, st, "rx")
    P = sol.power

    if sol.protocol is Protocol.SS:
        v_t = _one_hot(sol.tx_weights, N)
        v_r = _one_hot(sol.rx_weights, M)
        noise_s = cfg.sigma_s_sq
    elif sol.protocol is Protocol.SA:
        v_t = np.full(N, 1 / np.sqrt(N))
        v_r = np.ones(M)
        noise_s = M * cfg.sigma_s_sq
    else:
        v_t = _unit(sol.tx_weights, N, "beamformer")
        v_r = _unit(sol.rx_weights, M, "combiner")
        noise_s = cfg.sigma_s_sq

    gamma_c = P * abs(h_c @ v_t) ** 2 / cfg.sigma_c_sq
    gamma_s = cfg.alpha * P * abs((v_r @ f_s) * (h_s @ v_t)) ** 2 / noise_s
    return SnrReport(float(gamma_c), float(gamma_s), float(np.log2(1 + gamma_c) / K))
