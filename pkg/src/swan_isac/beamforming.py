"""Closed-form transmit beamformers and receive combiners for the
multiplexing protocol.

Channels are the cascaded vectors produced by :mod:`swan_isac.core_model`
and are applied with a plain product ``h @ w``; every weight built here is
matched to ``conj(h)`` accordingly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

log = logging.getLogger(__name__)

__all__ = [
    "InfeasibleSensingError",
    "SubspaceBeamformer",
    "mrc_combiner",
    "mrt_beamformer",
    "subspace_beamformer",
    "subspace_comm_gain",
    "epsilon_beamformer",
    "epsilon_basis",
]

_PARALLEL_TOL = 1e-9


class InfeasibleSensingError(ValueError):
    """The sensing threshold cannot be met with the available power."""


def _normalized(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v)
    if n == 0:
        raise ValueError("zero channel")
    return v / n


def mrc_combiner(f_s) -> np.ndarray:
    """Unit-norm maximum-ratio combiner; ``|w @ f_s|**2 == ||f_s||**2``."""
    return _normalized(np.conj(np.asarray(f_s, dtype=complex)))


def mrt_beamformer(h, P: float = 1.0) -> np.ndarray:
    """Maximum-ratio transmission with total power ``P``."""
    return np.sqrt(P) * _normalized(np.conj(np.asarray(h, dtype=complex)))


@dataclass(frozen=True)
class SubspaceBeamformer:
    w: np.ndarray
    branch: str  # "mrt" or "constrained"
    gamma_p: float
    c1: complex
    c2: complex


def subspace_beamformer(h_c, h_s, f_s, P: float, Gamma_sen: float,
                        alpha: float, sigma_s_sq: float) -> SubspaceBeamformer:
    """Rate-optimal transmit beamformer under an echo-SNR floor.

    Maximises ``|h_c @ w|**2`` subject to ``||w||**2 = P`` and
    ``alpha ||f_s||**2 |h_s @ w|**2 / sigma_s_sq >= Gamma_sen`` (MRC at the
    receiver).  Uses MRT when it already meets the floor, otherwise puts
    exactly the required power on the sensing direction and the rest on the
    part of the communication channel orthogonal to it.
    """
    a_c = np.conj(np.asarray(h_c, dtype=complex))
    a_s = np.conj(np.asarray(h_s, dtype=complex))
    fs2 = float(np.vdot(f_s, f_s).real)
    hs2 = float(np.vdot(a_s, a_s).real)
    hc2 = float(np.vdot(a_c, a_c).real)
    if hc2 == 0 or hs2 == 0 or fs2 == 0:
        raise ValueError("zero channel")
    cross = np.vdot(a_s, a_c)  # h_s^H h_c in the matched frame
    if Gamma_sen <= 0:
        gamma_p = 0.0
    elif abs(cross) == 0:
        gamma_p = np.inf
    else:
        gamma_p = Gamma_sen * hc2 * sigma_s_sq / (alpha * fs2 * abs(cross) ** 2)

    if P > gamma_p:
        return SubspaceBeamformer(np.sqrt(P) * a_c / np.sqrt(hc2), "mrt", gamma_p, 0j, 0j)

    need = Gamma_sen * sigma_s_sq / (alpha * fs2 * hs2)  # |c1|**2
    if need > P * (1 + 1e-12):
        raise InfeasibleSensingError("infeasible sensing constraint")
    need = min(need, P)
    hs_hat = a_s / np.sqrt(hs2)
    p = np.vdot(hs_hat, a_c)
    resid = a_c - p * hs_hat
    resid_norm = np.linalg.norm(resid)
    if abs(p) / np.sqrt(hc2) > 1 - _PARALLEL_TOL or resid_norm == 0:
        # Aligned channels: every direction in the span is the same one.
        log.debug("near-parallel channels; falling back to MRT")
        return SubspaceBeamformer(np.sqrt(P) * a_c / np.sqrt(hc2), "mrt", gamma_p, 0j, 0j)
    hcs_hat = resid / resid_norm
    q = np.vdot(hcs_hat, a_c)
    c1 = np.sqrt(need) * (p / abs(p) if abs(p) > 0 else 1.0)
    c2 = np.sqrt(P - need) * q / abs(q)
    return SubspaceBeamformer(c1 * hs_hat + c2 * hcs_hat, "constrained", gamma_p,
                              complex(c1), complex(c2))


def subspace_comm_gain(h_c: np.ndarray, h_s: np.ndarray, fs2, P: float,
                       Gamma_sen: float, alpha: float, sigma_s_sq: float):
    """Vectorised ``|h_c @ w*|**2`` of :func:`subspace_beamformer` over the
    leading axes of ``h_c``/``h_s``.

    Returns ``(gain, feasible)``; ``gain`` is ``nan`` where the sensing
    floor is unreachable.
    """
    hc2 = np.sum(np.abs(h_c) ** 2, axis=-1)
    hs2 = np.sum(np.abs(h_s) ** 2, axis=-1)
    p2 = np.abs(np.sum(h_s * np.conj(h_c), axis=-1)) ** 2 / hs2
    q2 = np.maximum(hc2 - p2, 0.0)
    fs2 = np.asarray(fs2, dtype=float)
    need = Gamma_sen * sigma_s_sq / (alpha * fs2 * hs2)
    mrt_ok = P * p2 / hc2 >= need
    feasible = need <= P * (1 + 1e-12)
    c1 = np.sqrt(np.minimum(need, P))
    c2 = np.sqrt(np.maximum(P - need, 0.0))
    constrained = (c1 * np.sqrt(p2) + c2 * np.sqrt(q2)) ** 2
    gain = np.where(mrt_ok, P * hc2, constrained)
    return np.where(feasible, gain, np.nan), feasible


def epsilon_basis(h_c, h_s):
    """Orthonormal pair ``(u_c, u_perp)``: the MRT direction for ``h_c`` and
    the sensing direction with its ``u_c`` component removed.

    ``u_perp`` is phase-rotated so that ``h_s @ u_perp`` has the phase of
    ``h_s @ u_c``; the two parts of an epsilon beamformer then add
    coherently at the target.  ``u_perp`` is zero when the channels are
    parallel.  Works on the last axis, so stacks of channels are accepted.
    """
    a_c = np.conj(np.asarray(h_c, dtype=complex))
    a_s = np.conj(np.asarray(h_s, dtype=complex))
    u_c = a_c / np.linalg.norm(a_c, axis=-1, keepdims=True)
    proj = np.sum(np.conj(u_c) * a_s, axis=-1, keepdims=True)
    resid = a_s - proj * u_c
    rn = np.linalg.norm(resid, axis=-1, keepdims=True)
    an = np.linalg.norm(a_s, axis=-1, keepdims=True)
    parallel = rn <= 1e-12 * an
    u_perp = np.where(parallel, 0.0, resid / np.where(parallel, 1.0, rn))
    s_c = np.sum(np.conj(a_s) * u_c, axis=-1, keepdims=True)  # h_s @ u_c
    mag = np.abs(s_c)
    rot = np.where(mag > 0, s_c / np.where(mag > 0, mag, 1.0), 1.0)
    return u_c, u_perp * rot


def epsilon_beamformer(h_c, h_s, P_k: float, eps: float) -> np.ndarray:
    """``sqrt((1-eps) P_k) u_c + sqrt(eps P_k) u_perp`` with ``u_c``,
    ``u_perp`` from :func:`epsilon_basis`."""
    if not 0.0 <= eps <= 1.0:
        raise ValueError("eps must lie in [0, 1]")
    u_c, u_perp = epsilon_basis(h_c, h_s)
    if eps > 0 and not np.any(u_perp):
        log.info("parallel channels: sensing direction collapses onto MRT")
    return np.sqrt((1 - eps) * P_k) * u_c + np.sqrt(eps * P_k) * u_perp
