"""MMSE receivers, MSE weights, and the concave quadratic rate surrogate.

For fixed receivers u and weights v, the per-user utility

    1 + log(v_k) - v_k * e_k(w, u_k)

is a global lower bound on log(1 + SINR_k(w)) that is tight at the
expansion beamformer (where u, v are the optimal MMSE receiver and inverse
MSE). Expanding the MSE gives the quadratic-in-w form

    c1_k + Re{c2_k w_k} - c4_k * sum_j |h_k^H w_j|^2

with c4_k >= 0, so the bound is concave. All of this is in natural log;
rates convert to bits/s with bandwidth/log(2) at the interface.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .qos import _channel_matrix, _noise_of, sinr

LN2 = float(np.log(2.0))


def _noise_vector(noise_power, n_users):
    arr = np.asarray(noise_power, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n_users, float(arr))
    if arr.shape != (n_users,):
        raise ValueError("noise power must be scalar or one value per user")
    if np.any(arr <= 0):
        raise ValueError("noise power must be > 0")
    return arr


def mse(k, w, u_k, channel, noise_power):
    """Mean square error of user k's scalar receive filter u_k."""
    h = _channel_matrix(channel)
    w = np.asarray(w, dtype=complex)
    if w.shape != h.shape:
        raise ValueError(f"beamformer stack shape {w.shape} does not match channel {h.shape}")
    u_k = complex(u_k)
    rx = h[k].conj() @ w.T                      # h_k^H w_j for all j
    total = np.sum(np.abs(rx) ** 2) + _noise_of(noise_power, k)
    return float(1.0 - 2.0 * np.real(np.conj(u_k) * rx[k]) + np.abs(u_k) ** 2 * total)


def update_receivers(w, channel, noise_power):
    """Optimal MMSE receive scalars for every user at fixed w."""
    h = _channel_matrix(channel)
    w = np.asarray(w, dtype=complex)
    if w.shape != h.shape:
        raise ValueError(f"beamformer stack shape {w.shape} does not match channel {h.shape}")
    k_users = h.shape[0]
    sig = _noise_vector(noise_power, k_users)
    rx = h.conj() @ w.T                          # rx[k, j] = h_k^H w_j
    total = np.sum(np.abs(rx) ** 2, axis=1) + sig
    return np.diag(rx) / total


def update_weights(w, u, channel, noise_power):
    """Inverse-MSE weights at fixed (w, u); clipped to the [1, inf) branch
    reached with MMSE receivers (degenerate users get v = 1, zero rate)."""
    h = _channel_matrix(channel)
    w = np.asarray(w, dtype=complex)
    u = np.asarray(u, dtype=complex)
    k_users = h.shape[0]
    e = np.array([mse(k, w, u[k], h, noise_power) for k in range(k_users)])
    e = np.clip(e, 1e-300, None)
    return 1.0 / e


@dataclass(frozen=True)
class SurrogateCoeffs:
    """Expansion of the rate lower bound at one beamformer stack.

    Immutable snapshot: u, v are the receivers/weights at the expansion
    point, c1/c2/c4 the induced quadratic coefficients, and h/sigma2 the
    channel data the expansion was built from (kept so the quadratic term
    and consistency checks can be evaluated without outside state).
    """

    u: np.ndarray       # (K,) complex
    v: np.ndarray       # (K,) real >= 1
    c1: np.ndarray      # (K,) real
    c2: np.ndarray      # (K, N*L) complex, row k multiplies w_k
    c4: np.ndarray      # (K,) real >= 0
    h: np.ndarray       # (K, N*L) complex
    sigma2: np.ndarray  # (K,) real

    @property
    def n_users(self):
        return self.u.shape[0]


def build_coeffs(w, channel, noise_power) -> SurrogateCoeffs:
    """Expansion coefficients of the rate bound at the stack w."""
    h = _channel_matrix(channel)
    w = np.asarray(w, dtype=complex)
    k_users = h.shape[0]
    sig = _noise_vector(noise_power, k_users)
    u = update_receivers(w, h, sig)
    v = update_weights(w, u, h, sig)
    c1 = 1.0 + np.log(v) - v * (1.0 + sig * np.abs(u) ** 2)
    c2 = 2.0 * (v * np.conj(u))[:, None] * h.conj()
    c4 = v * np.abs(u) ** 2
    return SurrogateCoeffs(u=u, v=v, c1=c1, c2=c2, c4=c4, h=h.copy(), sigma2=sig)


def surrogate_value(k, w, coeffs: SurrogateCoeffs):
    """Rate lower bound for user k in nats (per channel use)."""
    w = np.asarray(w, dtype=complex)
    gains = np.abs(coeffs.h[k].conj() @ w.T) ** 2
    return float(coeffs.c1[k] + np.real(coeffs.c2[k] @ w[k]) - coeffs.c4[k] * gains.sum())


def surrogate_rate(k, w, coeffs: SurrogateCoeffs, bandwidth_hz):
    """Rate lower bound for user k in bits/s."""
    return bandwidth_hz / LN2 * surrogate_value(k, w, coeffs)


def true_rate(k, w, coeffs_or_channel, noise_power, bandwidth_hz):
    """Exact achievable rate in bits/s (bound's reference)."""
    h = coeffs_or_channel.h if isinstance(coeffs_or_channel, SurrogateCoeffs) else coeffs_or_channel
    return bandwidth_hz * np.log2(1.0 + sinr(k, w, _channel_matrix(h), noise_power))
