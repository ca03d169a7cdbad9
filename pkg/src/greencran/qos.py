"""Per-user SINR and tandem-queue delay checks.

The end-to-end delay model is two M/M/1 stages in series: cloud processing
at service rate mu and radio delivery at the user's achievable rate r, both
fed by the same arrival stream lam (all in bits/s). Mean sojourn time is
1/(mu - lam) + 1/(r - lam), defined only on the stable region mu, r > lam.
"""

from __future__ import annotations

import numpy as np


class QueueInfeasibleError(ValueError):
    """A queue was asked to run at or below its arrival rate."""


def _channel_matrix(channel):
    return channel.h if hasattr(channel, "h") else np.asarray(channel, dtype=complex)


def _noise_of(noise_power, k):
    arr = np.asarray(noise_power, dtype=float)
    sig = arr.reshape(-1)[k] if arr.ndim else float(arr)
    if sig <= 0:
        raise ValueError("noise power must be > 0")
    return sig


def sinr(k, w, channel, noise_power):
    """SINR of user k under beamformer stack w (K x N*L complex)."""
    h = _channel_matrix(channel)
    w = np.asarray(w, dtype=complex)
    if w.shape != h.shape:
        raise ValueError(f"beamformer stack shape {w.shape} does not match channel {h.shape}")
    gains = np.abs(h[k].conj() @ w.T) ** 2         # |h_k^H w_j|^2 for all j
    signal = gains[k]
    interference = np.sum(gains) - signal
    return float(signal / (interference + _noise_of(noise_power, k)))


def user_rate(k, w, channel, noise_power, bandwidth_hz):
    """Achievable rate of user k in bits/s."""
    return bandwidth_hz * np.log2(1.0 + sinr(k, w, channel, noise_power))


def total_delay(mu, r, lam):
    """Mean two-stage sojourn time 1/(mu-lam) + 1/(r-lam), seconds."""
    mu = float(mu)
    r = float(r)
    lam = float(lam)
    if mu <= lam or r <= lam:
        raise QueueInfeasibleError(
            f"unstable queue: need mu > lam and r > lam, got mu={mu:g}, r={r:g}, lam={lam:g}")
    return 1.0 / (mu - lam) + 1.0 / (r - lam)


def delay_feasible(mu_cubed, r, lam, tau):
    """True when the (mu', r) pair meets the delay budget tau.

    mu_cubed is the cubed service rate as carried by the solver; the check
    uses mu = mu_cubed**(1/3). Unstable pairs are infeasible, not an error.
    """
    mu_cubed = float(mu_cubed)
    if mu_cubed < 0:
        return False
    mu = mu_cubed ** (1.0 / 3.0)
    try:
        return total_delay(mu, r, lam) <= float(tau)
    except QueueInfeasibleError:
        return False
