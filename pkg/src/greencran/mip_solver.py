"""Exact z-update: on/off pattern selection plus per-RRH power splits.

For a frozen y-block the augmented-Lagrangian terms that involve z separate
per RRH once the pattern b is fixed; the cross-RRH coupling enters only
through the cloud-power row, which depends on b through sum(b) alone. Each
active RRH therefore solves an independent K-variable strictly convex QP
(nonnegativity plus one power-cap coupling row), solved exactly by sorting
the per-link targets and sweeping the active set; the pattern search scores
every b in {0,1}^N \\ {0} with those per-RRH optima. Ties prefer fewer
active RRHs, then the lowest pattern index (bit n of the index is RRH n).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ScenarioConfig

SUPPORT_EPS = 1e-9


@dataclass
class TopologyPattern:
    """One z-block: pattern b, schedule a, per-link powers x (all flat,
    RRH-major)."""

    b: np.ndarray
    a: np.ndarray
    x: np.ndarray


def per_rrh_qp(c_p, c_t, g_p, g_t, amp, pmax, rho):
    """Minimize the RRH-local augmented terms over x >= 0 with
    amp * sum(x) <= pmax. Returns (x, objective value).

    Terms: g_p*(c_p - amp*S) + rho/2*(c_p - amp*S)^2
         + sum_k [g_t_k*(c_t_k - x_k) + rho/2*(c_t_k - x_k)^2],  S = sum(x).
    """
    c_t = np.asarray(c_t, float)
    g_t = np.asarray(g_t, float)
    kk = c_t.size
    e = c_t + g_t / rho
    alpha = amp * amp
    d = e + amp * c_p + amp * g_p / rho     # x_k = max(0, d_k - alpha*S) at optimum

    order = np.argsort(-d)
    ds = d[order]
    csum = np.concatenate([[0.0], np.cumsum(ds)])
    s_star = 0.0
    for m in range(kk + 1):
        s_c = csum[m] / (1.0 + m * alpha)
        upper = ds[m - 1] - alpha * s_c if m >= 1 else np.inf
        lower = ds[m] - alpha * s_c if m < kk else -np.inf
        if upper > -1e-15 and lower <= 1e-15 and s_c >= -1e-15:
            s_star = max(s_c, 0.0)
            break

    cap = pmax / amp
    if s_star > cap:
        # waterfill to the fixed sum cap
        es = e[order]
        ecsum = np.concatenate([[0.0], np.cumsum(es)])
        x_sorted = None
        for m in range(1, kk + 1):
            theta = (ecsum[m] - cap) / m
            vals = np.maximum(es - theta, 0.0)
            active = vals > 0
            if active.sum() == m or (m == kk and abs(vals.sum() - cap) < 1e-9 * max(1.0, cap)):
                x_sorted = vals
                break
        if x_sorted is None:
            theta = (ecsum[kk] - cap) / kk
            x_sorted = np.maximum(es - theta, 0.0)
        x = np.empty(kk)
        x[order] = x_sorted
    else:
        x = np.maximum(d - alpha * s_star, 0.0)

    s = x.sum()
    val = g_p * (c_p - amp * s) + 0.5 * rho * (c_p - amp * s) ** 2
    val += np.sum(g_t * (c_t - x) + 0.5 * rho * (c_t - x) ** 2)
    return x, float(val)


def _site_terms(ay, gamma, rho, cfg):
    """Per-RRH on/off objective pieces and the shared cloud-row term."""
    n, k = cfg.n_rrh, cfg.n_users
    c_p = ay[:n]
    c_t = ay[n:n + n * k].reshape(n, k)
    c_e = ay[-1]
    g_p = gamma[:n]
    g_t = gamma[n:n + n * k].reshape(n, k)
    g_e = gamma[-1]

    x_on = np.zeros((n, k))
    j_on = np.zeros(n)
    j_off = np.zeros(n)
    for i in range(n):
        x_on[i], j_on[i] = per_rrh_qp(c_p[i], c_t[i], g_p[i], g_t[i],
                                      cfg.amp_inefficiency[i], cfg.max_tx_power[i], rho)
        j_off[i] = g_p[i] * c_p[i] + 0.5 * rho * c_p[i] ** 2 \
            + np.sum(g_t[i] * c_t[i] + 0.5 * rho * c_t[i] ** 2)

    counts = np.arange(n + 1, dtype=float)
    resid = c_e - cfg.backhaul_power * counts
    t_cloud = g_e * resid + 0.5 * rho * resid ** 2
    return x_on, j_on, j_off, t_cloud


def _assemble(mask_bits, x_on, cfg):
    n, k = cfg.n_rrh, cfg.n_users
    b = mask_bits.astype(float)
    x = np.zeros(n * k)
    for i in range(n):
        if mask_bits[i]:
            x[i * k:(i + 1) * k] = x_on[i]
    a = ((x > SUPPORT_EPS) & np.repeat(mask_bits, k)).astype(float)
    return TopologyPattern(b=b, a=a, x=x)


def solve_z(y, dual, mats, cfg: ScenarioConfig, method="enumerate", n_enum=12):
    """Global minimizer of the augmented terms over the combinatorial set.

    y supplies the frozen y-block (object with ym_vector() or a packed
    vector); dual carries (gamma, rho). method="greedy" switches to the
    all-on descent heuristic for large N.
    """
    ym = y.ym_vector() if hasattr(y, "ym_vector") else np.asarray(y, float)
    ay = mats.A @ ym
    gamma = dual.gamma
    rho = float(dual.rho)
    n = cfg.n_rrh

    x_on, j_on, j_off, t_cloud = _site_terms(ay, gamma, rho, cfg)
    delta = j_on - j_off
    base = float(j_off.sum())

    if method == "greedy":
        on = np.ones(n, dtype=bool)

        def score(mask):
            return t_cloud[int(mask.sum())] + base + float(delta[mask].sum())

        cur = score(on)
        improved = True
        while improved and on.sum() > 1:
            improved = False
            best_i, best_v = -1, cur
            for i in range(n):
                if not on[i]:
                    continue
                trial = on.copy()
                trial[i] = False
                v = score(trial)
                if v < best_v - 1e-15:
                    best_i, best_v = i, v
            if best_i >= 0:
                on[best_i] = False
                cur = best_v
                improved = True
        return _assemble(on, x_on, cfg)

    if method != "enumerate":
        raise ValueError(f"unknown topology method {method!r}")
    if n > n_enum:
        raise ValueError(
            f"refusing to enumerate 2^{n}-1 patterns (n_enum={n_enum}); "
            "use the greedy topology method for networks this large")

    masks = np.arange(1, 2 ** n, dtype=np.int64)
    bits = ((masks[:, None] >> np.arange(n)) & 1).astype(float)
    pops = bits.sum(axis=1).astype(int)
    objs = t_cloud[pops] + base + bits @ delta

    best = float(np.min(objs))
    tol = 1e-12 * (1.0 + abs(best))
    tied = np.nonzero(objs <= best + tol)[0]
    # fewer active RRHs first, then lowest pattern index
    pick = tied[np.lexsort((masks[tied], pops[tied]))[0]]
    mask_bits = bits[pick].astype(bool)
    return _assemble(mask_bits, x_on, cfg)
