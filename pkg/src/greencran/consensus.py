"""Two-block consensus splitting of the joint design problem.

The smooth block y_m = [p (N); P_e; mu' (K); t (N*K)] and the combinatorial
block z = [b (N); a (N*K); x (N*K)] are tied by A @ y_m + B @ z = 0 with one
row per site power definition (p_n = amp_n * sum_k x_nk), one row per link
power copy (t_nk = x_nk), and one row for the cloud power definition
(P_e = kc * sum mu' + Pc * sum b). The a-columns of B are identically zero:
scheduling enters only through the z-side constraint set.

All (n, k) blocks are laid out RRH-major: index n*K + k.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import energy
from .model import ScenarioConfig


def rrh_selector(n, n_rrh, n_users):
    """0/1 vector over the x-block picking every link of RRH n."""
    d = np.zeros(n_rrh * n_users)
    d[n * n_users:(n + 1) * n_users] = 1.0
    return d


def link_selector(n, k, n_rrh, n_users):
    """0/1 vector over the x-block picking the single link (n, k)."""
    d = np.zeros(n_rrh * n_users)
    d[n * n_users + k] = 1.0
    return d


@dataclass
class ConsensusMatrices:
    A: np.ndarray          # (rows, (N+1)(K+1))
    B: np.ndarray          # (rows, (2K+1)N)
    n_rrh: int
    n_users: int

    @property
    def rows(self):
        return self.A.shape[0]


def build_matrices(cfg: ScenarioConfig) -> ConsensusMatrices:
    n, k = cfg.n_rrh, cfg.n_users
    rows = n * (k + 1) + 1
    dim_y = (n + 1) * (k + 1)
    dim_z = (2 * k + 1) * n
    A = np.zeros((rows, dim_y))
    B = np.zeros((rows, dim_z))

    i_pe = n                       # y_m column of P_e
    mu_cols = slice(n + 1, n + 1 + k)
    t0 = n + 1 + k                 # first t column
    xb0 = n + k * n                # first x column in z (after b and a blocks)

    for i in range(n):             # site power rows
        A[i, i] = 1.0
        B[i, xb0 + i * k: xb0 + (i + 1) * k] = -cfg.amp_inefficiency[i]
    for i in range(n):             # link power copy rows
        for j in range(k):
            r = n + i * k + j
            A[r, t0 + i * k + j] = 1.0
            B[r, xb0 + i * k + j] = -1.0
    r = rows - 1                   # cloud power row
    A[r, i_pe] = 1.0
    A[r, mu_cols] = -cfg.compute_coeff
    B[r, :n] = -cfg.backhaul_power
    return ConsensusMatrices(A=A, B=B, n_rrh=n, n_users=k)


def pack_ym(p, pe, mu_cubed, t):
    return np.concatenate([np.asarray(p, float).ravel(), [float(pe)],
                           np.asarray(mu_cubed, float).ravel(),
                           np.asarray(t, float).ravel()])


def pack_z(b, a, x):
    return np.concatenate([np.asarray(b, float).ravel(),
                           np.asarray(a, float).ravel(),
                           np.asarray(x, float).ravel()])


@dataclass
class PrimalState:
    """Both blocks of the split plus the non-consensus variables (r, w)."""

    p: np.ndarray          # (N,) site powers, watts
    pe: float              # cloud power, watts
    mu_cubed: np.ndarray   # (K,) cubed service rates, (bits/s)^3
    t: np.ndarray          # (N*K,) link power budgets, watts
    r: np.ndarray          # (K,) service rates, bits/s
    w: np.ndarray          # (K, N*L) complex beamformers
    b: np.ndarray          # (N,) 0/1
    a: np.ndarray          # (N*K,) 0/1
    x: np.ndarray          # (N*K,) watts

    def ym_vector(self):
        return pack_ym(self.p, self.pe, self.mu_cubed, self.t)

    def z_vector(self):
        return pack_z(self.b, self.a, self.x)

    def copy(self):
        return PrimalState(p=self.p.copy(), pe=float(self.pe),
                           mu_cubed=self.mu_cubed.copy(), t=self.t.copy(),
                           r=self.r.copy(), w=self.w.copy(), b=self.b.copy(),
                           a=self.a.copy(), x=self.x.copy())


@dataclass
class DualState:
    gamma: np.ndarray      # (rows,) multipliers of A y_m + B z = 0
    rho: float

    def copy(self):
        return DualState(gamma=self.gamma.copy(), rho=float(self.rho))


def z_block_feasible(b, a, x, cfg: ScenarioConfig, tol=1e-9):
    """Membership test for the combinatorial constraint set."""
    b = np.asarray(b, float)
    a = np.asarray(a, float)
    x = np.asarray(x, float)
    n, k = cfg.n_rrh, cfg.n_users
    if np.any(np.abs(b * (1 - b)) > tol) or np.any(np.abs(a * (1 - a)) > tol):
        return False
    if b.round().sum() < 1:
        return False
    ar = a.reshape(n, k)
    if np.any(ar.max(axis=1) > b.round() + tol):
        return False
    if np.any(x < -tol):
        return False
    xr = x.reshape(n, k)
    if np.any(cfg.amp_inefficiency * xr.sum(axis=1) > b.round() * cfg.max_tx_power + tol):
        return False
    if np.any(xr > ar.round() * cfg.max_tx_power[:, None] + tol):
        return False
    return True


def site_objective(state_or_p, pe, cfg: ScenarioConfig):
    """Convexified trading cost of the y-block: sites plus cloud."""
    prices = energy.TradePrices.from_prices(cfg.price_buy, cfg.price_sell)
    p = np.asarray(state_or_p, float)
    total = float(np.sum(energy.trade_cost_convex(p, cfg.harvested_rrh, prices)))
    total += energy.trade_cost_convex(pe, cfg.harvested_cloud, prices)
    return total


def augmented_lagrangian(state: PrimalState, z, dual: DualState,
                         mats: ConsensusMatrices, cfg: ScenarioConfig):
    """f(y) + gamma^T (A y_m + B z) + rho/2 ||A y_m + B z||^2.

    z is anything with b/a/x attributes; infeasible z maps to +inf.
    """
    if not z_block_feasible(z.b, z.a, z.x, cfg):
        return float("inf")
    res = mats.A @ state.ym_vector() + mats.B @ pack_z(z.b, z.a, z.x)
    val = site_objective(state.p, state.pe, cfg)
    return float(val + dual.gamma @ res + 0.5 * dual.rho * res @ res)


def residuals(state: PrimalState, z_vec, z_prev_vec, mats: ConsensusMatrices, rho):
    """Primal residual A y_m + B z and dual residual rho A^T B (z - z_prev)."""
    r_p = mats.A @ state.ym_vector() + mats.B @ np.asarray(z_vec, float)
    r_d = rho * (mats.A.T @ (mats.B @ (np.asarray(z_vec, float) - np.asarray(z_prev_vec, float))))
    return r_p, r_d


@dataclass
class AdmmOptions:
    rho: float = 1.0
    eps_abs: float = 1e-4
    eps_rel: float = 1e-3
    max_iter: int = 500
    adapt_rho: bool = True
    rho_min: float = 1e-3
    rho_max: float = 1e6
    topology: str = "enumerate"    # or "greedy"
    n_enum: int = 12
    y_tol: float = 1e-6
    y_tol_coarse: float = 1e-3


@dataclass
class ConvergenceTrace:
    """Flat per-iteration record of one ADMM run."""

    objective: list = field(default_factory=list)
    primal_norm: list = field(default_factory=list)
    dual_norm: list = field(default_factory=list)
    rho: list = field(default_factory=list)
    converged: bool = False
    iterations: int = 0
    best_iteration: int = -1
    approximate_topology: bool = False
    label: str = ""

    def append(self, obj, r_p, r_d, rho):
        self.objective.append(float(obj))
        self.primal_norm.append(float(r_p))
        self.dual_norm.append(float(r_d))
        self.rho.append(float(rho))
        self.iterations = len(self.objective)

    def to_delimited(self, delimiter=","):
        lines = [delimiter.join(["iteration", "objective", "primal_residual", "dual_residual"])]
        for i in range(self.iterations):
            lines.append(delimiter.join([str(i), repr(self.objective[i]),
                                         repr(self.primal_norm[i]), repr(self.dual_norm[i])]))
        return "\n".join(lines) + "\n"

    def save(self, path):
        with open(path, "w") as fh:
            fh.write(self.to_delimited())


def admm_solve(coeffs, cfg: ScenarioConfig, channel, init: PrimalState,
               opts: AdmmOptions = None, dual_init: DualState = None):
    """Alternate the convex y-update, the mixed-integer z-update, and the
    dual ascent until the scaled residual test passes.

    Returns (PrimalState, DualState, ConvergenceTrace). On non-convergence
    the iterate with the smallest primal residual seen is returned and the
    trace is flagged; no exception is raised for that case.
    """
    from . import convex_solver, mip_solver   # deferred: these import our types

    opts = opts or AdmmOptions()
    if opts.rho <= 0:
        raise ValueError("rho must be > 0")
    if not z_block_feasible(init.b, init.a, init.x, cfg):
        raise ValueError("initial z-block violates the combinatorial constraints")

    mats = build_matrices(cfg)
    A, B = mats.A, mats.B
    AtB = A.T @ B
    core = convex_solver.SubproblemCore.build(coeffs, cfg, mats)

    state = init.copy()
    z = mip_solver.TopologyPattern(b=init.b.copy(), a=init.a.copy(), x=init.x.copy())
    if dual_init is not None:
        gamma = dual_init.gamma.copy()
        rho = float(dual_init.rho)
    else:
        gamma = np.zeros(mats.rows)
        rho = float(opts.rho)

    trace = ConvergenceTrace(approximate_topology=(opts.topology == "greedy"))
    best = None
    converged = False

    for it in range(opts.max_iter):
        z_vec_prev = pack_z(z.b, z.a, z.x)
        sub = convex_solver.ConvexSubproblem(core=core, bz=B @ z_vec_prev,
                                             gamma=gamma, rho=rho)
        y_tol = opts.y_tol if best is not None and best[0] < 1e-2 else opts.y_tol_coarse
        yb = convex_solver.solve_y(sub, warm_start=state, tol=max(opts.y_tol, y_tol))
        state = replace(state, p=yb.p, pe=yb.pe, mu_cubed=yb.mu_cubed,
                        t=yb.t, r=yb.r, w=yb.w)

        dual = DualState(gamma=gamma, rho=rho)
        z = mip_solver.solve_z(state, dual, mats, cfg,
                               method=opts.topology, n_enum=opts.n_enum)
        z_vec = pack_z(z.b, z.a, z.x)

        ym = state.ym_vector()
        r_p = A @ ym + B @ z_vec
        gamma = gamma + rho * r_p
        r_d = rho * (AtB @ (z_vec - z_vec_prev))
        n_p = float(np.linalg.norm(r_p))
        n_d = float(np.linalg.norm(r_d))

        obj = site_objective(state.p, state.pe, cfg)
        trace.append(obj, n_p, n_d, rho)

        if best is None or n_p < best[0]:
            state_snap = state.copy()
            state_snap = replace(state_snap, b=z.b.copy(), a=z.a.copy(), x=z.x.copy())
            best = (n_p, state_snap, DualState(gamma=gamma.copy(), rho=rho), it)

        eps_pri = np.sqrt(mats.rows) * opts.eps_abs + opts.eps_rel * max(
            np.linalg.norm(A @ ym), np.linalg.norm(B @ z_vec))
        eps_dual = np.sqrt(A.shape[1]) * opts.eps_abs + opts.eps_rel * np.linalg.norm(A.T @ gamma)
        if n_p <= eps_pri and n_d <= eps_dual:
            converged = True
            state = replace(state, b=z.b.copy(), a=z.a.copy(), x=z.x.copy())
            best = (n_p, state.copy(), DualState(gamma=gamma.copy(), rho=rho), it)
            break

        if opts.adapt_rho:
            if n_p > 10.0 * n_d and rho * 2.0 <= opts.rho_max:
                rho *= 2.0
            elif n_d > 10.0 * n_p and rho * 0.5 >= opts.rho_min:
                rho *= 0.5

    trace.converged = converged
    trace.best_iteration = best[3]
    return best[1], best[2], trace
