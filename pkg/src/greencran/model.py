"""Scenario data, channel generation, and scenario file round-tripping.

Everything is stored in SI units: watts, bits/s, seconds. Positions are in
km (the pathloss law wants km). dB quantities (pathloss, shadowing, antenna
gain) are converted to linear scale on the spot and never stored on state.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

# Urban macro log-distance law, distance in km.
PATHLOSS_FIXED_DB = 128.1
PATHLOSS_SLOPE_DB = 37.6
PATHLOSS_MODEL = "logdist-128.1+37.6log10d"


def db_to_linear(x_db):
    return 10.0 ** (np.asarray(x_db, dtype=float) / 10.0)


def pathloss_db(distance_km):
    """Pathloss in dB at a given distance in km (must be > 0)."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d <= 0.0):
        raise ValueError("pathloss undefined at non-positive distance (co-located nodes?)")
    return PATHLOSS_FIXED_DB + PATHLOSS_SLOPE_DB * np.log10(d)


def _as_float_array(x, shape, name):
    arr = np.asarray(x, dtype=float)
    if arr.shape != shape:
        raise ValueError(f"{name}: expected shape {shape}, got {arr.shape}")
    return arr


@dataclass
class ScenarioConfig:
    """Full description of one network instance.

    arrival_rates/delay_qos are per user; max_tx_power, amp_inefficiency and
    harvested_rrh are per RRH (index 0 is the macro site by convention in the
    default scenario). compute_coeff multiplies the cubed per-user service
    rate (bits/s)^3 to give cloud compute watts.
    """

    n_rrh: int
    n_users: int
    n_antennas: int
    bandwidth_hz: float
    noise_power: float
    arrival_rates: np.ndarray      # (K,) bits/s
    delay_qos: np.ndarray          # (K,) seconds
    max_tx_power: np.ndarray       # (N,) watts
    amp_inefficiency: np.ndarray   # (N,) >= 1, watts consumed per radiated watt
    backhaul_power: float          # watts per active RRH, paid at the cloud
    compute_coeff: float           # watts per (bit/s)^3
    price_buy: float
    price_sell: float
    harvested_rrh: np.ndarray      # (N,) watts
    harvested_cloud: float         # watts
    rrh_positions: np.ndarray      # (N, 2) km
    user_positions: np.ndarray     # (K, 2) km
    shadowing_mean_db: float = 1.0
    shadowing_var_db: float = 6.31
    antenna_gain_db: float = 9.0
    pathloss_model: str = PATHLOSS_MODEL
    rng_seed: int = 0

    def __post_init__(self):
        self.n_rrh = int(self.n_rrh)
        self.n_users = int(self.n_users)
        self.n_antennas = int(self.n_antennas)
        n, k = self.n_rrh, self.n_users
        self.arrival_rates = _as_float_array(self.arrival_rates, (k,), "arrival_rates")
        self.delay_qos = _as_float_array(self.delay_qos, (k,), "delay_qos")
        self.max_tx_power = _as_float_array(self.max_tx_power, (n,), "max_tx_power")
        self.amp_inefficiency = _as_float_array(self.amp_inefficiency, (n,), "amp_inefficiency")
        self.harvested_rrh = _as_float_array(self.harvested_rrh, (n,), "harvested_rrh")
        self.rrh_positions = _as_float_array(self.rrh_positions, (n, 2), "rrh_positions")
        self.user_positions = _as_float_array(self.user_positions, (k, 2), "user_positions")
        self.bandwidth_hz = float(self.bandwidth_hz)
        self.noise_power = float(self.noise_power)
        self.backhaul_power = float(self.backhaul_power)
        self.compute_coeff = float(self.compute_coeff)
        self.price_buy = float(self.price_buy)
        self.price_sell = float(self.price_sell)
        self.harvested_cloud = float(self.harvested_cloud)
        self.shadowing_mean_db = float(self.shadowing_mean_db)
        self.shadowing_var_db = float(self.shadowing_var_db)
        self.antenna_gain_db = float(self.antenna_gain_db)
        self.rng_seed = int(self.rng_seed)
        self.validate()

    def validate(self):
        problems = []
        if self.n_rrh < 1:
            problems.append("n_rrh must be >= 1")
        if self.n_users < 1:
            problems.append("n_users must be >= 1")
        if self.n_antennas < 1:
            problems.append("n_antennas must be >= 1")
        if not self.bandwidth_hz > 0:
            problems.append("bandwidth_hz must be > 0")
        if not self.noise_power > 0:
            problems.append("noise_power must be > 0")
        if np.any(self.arrival_rates <= 0):
            problems.append("arrival_rates must be > 0")
        if np.any(self.delay_qos <= 0) or not np.all(np.isfinite(self.delay_qos)):
            problems.append("delay_qos must be positive and finite")
        if np.any(self.max_tx_power <= 0):
            problems.append("max_tx_power must be > 0")
        if np.any(self.amp_inefficiency < 1.0):
            problems.append("amp_inefficiency must be >= 1")
        if self.backhaul_power < 0:
            problems.append("backhaul_power must be >= 0")
        if self.compute_coeff <= 0:
            problems.append("compute_coeff must be > 0")
        if not (0 <= self.price_sell < self.price_buy):
            problems.append("prices must satisfy 0 <= price_sell < price_buy")
        if np.any(self.harvested_rrh < 0) or self.harvested_cloud < 0:
            problems.append("harvested powers must be >= 0")
        if self.shadowing_var_db <= 0:
            problems.append("shadowing_var_db must be > 0")
        if problems:
            raise ValueError("invalid scenario: " + "; ".join(problems))

    def link_distances(self):
        """(N, K) matrix of RRH-to-user distances in km."""
        diff = self.rrh_positions[:, None, :] - self.user_positions[None, :, :]
        return np.sqrt(np.sum(diff**2, axis=2))

    def to_json_dict(self):
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = v.tolist() if isinstance(v, np.ndarray) else v
        return out

    def canonical_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True, separators=(",", ":"))

    def config_hash(self):
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:16]


def save_scenario(cfg: ScenarioConfig, path):
    with open(path, "w") as fh:
        json.dump(cfg.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> ScenarioConfig:
    with open(path) as fh:
        raw = json.load(fh)
    known = {f.name for f in dataclasses.fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
    missing = {f.name for f in dataclasses.fields(ScenarioConfig)
               if f.default is dataclasses.MISSING and f.name not in raw}
    if missing:
        raise ValueError(f"missing scenario fields: {sorted(missing)}")
    return ScenarioConfig(**raw)


@dataclass
class ChannelState:
    """One channel realization: h[k] is the stacked vector over all RRH
    antennas seen by user k, laid out RRH-major (RRH n occupies columns
    n*L .. (n+1)*L-1)."""

    h: np.ndarray  # (K, N*L) complex

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=complex)
        if self.h.ndim != 2:
            raise ValueError("channel matrix must be 2-D (users x total antennas)")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel matrix contains non-finite entries")

    @property
    def n_users(self):
        return self.h.shape[0]

    @property
    def dim(self):
        return self.h.shape[1]

    def block(self, k, n, n_antennas):
        """Antenna coefficients of RRH n as seen by user k."""
        return self.h[k, n * n_antennas:(n + 1) * n_antennas]


def generate_channels(cfg: ScenarioConfig, seed=None) -> ChannelState:
    """Draw one channel realization.

    Large-scale part per (n, k) link: pathloss at the link distance, fixed
    antenna gain, and lognormal shadowing (Gaussian in dB with the configured
    mean/variance). Small-scale part per antenna: unit circularly-symmetric
    complex Gaussian. Deterministic for a given (cfg, seed).
    """
    if seed is None:
        seed = cfg.rng_seed
    if cfg.shadowing_var_db <= 0:
        raise ValueError("shadowing_var_db must be > 0")
    d = cfg.link_distances()
    if np.any(d <= 0):
        raise ValueError("user placed exactly on an RRH; channel model needs distance > 0")
    n, k, l = cfg.n_rrh, cfg.n_users, cfg.n_antennas

    rng = np.random.default_rng(seed)
    shadow_db = rng.normal(cfg.shadowing_mean_db, np.sqrt(cfg.shadowing_var_db), size=(n, k))
    fading = (rng.standard_normal((k, n, l)) + 1j * rng.standard_normal((k, n, l))) / np.sqrt(2.0)

    gain_lin = db_to_linear(cfg.antenna_gain_db)
    pl_lin = db_to_linear(-pathloss_db(d))           # (n, k) attenuation
    shadow_lin = db_to_linear(shadow_db)             # (n, k)
    amp = np.sqrt(gain_lin * pl_lin * shadow_lin)    # (n, k)

    h = fading * amp.T[:, :, None]                   # (k, n, l)
    return ChannelState(h=h.reshape(k, n * l))


def default_paper_scenario(seed=0, harvested_rrh=None, harvested_cloud=None) -> ScenarioConfig:
    """Reference network: one macro site at the origin plus six low-power
    sites on a 0.6 km circle, four 4-antenna RRH fronts, four single-antenna
    users dropped uniformly in the disc. Harvested powers default to zero;
    callers pick a harvest profile (see default_sweep_scenario)."""
    n, k, l = 7, 4, 4
    angles = 2.0 * np.pi * np.arange(6) / 6.0
    rrh_pos = np.vstack([[0.0, 0.0], 0.6 * np.column_stack([np.cos(angles), np.sin(angles)])])
    rng = np.random.default_rng(seed)
    radius = 0.6 * np.sqrt(rng.uniform(size=k))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=k)
    user_pos = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])

    return ScenarioConfig(
        n_rrh=n,
        n_users=k,
        n_antennas=l,
        bandwidth_hz=10e6,
        noise_power=3.1623e-13,            # about -95 dBm over 10 MHz
        arrival_rates=np.full(k, 4e6),
        delay_qos=np.full(k, 1e-3),
        max_tx_power=np.array([20.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0]),
        amp_inefficiency=np.array([4.0, 2.0, 2.0, 2.0, 2.0, 2.0, 2.0]),
        backhaul_power=5.0,
        compute_coeff=1e-20,
        price_buy=1.0,
        price_sell=0.1,
        harvested_rrh=np.zeros(n) if harvested_rrh is None else np.asarray(harvested_rrh, float),
        harvested_cloud=0.0 if harvested_cloud is None else float(harvested_cloud),
        rrh_positions=rrh_pos,
        user_positions=user_pos,
        rng_seed=seed,
    )


def default_sweep_scenario(seed=0) -> ScenarioConfig:
    """Paper scenario plus the documented harvest profile used for the
    arrival-rate sweep: the macro site harvests more than each helper, and
    the cloud holds the largest harvester pool."""
    return default_paper_scenario(
        seed=seed,
        harvested_rrh=[4.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
        harvested_cloud=10.0,
    )


def default_small_scenario(seed=0) -> ScenarioConfig:
    """Two RRHs, two users, two antennas: the default small instance used
    by convergence tests and quick-start examples."""
    n, k, l = 2, 2, 2
    rrh_pos = np.array([[-0.15, 0.0], [0.15, 0.0]])
    rng = np.random.default_rng(seed)
    radius = 0.3 * np.sqrt(rng.uniform(size=k))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=k)
    user_pos = np.column_stack([radius * np.cos(theta), radius * np.sin(theta)])
    return ScenarioConfig(
        n_rrh=n,
        n_users=k,
        n_antennas=l,
        bandwidth_hz=10e6,
        noise_power=3.1623e-13,
        arrival_rates=np.full(k, 3e6),
        delay_qos=np.full(k, 1e-3),
        max_tx_power=np.array([2.0, 2.0]),
        amp_inefficiency=np.array([2.0, 2.0]),
        backhaul_power=2.0,
        compute_coeff=1e-20,
        price_buy=1.0,
        price_sell=0.1,
        harvested_rrh=np.array([1.5, 1.5]),
        harvested_cloud=5.0,
        rrh_positions=rrh_pos,
        user_positions=user_pos,
        rng_seed=seed,
    )
