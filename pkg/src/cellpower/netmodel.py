"""Multi-cell downlink radio model.

Deterministic network mathematics: hexagonal topology, path loss +
log-normal shadowing + Rayleigh fading link gains, SINR, CQI quantization,
per-subband user assignment and the total-throughput objective.

All randomness comes in through an explicit numpy Generator; every type is
treated as immutable after construction, so independent channel
realizations can be evaluated concurrently.
"""

import math
from dataclasses import dataclass

import numpy as np


class ConfigError(ValueError):
    """Raised for physically or numerically infeasible configuration."""


# Slack for power-budget comparisons (watts). Level sums are exact decimals
# in practice; this only absorbs float round-off.
BUDGET_TOL = 1e-9


def db_to_linear(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def linear_to_db(x):
    return 10.0 * np.log10(x)


def dbm_per_hz_to_watts(density_dbm_hz: float, bandwidth_hz: float) -> float:
    """Noise power in watts over one subband of the given bandwidth."""
    return 10.0 ** ((density_dbm_hz - 30.0) / 10.0) * bandwidth_hz


@dataclass(frozen=True)
class ScenarioConfig:
    """Physical constants of one simulated network.

    Distances in meters, powers in watts, bandwidth in Hz, noise density
    in dBm/Hz. Defaults are the 5-cell evaluation scenario.
    """

    num_cells: int = 5
    users_per_cell: int = 5
    num_subbands: int = 3
    subband_bandwidth_hz: float = 2.88e6
    cell_radius: float = 500.0
    max_power: float = 40.0
    power_levels: tuple[float, ...] = (6.4, 9.6, 12.8, 16.0, 19.2)
    noise_density: float = -174.0
    target_ber: float = 1e-6
    pathloss_ref_db: float = 128.1
    pathloss_exp_db_per_decade: float = 37.6
    shadowing_sigma: float = 8.0
    min_user_distance: float = 35.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_cells < 1 or self.users_per_cell < 1 or self.num_subbands < 1:
            raise ConfigError("num_cells, users_per_cell and num_subbands must be >= 1")
        levels = tuple(float(p) for p in self.power_levels)
        object.__setattr__(self, "power_levels", levels)
        if not levels or any(p <= 0 for p in levels):
            raise ConfigError("power levels must be positive")
        if any(b <= a for a, b in zip(levels, levels[1:])):
            raise ConfigError("power levels must be strictly increasing")
        if levels[0] * self.num_subbands > self.max_power + BUDGET_TOL:
            raise ConfigError(
                f"minimum level {levels[0]} W on {self.num_subbands} subbands "
                f"exceeds the {self.max_power} W budget; no feasible action"
            )
        if not 0.0 < self.target_ber < 0.2:
            raise ConfigError(f"target_ber {self.target_ber} outside (0, 0.2)")
        if not 0.0 < self.min_user_distance < self.cell_radius:
            raise ConfigError("need 0 < min_user_distance < cell_radius")

    @property
    def num_users(self) -> int:
        return self.num_cells * self.users_per_cell

    @property
    def noise_power(self) -> float:
        """Receiver noise in watts per subband."""
        return dbm_per_hz_to_watts(self.noise_density, self.subband_bandwidth_hz)


def snr_gap(target_ber: float) -> float:
    """SNR gap of M-QAM at the given bit error rate: -1.5 / ln(5 BER)."""
    if not 0.0 < target_ber < 0.2:
        raise ConfigError(f"target_ber {target_ber} outside (0, 0.2)")
    return -1.5 / math.log(5.0 * target_ber)


@dataclass(frozen=True)
class Topology:
    """One drop of base stations and users.

    Users are indexed globally in cell-major order: the users of cell k are
    the global indices k*U .. (k+1)*U - 1, and that is also their serving
    association.
    """

    bs_positions: np.ndarray     # (K, 2) m
    user_positions: np.ndarray   # (K*U, 2) m
    association: np.ndarray      # (K*U,) serving cell per user
    bs_distance: np.ndarray      # (K*U, K) user-to-BS distances, m
    cell_radius: float

    @property
    def num_cells(self) -> int:
        return self.bs_positions.shape[0]

    @property
    def num_users(self) -> int:
        return self.user_positions.shape[0]

    @property
    def users_per_cell(self) -> int:
        return self.num_users // self.num_cells

    @property
    def serving_distance(self) -> np.ndarray:
        """Distance of each user to its serving BS, (K*U,)."""
        return self.bs_distance[np.arange(self.num_users), self.association]

    def cell_users(self, k: int) -> range:
        u = self.users_per_cell
        return range(k * u, (k + 1) * u)


def _hex_spiral(count: int, pitch: float) -> np.ndarray:
    """First `count` hexagonal grid centers, spiral order from the origin."""
    dirs = [(1, 0), (1, -1), (0, -1), (-1, 0), (-1, 1), (0, 1)]
    axial = [(0, 0)]
    ring = 1
    while len(axial) < count:
        q, r = ring * dirs[4][0], ring * dirs[4][1]
        for d in range(6):
            for _ in range(ring):
                if len(axial) < count:
                    axial.append((q, r))
                q, r = q + dirs[d][0], r + dirs[d][1]
        ring += 1
    xy = [(pitch * (q + r / 2.0), pitch * r * math.sqrt(3.0) / 2.0) for q, r in axial]
    return np.array(xy[:count], dtype=float)


def build_topology(config: ScenarioConfig, rng: np.random.Generator) -> Topology:
    """Drop BSs on a hex grid and users uniformly in each serving disk.

    Inter-site distance is 2 R cos(30 deg); user radii below
    min_user_distance are rejected and redrawn.
    """
    pitch = 2.0 * config.cell_radius * math.cos(math.pi / 6.0)
    bs = _hex_spiral(config.num_cells, pitch)

    users = np.empty((config.num_users, 2), dtype=float)
    i = 0
    for k in range(config.num_cells):
        for _ in range(config.users_per_cell):
            while True:
                radius = config.cell_radius * math.sqrt(rng.uniform())
                if radius >= config.min_user_distance:
                    break
            angle = rng.uniform(0.0, 2.0 * math.pi)
            users[i] = bs[k] + radius * np.array([math.cos(angle), math.sin(angle)])
            i += 1

    association = np.repeat(np.arange(config.num_cells), config.users_per_cell)
    dist = np.linalg.norm(users[:, None, :] - bs[None, :, :], axis=2)
    return Topology(bs, users, association, dist, config.cell_radius)


@dataclass(frozen=True)
class ChannelRealization:
    """Frozen link gains for one user drop.

    gain[u, k, f] is the linear power gain from BS k to user u on subband f;
    noise_power is the per-subband receiver noise in watts and bandwidth_hz
    the subband width used when converting SINR to rate.
    """

    gain: np.ndarray       # (K*U, K, F) linear
    noise_power: float     # W per subband
    bandwidth_hz: float

    @property
    def num_subbands(self) -> int:
        return self.gain.shape[2]


def draw_channel(topology: Topology, config: ScenarioConfig,
                 rng: np.random.Generator) -> ChannelRealization:
    """Sample one channel realization.

    gain = 10^(-(PL + X)/10) * |H|^2 with
      PL(d) = pathloss_ref_db + pathloss_exp_db_per_decade * log10(d / 1 km),
      X ~ Normal(0, shadowing_sigma^2) dB per (user, BS) link,
      |H|^2 ~ Exponential(mean 1) per (user, BS, subband).
    """
    d_km = topology.bs_distance / 1000.0
    pl_db = config.pathloss_ref_db + config.pathloss_exp_db_per_decade * np.log10(d_km)
    shadow_db = rng.normal(0.0, config.shadowing_sigma, size=pl_db.shape)
    fading = rng.exponential(1.0, size=(topology.num_users, topology.num_cells,
                                        config.num_subbands))
    gain = db_to_linear(-(pl_db + shadow_db))[:, :, None] * fading
    return ChannelRealization(gain, config.noise_power, config.subband_bandwidth_hz)


def validate_power(power: np.ndarray, config: ScenarioConfig,
                   discrete: bool = False) -> None:
    """Check the per-cell budget (and optionally the discrete level set)."""
    power = np.asarray(power, dtype=float)
    if power.shape != (config.num_cells, config.num_subbands):
        raise ConfigError(f"power allocation shape {power.shape} != "
                          f"({config.num_cells}, {config.num_subbands})")
    if np.any(power < 0):
        raise ConfigError("negative transmit power")
    totals = power.sum(axis=1)
    if np.any(totals > config.max_power + BUDGET_TOL):
        raise ConfigError(f"per-cell budget {config.max_power} W exceeded: {totals}")
    if discrete:
        levels = np.asarray(config.power_levels)
        if not np.all(np.isin(power, levels)):
            raise ConfigError("allocation uses powers outside the level set")


def sinr(power: np.ndarray, channel: ChannelRealization,
         user: int, cell: int, subband: int) -> float:
    """SINR of one user served by `cell` on `subband` under allocation `power`."""
    received = power[:, subband] * channel.gain[user, :, subband]
    signal = received[cell]
    # sum interferers directly; total-minus-signal cancels catastrophically
    # when the serving link dominates
    received[cell] = 0.0
    return float(signal / (channel.noise_power + received.sum()))


def serving_sinr(power: np.ndarray, channel: ChannelRealization,
                 topology: Topology) -> np.ndarray:
    """SINR of every user w.r.t. its serving cell, shape (K*U, F)."""
    received = channel.gain * power[None, :, :]            # (K*U, K, F)
    users = np.arange(topology.num_users)
    signal = received[users, topology.association, :].copy()
    received[users, topology.association, :] = 0.0
    return signal / (channel.noise_power + received.sum(axis=1))


def _cell_user_rates(power, channel, topology, alpha):
    """Achievable rate of each user on each subband, shape (K, U, F), bits/s."""
    rate = channel.bandwidth_hz * np.log2(1.0 + alpha * serving_sinr(power, channel, topology))
    return rate.reshape(topology.num_cells, topology.users_per_cell,
                        channel.num_subbands)


def assign_subbands(power: np.ndarray, channel: ChannelRealization,
                    topology: Topology, alpha: float) -> np.ndarray:
    """Give each (cell, subband) to its own rate-maximizing user.

    Returns global user indices, shape (K, F); ties go to the lowest index.
    """
    rates = _cell_user_rates(power, channel, topology, alpha)
    best = rates.argmax(axis=1)                            # (K, F), first max wins
    offsets = (np.arange(topology.num_cells) * topology.users_per_cell)[:, None]
    return best + offsets


def network_utility(power: np.ndarray, channel: ChannelRealization,
                    topology: Topology, alpha: float) -> float:
    """Total network throughput in bits/s under the rate-max subband rule."""
    rates = _cell_user_rates(power, channel, topology, alpha)
    return float(rates.max(axis=1).sum())


# CQI reporting: SINR in dB floored at -10 dB, then 15 uniform bins over
# [-10 dB, +30 dB], clamped at both ends.
CQI_MIN_DB = -10.0
CQI_MAX_DB = 30.0
CQI_LEVELS = 15
_CQI_BIN_DB = (CQI_MAX_DB - CQI_MIN_DB) / CQI_LEVELS


def cqi_quantize(sinr_value: float) -> int:
    """Quantize one linear SINR to a CQI index in 1..15."""
    db = 10.0 * math.log10(max(float(sinr_value), 10.0 ** (CQI_MIN_DB / 10.0)))
    idx = 1 + math.floor((db - CQI_MIN_DB) / _CQI_BIN_DB)
    return min(max(idx, 1), CQI_LEVELS)


def cqi_quantize_array(sinr_values: np.ndarray) -> np.ndarray:
    """Vectorized cqi_quantize."""
    floored = np.maximum(np.asarray(sinr_values, dtype=float),
                         10.0 ** (CQI_MIN_DB / 10.0))
    db = 10.0 * np.log10(floored)
    idx = 1 + np.floor((db - CQI_MIN_DB) / _CQI_BIN_DB).astype(int)
    return np.clip(idx, 1, CQI_LEVELS)


def location_indicator(topology: Topology) -> np.ndarray:
    """1 for cell-edge users (serving distance strictly beyond R/2), else 0."""
    return (topology.serving_distance > topology.cell_radius / 2.0).astype(float)
