"""Episodic decision process over the radio model.

One episode runs on a frozen topology + channel. Every step maps K per-cell
action indices to discrete power vectors, recomputes the network throughput
and continues only while the throughput strictly increases.
"""

import io
import itertools
from dataclasses import dataclass

import numpy as np

from .netmodel import (
    BUDGET_TOL,
    ChannelRealization,
    ConfigError,
    ScenarioConfig,
    Topology,
    build_topology,
    cqi_quantize_array,
    draw_channel,
    location_indicator,
    network_utility,
    serving_sinr,
    snr_gap,
)


@dataclass(frozen=True)
class ActionSpace:
    """Budget-feasible per-cell power vectors in a fixed deterministic order."""

    level_indices: np.ndarray   # (m, F) int, lexicographic
    powers: np.ndarray          # (m, F) W

    @property
    def size(self) -> int:
        return self.powers.shape[0]

    @property
    def num_subbands(self) -> int:
        return self.powers.shape[1]

    def joint_power(self, joint_action) -> np.ndarray:
        """Decode K per-cell action indices into a (K, F) allocation."""
        return self.powers[np.asarray(joint_action, dtype=int)]


def enumerate_actions(power_levels, num_subbands: int, max_power: float) -> ActionSpace:
    """All level combinations per cell, minus those breaking the power budget."""
    levels = np.asarray(power_levels, dtype=float)
    kept = []
    for combo in itertools.product(range(len(levels)), repeat=num_subbands):
        if levels[list(combo)].sum() <= max_power + BUDGET_TOL:
            kept.append(combo)
    if not kept:
        raise ConfigError("no feasible power combination under the budget")
    idx = np.array(kept, dtype=int)
    return ActionSpace(idx, levels[idx])


def actions_to_csv(space: ActionSpace) -> str:
    """Action table as CSV: index, per-subband powers, per-cell total."""
    out = io.StringIO()
    cols = ",".join(f"p{f}_w" for f in range(space.num_subbands))
    out.write(f"action,{cols},total_w\n")
    for i, row in enumerate(space.powers):
        vals = ",".join(repr(float(v)) for v in row)
        out.write(f"{i},{vals},{repr(float(row.sum()))}\n")
    return out.getvalue()


@dataclass
class Transition:
    state: np.ndarray
    joint_action: tuple
    reward: float
    next_state: np.ndarray
    terminal: bool


@dataclass
class EpisodeContext:
    """Mutable per-episode state; channel and topology stay frozen."""

    topology: Topology
    channel: ChannelRealization
    current_power: np.ndarray          # (K, F) W
    current_action: np.ndarray         # (K,) action indices
    previous_throughput: float         # bits/s
    step_count: int = 0
    terminal: bool = False


class PowerControlEnv:
    """Power-allocation episodes with the throughput-must-increase rule.

    Rewards: +1 while the total throughput strictly improves, terminal_reward
    on the step that fails to improve (or hits the step cap).
    """

    def __init__(self, config: ScenarioConfig, terminal_reward: float = -1.0,
                 step_reward: float = 1.0, max_episode_steps: int = 500):
        self.config = config
        self.alpha = snr_gap(config.target_ber)
        self.actions = enumerate_actions(config.power_levels, config.num_subbands,
                                         config.max_power)
        self.terminal_reward = terminal_reward
        self.step_reward = step_reward
        self.max_episode_steps = max_episode_steps

    @property
    def state_size(self) -> int:
        c = self.config
        return c.num_cells * c.users_per_cell * (c.num_subbands + 1)

    @property
    def num_actions(self) -> int:
        """Output width of a Q-network: K blocks of m per-cell actions."""
        return self.config.num_cells * self.actions.size

    def reset(self, rng: np.random.Generator):
        """Fresh drop + channel, random feasible action per cell.

        The improvement baseline starts at the throughput of the all-minimum
        power action, not at the random allocation's.
        """
        topo = build_topology(self.config, rng)
        channel = draw_channel(topo, self.config, rng)
        joint = rng.integers(0, self.actions.size, size=self.config.num_cells)
        power = self.actions.joint_power(joint)
        # index 0 is the all-lowest-level combination, feasible by config invariant
        min_power = self.actions.joint_power(np.zeros(self.config.num_cells, dtype=int))
        baseline = network_utility(min_power, channel, topo, self.alpha)
        ctx = EpisodeContext(topo, channel, power, np.asarray(joint), baseline)
        return ctx, self.encode_state(ctx)

    def encode_state(self, ctx: EpisodeContext) -> np.ndarray:
        """Per user: F CQI entries scaled to (0, 1] then one cell-edge bit."""
        s = serving_sinr(ctx.current_power, ctx.channel, ctx.topology)
        cqi = cqi_quantize_array(s) / 15.0                      # (K*U, F)
        edge = location_indicator(ctx.topology)[:, None]        # (K*U, 1)
        return np.concatenate([cqi, edge], axis=1).reshape(-1)

    def step(self, ctx: EpisodeContext, joint_action):
        """Apply K action indices; returns (next_state, reward, terminal, throughput)."""
        if ctx.terminal:
            raise RuntimeError("episode already terminated; reset first")
        joint = np.asarray(joint_action, dtype=int)
        if joint.shape != (self.config.num_cells,):
            raise ValueError(f"expected {self.config.num_cells} action indices")
        if np.any(joint < 0) or np.any(joint >= self.actions.size):
            raise ValueError("action index out of range")

        ctx.current_action = joint
        ctx.current_power = self.actions.joint_power(joint)
        throughput = network_utility(ctx.current_power, ctx.channel, ctx.topology,
                                     self.alpha)
        ctx.step_count += 1
        terminal = (throughput <= ctx.previous_throughput
                    or ctx.step_count >= self.max_episode_steps)
        reward = self.terminal_reward if terminal else self.step_reward
        ctx.previous_throughput = throughput
        ctx.terminal = terminal
        return self.encode_state(ctx), reward, terminal, throughput
