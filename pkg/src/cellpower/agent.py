"""Deep-Q controller: per-cell epsilon-greedy selection, replay training
and the greedy evaluation protocol against the reference solvers."""

import math
from dataclasses import dataclass

import numpy as np

from . import baselines
from .env import PowerControlEnv, Transition
from .netmodel import network_utility
from .qnet import MLP, RMSprop, train_batch
from .replay import ReplayBuffer


@dataclass
class AgentConfig:
    discount: float = 0.99
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_anneal_steps: int | None = None   # default: first 10% of train_steps
    batch_size: int = 64
    target_update_steps: int = 1000           # counted in gradient steps
    replay_capacity: int = 80_000
    train_steps: int = 200_000
    train_start: int | None = None            # default: max(1000, batch_size)
    train_every: int = 1
    learning_rate: float = 0.00025
    rmsprop_decay: float = 0.95
    rmsprop_epsilon: float = 1e-6
    hidden_size: int | None = None            # default: 2 x output size

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError("discount must be in (0, 1]")
        for name in ("epsilon_start", "epsilon_end"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} outside [0, 1]")
        if self.target_update_steps < 1:
            raise ValueError("target_update_steps must be >= 1")

    def epsilon_at(self, step: int) -> float:
        anneal = self.epsilon_anneal_steps
        if anneal is None:
            anneal = max(1, self.train_steps // 10)
        if step >= anneal:
            return self.epsilon_end
        frac = step / anneal
        return self.epsilon_start + frac * (self.epsilon_end - self.epsilon_start)

    def resolved_train_start(self) -> int:
        if self.train_start is not None:
            return max(self.train_start, self.batch_size)
        return max(1000, self.batch_size)


def select_joint_action(q_values: np.ndarray, epsilon: float, num_cells: int,
                        rng: np.random.Generator | None) -> np.ndarray:
    """Per-cell index: explore uniformly with probability epsilon, else the
    argmax of that cell's block (ties to the lowest index)."""
    q = np.asarray(q_values)
    block = q.shape[0] // num_cells
    choice = np.empty(num_cells, dtype=int)
    for k in range(num_cells):
        if epsilon > 0.0 and rng.random() < epsilon:
            choice[k] = rng.integers(0, block)
        else:
            choice[k] = int(np.argmax(q[k * block:(k + 1) * block]))
    return choice


def bellman_targets(target_net: MLP, transitions, discount: float,
                    num_cells: int) -> np.ndarray:
    """Per-cell targets y_k = r (terminal) or r + gamma * max over the cell's
    block of target-network values at the next state."""
    rewards = np.array([t.reward for t in transitions])
    next_states = np.stack([t.next_state for t in transitions])
    q_next = target_net.forward(next_states)
    n = len(transitions)
    block = q_next.shape[1] // num_cells
    block_max = q_next.reshape(n, num_cells, block).max(axis=2)
    y = rewards[:, None] + discount * block_max
    terminal = np.array([t.terminal for t in transitions])
    y[terminal] = rewards[terminal, None]
    return y


@dataclass
class EpisodeLog:
    step: int          # global env step at which the episode ended
    episode: int
    epsilon: float
    loss: float        # mean training loss over the episode (nan before training starts)
    length: int
    throughput: float  # peak throughput reached within the episode, bits/s


@dataclass
class TrainResult:
    network: MLP
    optimizer: RMSprop
    episodes: list
    gradient_steps: int


def train(env: PowerControlEnv, mlp: MLP, buffer: ReplayBuffer,
          config: AgentConfig, rng: np.random.Generator,
          opt: RMSprop | None = None, on_step=None,
          start_step: int = 0) -> TrainResult:
    """Run episodic epsilon-greedy training until config.train_steps env steps.

    on_step, if given, is called after every environment step as
    on_step(step, grad_steps, mlp, target); used for interval checkpoints
    and diagnostics. start_step resumes the global step counter (and with it
    the epsilon schedule) from a checkpointed run.
    """
    num_cells = env.config.num_cells
    if opt is None:
        opt = RMSprop(mlp, config.learning_rate, config.rmsprop_decay,
                      config.rmsprop_epsilon)
    target = mlp.clone()
    train_start = config.resolved_train_start()

    episodes = []
    step = start_step
    grad_steps = 0
    episode = 0
    while step < config.train_steps:
        ctx, state = env.reset(rng)
        episode += 1
        ep_losses = []
        ep_len = 0
        ep_peak = -math.inf
        while not ctx.terminal and step < config.train_steps:
            eps = config.epsilon_at(step)
            action = select_joint_action(mlp.forward(state), eps, num_cells, rng)
            next_state, reward, terminal, throughput = env.step(ctx, action)
            buffer.push(Transition(state, tuple(int(a) for a in action),
                                   reward, next_state, terminal))
            state = next_state
            step += 1
            ep_len += 1
            ep_peak = max(ep_peak, throughput)

            if len(buffer) >= train_start and step % config.train_every == 0:
                batch = buffer.sample(config.batch_size, rng)
                targets = bellman_targets(target, batch, config.discount, num_cells)
                states = np.stack([t.state for t in batch])
                actions = np.array([t.joint_action for t in batch])
                try:
                    loss = train_batch(mlp, opt, states, actions, targets,
                                       env.actions.size)
                except FloatingPointError as exc:
                    raise RuntimeError(
                        f"training diverged at env step {step} "
                        f"(episode {episode})") from exc
                ep_losses.append(loss)
                grad_steps += 1
                if grad_steps % config.target_update_steps == 0:
                    target = mlp.clone()
            if on_step is not None:
                on_step(step, grad_steps, mlp, target)

        mean_loss = float(np.mean(ep_losses)) if ep_losses else float("nan")
        episodes.append(EpisodeLog(step, episode, config.epsilon_at(step),
                                   mean_loss, ep_len, ep_peak))
    return TrainResult(mlp, opt, episodes, grad_steps)


@dataclass
class TestRecord:
    channel_seed: int
    dql_throughput: float
    dql_action: tuple
    ga_throughput: float
    wmmse_throughput: float
    maxpower_throughput: float
    random_throughput: float


def greedy_rollout(env: PowerControlEnv, mlp: MLP, rng: np.random.Generator):
    """One greedy episode; returns the last improving action and its
    throughput (the initial random allocation if the first action fails)."""
    ctx, state = env.reset(rng)
    best_action = tuple(int(a) for a in ctx.current_action)
    best_throughput = network_utility(ctx.current_power, ctx.channel,
                                      ctx.topology, env.alpha)
    while not ctx.terminal:
        action = select_joint_action(mlp.forward(state), 0.0,
                                     env.config.num_cells, None)
        state, _, terminal, throughput = env.step(ctx, action)
        if not terminal:
            best_action = tuple(int(a) for a in action)
            best_throughput = throughput
    return ctx, best_action, best_throughput


def test(env: PowerControlEnv, mlp: MLP, n_samples: int, seed: int,
         ga_config: baselines.GAConfig | None = None,
         max_power_level: float = 12.8,
         wmmse_iters: int = 500) -> list:
    """Greedy policy vs. GA / WMMSE / max-power / random on shared channels.

    Each sample draws a fresh channel from its own recorded seed; every
    method is evaluated on that same frozen realization.
    """
    if ga_config is None:
        ga_config = baselines.GAConfig()
    sample_seeds = np.random.default_rng(seed).integers(0, 2 ** 63 - 1,
                                                        size=n_samples)
    records = []
    for sample_seed in sample_seeds:
        sample_seed = int(sample_seed)
        ctx, dql_action, dql_throughput = greedy_rollout(
            env, mlp, np.random.default_rng([sample_seed, 0]))

        _, ga_util = baselines.ga_optimize(
            ctx.channel, ctx.topology, env.config, ga_config,
            np.random.default_rng([sample_seed, 1]))
        wm = baselines.wmmse(ctx.channel, ctx.topology, env.config.max_power,
                             env.alpha, max_iters=wmmse_iters)
        max_power = baselines.max_power_baseline(env.config, max_power_level)
        max_util = network_utility(max_power, ctx.channel, ctx.topology, env.alpha)
        rand_power = baselines.random_power_baseline(
            env.actions, env.config.num_cells, np.random.default_rng([sample_seed, 2]))
        rand_util = network_utility(rand_power, ctx.channel, ctx.topology, env.alpha)

        records.append(TestRecord(sample_seed, dql_throughput, dql_action,
                                  ga_util, wm.throughput, max_util, rand_util))
    return records
