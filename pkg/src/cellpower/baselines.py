"""Reference power-allocation solvers used to benchmark the learned policy.

All solvers are pure given an explicit Generator and work on one frozen
channel realization. GA and exhaustive search operate on the discrete
level grid; WMMSE optimizes continuous per-subband powers.
"""

import math
from dataclasses import dataclass

import numpy as np

from .env import ActionSpace
from .netmodel import (
    BUDGET_TOL,
    ChannelRealization,
    ConfigError,
    ScenarioConfig,
    Topology,
    assign_subbands,
    network_utility,
    snr_gap,
)


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 100
    generations: int = 200
    crossover_prob: float = 0.9
    mutation_prob: float = 0.05      # per gene
    tournament_size: int = 3
    elite_count: int = 2

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigError("population_size must be >= 2")
        for name in ("crossover_prob", "mutation_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} outside [0, 1]")
        if not 0 <= self.elite_count < self.population_size:
            raise ConfigError("elite_count must be < population_size")
        if self.tournament_size < 1:
            raise ConfigError("tournament_size must be >= 1")


def _repair(genes: np.ndarray, levels: np.ndarray, num_subbands: int,
            max_power: float) -> None:
    """Decrement the largest gene of any over-budget cell until feasible."""
    per_cell = genes.reshape(-1, num_subbands)
    for cell in per_cell:
        while levels[cell].sum() > max_power + BUDGET_TOL:
            cell[np.argmax(cell)] -= 1


def ga_optimize(channel: ChannelRealization, topology: Topology,
                config: ScenarioConfig, ga_config: GAConfig,
                rng: np.random.Generator):
    """Evolve K*F level indices toward the throughput maximum.

    Tournament selection, single-point crossover, per-gene mutation, budget
    repair and elitism; returns (power, throughput) of the best individual
    ever evaluated.
    """
    alpha = snr_gap(config.target_ber)
    levels = np.asarray(config.power_levels)
    n_levels = len(levels)
    length = config.num_cells * config.num_subbands
    pop_size = ga_config.population_size

    def fitness(genes):
        power = levels[genes.reshape(config.num_cells, config.num_subbands)]
        return network_utility(power, channel, topology, alpha)

    pop = rng.integers(0, n_levels, size=(pop_size, length))
    for row in pop:
        _repair(row, levels, config.num_subbands, config.max_power)

    best_genes = None
    best_fit = -math.inf

    def evaluate(population):
        nonlocal best_genes, best_fit
        fits = np.array([fitness(g) for g in population])
        top = int(np.argmax(fits))
        if fits[top] > best_fit:
            best_fit = float(fits[top])
            best_genes = population[top].copy()
        return fits

    fits = evaluate(pop)
    for _ in range(ga_config.generations):
        # stable sort keeps ties deterministic
        order = np.argsort(-fits, kind="stable")
        children = [pop[i].copy() for i in order[:ga_config.elite_count]]
        while len(children) < pop_size:
            entrants = rng.integers(0, pop_size, size=ga_config.tournament_size)
            p1 = pop[entrants[np.argmax(fits[entrants])]]
            entrants = rng.integers(0, pop_size, size=ga_config.tournament_size)
            p2 = pop[entrants[np.argmax(fits[entrants])]]
            child = p1.copy()
            if length >= 2 and rng.random() < ga_config.crossover_prob:
                cut = int(rng.integers(1, length))
                child[cut:] = p2[cut:]
            mask = rng.random(length) < ga_config.mutation_prob
            if mask.any():
                child[mask] = rng.integers(0, n_levels, size=int(mask.sum()))
            _repair(child, levels, config.num_subbands, config.max_power)
            children.append(child)
        pop = np.stack(children)
        fits = evaluate(pop)

    power = levels[best_genes.reshape(config.num_cells, config.num_subbands)]
    return power, best_fit


class SearchSpaceTooLarge(RuntimeError):
    pass


def exhaustive(channel: ChannelRealization, topology: Topology,
               action_space: ActionSpace, alpha: float,
               cap: int = 10 ** 6):
    """Exact maximizer over all m^K joint discrete actions.

    Ties resolve to the lexicographically smallest joint action. Refuses
    spaces larger than `cap`.
    """
    m = action_space.size
    k = topology.num_cells
    total = m ** k
    if total > cap:
        raise SearchSpaceTooLarge(
            f"joint space {m}^{k} = {total} exceeds the {cap} cap")

    best_util = -math.inf
    best_power = None
    joint = np.zeros(k, dtype=int)
    while True:
        power = action_space.joint_power(joint)
        util = network_utility(power, channel, topology, alpha)
        if util > best_util:
            best_util = util
            best_power = power
        # odometer increment in lexicographic order
        pos = k - 1
        while pos >= 0:
            joint[pos] += 1
            if joint[pos] < m:
                break
            joint[pos] = 0
            pos -= 1
        if pos < 0:
            break
    return best_power, float(best_util)


@dataclass(frozen=True)
class WmmseResult:
    power: np.ndarray        # (K, F) W, continuous
    throughput: float        # bits/s at the returned power
    converged: bool
    iterations: int
    objective_history: tuple  # objective before iterating, then one entry per iteration


def wmmse(channel: ChannelRealization, topology: Topology, max_power: float,
          alpha: float, max_iters: int = 500, tol: float = 1e-10) -> WmmseResult:
    """Weighted-MMSE power control on the scalar per-subband channel.

    The subband-to-user map is frozen at the uniform-power assignment and
    the SNR gap is folded into the direct gains, so the objective is the
    network throughput at that fixed assignment. Per-BS budgets are enforced
    through a bisected multiplier. The objective never decreases across
    iterations; if the relative change fails to drop below `tol` within
    max_iters the best iterate is returned with converged=False.
    """
    num_cells = topology.num_cells
    num_subbands = channel.num_subbands
    noise = channel.noise_power
    bandwidth = channel.bandwidth_hz

    uniform = np.full((num_cells, num_subbands), max_power / num_subbands)
    assignment = assign_subbands(uniform, channel, topology, alpha)

    # gain2[j, l, f]: power gain from BS l to the user served on (j, f),
    # with the SNR gap folded into the direct (j == l) entries.
    gain2 = np.empty((num_cells, num_cells, num_subbands))
    for f in range(num_subbands):
        gain2[:, :, f] = channel.gain[assignment[:, f], :, f]
    diag = np.arange(num_cells)
    gain2[diag, diag, :] *= alpha
    direct = np.sqrt(gain2[diag, diag, :])                        # (K, F)

    def objective(v):
        received = gain2 * (v ** 2)[None, :, :]
        signal = received[diag, diag, :].copy()
        received[diag, diag, :] = 0.0
        sinr = signal / (noise + received.sum(axis=1))
        return float(bandwidth * np.log2(1.0 + sinr).sum())

    v = np.sqrt(uniform)
    best_v = v.copy()
    best_obj = objective(v)
    prev_obj = best_obj
    history = [best_obj]
    converged = False
    iterations = 0

    for iterations in range(1, max_iters + 1):
        power_rx = gain2 * (v ** 2)[None, :, :]
        mmse_rx = direct * v / (noise + power_rx.sum(axis=1))        # (K, F)
        weight = 1.0 / (1.0 - mmse_rx * direct * v)

        # v[k,f] = num / (den + mu_k), mu_k >= 0 bisected onto the budget
        num = weight * mmse_rx * direct
        den = np.einsum("jf,jkf->kf", weight * mmse_rx ** 2, gain2)
        for k in range(num_cells):
            v[k] = _budget_projected(num[k], den[k], max_power)

        obj = objective(v)
        history.append(obj)
        if obj > best_obj:
            best_obj = obj
            best_v = v.copy()
        if abs(obj - prev_obj) <= tol * max(1.0, abs(prev_obj)):
            converged = True
            break
        prev_obj = obj

    return WmmseResult(best_v ** 2, best_obj, converged, iterations, tuple(history))


def _budget_projected(num: np.ndarray, den: np.ndarray, max_power: float) -> np.ndarray:
    """Solve v_f = num_f / (den_f + mu) with the smallest mu >= 0 such that
    sum(v^2) <= max_power."""
    active = num > 0.0       # num > 0 implies den > 0; a zero stays a zero

    def v_at(mu):
        out = np.zeros_like(num)
        out[active] = num[active] / (den[active] + mu)
        return out

    if np.sum(v_at(0.0) ** 2) <= max_power:
        return v_at(0.0)
    lo, hi = 0.0, 1.0
    while np.sum(v_at(hi) ** 2) > max_power:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.sum(v_at(mid) ** 2) > max_power:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-13 * hi:
            break
    return v_at(hi)   # feasible side of the bracket


def max_power_baseline(config: ScenarioConfig, level: float = 12.8) -> np.ndarray:
    """Fixed per-subband power for every cell; rejects budget violations."""
    if level * config.num_subbands > config.max_power + BUDGET_TOL:
        raise ConfigError(
            f"{level} W on {config.num_subbands} subbands exceeds the "
            f"{config.max_power} W budget")
    return np.full((config.num_cells, config.num_subbands), float(level))


def random_power_baseline(action_space: ActionSpace, num_cells: int,
                          rng: np.random.Generator) -> np.ndarray:
    """Independently uniform feasible action per cell."""
    joint = rng.integers(0, action_space.size, size=num_cells)
    return action_space.joint_power(joint)
