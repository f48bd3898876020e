"""Shared builders and independent oracles for the test suite."""

import math

import numpy as np
import pytest

from cellpower.netmodel import (
    ChannelRealization,
    ScenarioConfig,
    Topology,
    build_topology,
    draw_channel,
    snr_gap,
)


def tiny_config(**overrides) -> ScenarioConfig:
    defaults = dict(num_cells=2, users_per_cell=3, num_subbands=2,
                    power_levels=(6.4, 12.8, 19.2), max_power=40.0)
    defaults.update(overrides)
    return ScenarioConfig(**defaults)


def tiny_instance(seed=0, **overrides):
    cfg = tiny_config(**overrides)
    rng = np.random.default_rng(seed)
    topo = build_topology(cfg, rng)
    channel = draw_channel(topo, cfg, rng)
    return cfg, topo, channel, snr_gap(cfg.target_ber)


def reference_sinr(power, channel, user, cell, subband):
    """Textbook SINR, written out independently of the library internals."""
    signal = power[cell][subband] * channel.gain[user][cell][subband]
    interference = sum(power[l][subband] * channel.gain[user][l][subband]
                       for l in range(channel.gain.shape[1]) if l != cell)
    return signal / (channel.noise_power + interference)


def reference_utility(power, channel, topo, alpha, log=math.log2):
    """Brute-force objective: per (cell, subband), the best user's rate."""
    total = 0.0
    for k in range(topo.num_cells):
        for f in range(channel.num_subbands):
            best = max(
                channel.bandwidth_hz
                * log(1.0 + alpha * reference_sinr(power, channel, u, k, f))
                for u in topo.cell_users(k))
            total += best
    return total


def synthetic_channel(gain, noise_power=1.0, bandwidth_hz=1.0) -> ChannelRealization:
    return ChannelRealization(np.asarray(gain, dtype=float), noise_power,
                              bandwidth_hz)


def synthetic_topology(num_cells, users_per_cell, serving_distance,
                       cell_radius=500.0) -> Topology:
    """Topology with prescribed serving distances; positions are placeholders."""
    n = num_cells * users_per_cell
    association = np.repeat(np.arange(num_cells), users_per_cell)
    dist = np.full((n, num_cells), cell_radius, dtype=float)
    dist[np.arange(n), association] = np.asarray(serving_distance, dtype=float)
    return Topology(np.zeros((num_cells, 2)), np.zeros((n, 2)), association,
                    dist, cell_radius)


def selected_unit_loss(mlp, states, actions, targets, block_size):
    """The training loss recomputed from scratch: mean squared error over the
    K selected output units of each sample."""
    q = mlp.forward(states)
    n, num_cells = actions.shape
    total = 0.0
    for i in range(n):
        for k in range(num_cells):
            total += (q[i, k * block_size + actions[i, k]] - targets[i, k]) ** 2
    return total / (n * num_cells)


def finite_difference_max_error(mlp, states, actions, targets, block_size,
                                h=1e-5):
    """Max relative error of backprop gradients vs central differences."""
    from cellpower.qnet import backprop

    q = mlp.forward(states)
    n, num_cells = actions.shape
    rows = np.repeat(np.arange(n), num_cells)
    cols = (actions + np.arange(num_cells) * block_size).reshape(-1)
    diff = q[rows, cols].reshape(n, num_cells) - targets
    grad_q = np.zeros_like(q)
    np.add.at(grad_q, (rows, cols), (2.0 * diff / diff.size).reshape(-1))
    grads = backprop(mlp, states, grad_q)

    worst = 0.0
    for param, grad in zip(mlp.parameters(), grads):
        it = np.nditer(param, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            orig = param[idx]
            param[idx] = orig + h
            up = selected_unit_loss(mlp, states, actions, targets, block_size)
            param[idx] = orig - h
            down = selected_unit_loss(mlp, states, actions, targets, block_size)
            param[idx] = orig
            fd = (up - down) / (2.0 * h)
            err = abs(fd - grad[idx]) / max(abs(fd), abs(grad[idx]), 1e-8)
            worst = max(worst, err)
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
