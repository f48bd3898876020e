"""Deep Q-learning downlink power allocation for multi-cell networks."""

from .netmodel import (
    ChannelRealization,
    ConfigError,
    ScenarioConfig,
    Topology,
    assign_subbands,
    build_topology,
    cqi_quantize,
    draw_channel,
    location_indicator,
    network_utility,
    sinr,
    snr_gap,
)
from .env import ActionSpace, PowerControlEnv, Transition, enumerate_actions
from .qnet import MLP, RMSprop, load_checkpoint, save_checkpoint, train_batch
from .replay import ReplayBuffer
from .agent import AgentConfig, TestRecord, select_joint_action, test, train
from .baselines import (
    GAConfig,
    WmmseResult,
    exhaustive,
    ga_optimize,
    max_power_baseline,
    random_power_baseline,
    wmmse,
)
from .harness import ComparisonReport, ExperimentSpec, normalized_throughput, run_experiment

__version__ = "0.1.0"
