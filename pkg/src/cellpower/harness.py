"""Experiment orchestration: presets, config files, train/test runs,
normalized-throughput reports and reproducible on-disk artifacts."""

import dataclasses
import hashlib
import json
import os
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import agent as agent_mod
from .agent import AgentConfig
from .baselines import GAConfig
from .env import PowerControlEnv, actions_to_csv
from .netmodel import ConfigError, ScenarioConfig
from .qnet import MLP, RMSprop, load_checkpoint, save_checkpoint
from .replay import ReplayBuffer

# The three evaluation presets differ only in cell count.
SCENARIO_CELLS = {"scenario1": 5, "scenario2": 10, "scenario3": 15}


def scenario_preset(name: str, **overrides) -> ScenarioConfig:
    if name in SCENARIO_CELLS:
        overrides.setdefault("num_cells", SCENARIO_CELLS[name])
    elif name != "custom":
        raise ConfigError(f"unknown scenario {name!r}; expected "
                          f"{sorted(SCENARIO_CELLS)} or 'custom'")
    return ScenarioConfig(**overrides)


@dataclass
class ExperimentSpec:
    scenario: str = "scenario1"
    config: ScenarioConfig = field(default_factory=ScenarioConfig)
    agent: AgentConfig = field(default_factory=AgentConfig)
    ga: GAConfig = field(default_factory=GAConfig)
    n_test_samples: int = 100
    master_seed: int = 0
    output_dir: str = "runs/experiment"
    max_power_level: float = 12.8
    terminal_reward: float = -1.0
    max_episode_steps: int = 500
    checkpoint: str | None = None    # resume/evaluate instead of fresh training
    checkpoint_interval: int | None = None   # env steps between periodic saves


SCENARIO_KEYS = {f.name for f in dataclasses.fields(ScenarioConfig)}
AGENT_KEYS = {f.name for f in dataclasses.fields(AgentConfig)}
SPEC_KEYS = {"scenario", "n_test_samples", "master_seed", "output_dir",
             "max_power_level", "terminal_reward", "max_episode_steps",
             "checkpoint", "checkpoint_interval"}


def parse_kv_file(path) -> dict:
    """Plain-text `key = value` lines; '#' starts a comment."""
    values = {}
    with open(path) as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
            key, _, val = line.partition("=")
            values[key.strip()] = val.strip()
    return values


def _coerce(value: str):
    if "," in value:
        return tuple(float(v) for v in value.split(","))
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    if value.lower() in ("true", "false"):
        return value.lower() == "true"
    if value.lower() in ("none", ""):
        return None
    return value


def spec_from_file(path, **cli_overrides) -> ExperimentSpec:
    """Build an ExperimentSpec from a key/value file plus CLI overrides.

    GA keys carry a `ga_` prefix; scenario/agent keys use their field names.
    """
    raw = parse_kv_file(path)
    raw.update({k: v for k, v in cli_overrides.items() if v is not None})
    scenario_kv, agent_kv, ga_kv, spec_kv = {}, {}, {}, {}
    for key, value in raw.items():
        coerced = _coerce(value) if isinstance(value, str) else value
        if key.startswith("ga_"):
            ga_kv[key[3:]] = coerced
        elif key in SCENARIO_KEYS:
            scenario_kv[key] = coerced
        elif key in AGENT_KEYS:
            agent_kv[key] = coerced
        elif key in SPEC_KEYS:
            spec_kv[key] = coerced
        else:
            raise ConfigError(f"unknown config key {key!r}")
    scenario = spec_kv.pop("scenario", "custom")
    return ExperimentSpec(scenario=scenario,
                          config=scenario_preset(scenario, **scenario_kv),
                          agent=AgentConfig(**agent_kv),
                          ga=GAConfig(**ga_kv),
                          **spec_kv)


def config_hash(spec: ExperimentSpec) -> str:
    parts = []
    for prefix, cfg in (("scenario", spec.config), ("agent", spec.agent),
                        ("ga", spec.ga)):
        for f in dataclasses.fields(cfg):
            parts.append(f"{prefix}.{f.name}={getattr(cfg, f.name)!r}")
    for name in sorted(SPEC_KEYS - {"output_dir", "checkpoint"}):
        parts.append(f"{name}={getattr(spec, name)!r}")
    return hashlib.sha256("\n".join(sorted(parts)).encode()).hexdigest()


@dataclass
class ComparisonReport:
    """Per-sample throughputs normalized by the GA solution on the same channel."""

    per_sample: dict                 # method -> list of ratios
    mean: dict                       # method -> mean ratio
    excluded: int                    # records dropped for non-positive GA throughput
    metadata: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)


METHODS = ("dql", "ga", "wmmse", "maxpower", "random")


def normalized_throughput(records: list) -> ComparisonReport:
    if not records:
        raise ValueError("no test records")
    per_sample = {m: [] for m in METHODS}
    excluded = 0
    for rec in records:
        if rec.ga_throughput <= 0.0:
            warnings.warn(f"record with channel seed {rec.channel_seed} has "
                          "non-positive GA throughput; excluded")
            excluded += 1
            continue
        ga = rec.ga_throughput
        per_sample["dql"].append(rec.dql_throughput / ga)
        per_sample["ga"].append(1.0)
        per_sample["wmmse"].append(rec.wmmse_throughput / ga)
        per_sample["maxpower"].append(rec.maxpower_throughput / ga)
        per_sample["random"].append(rec.random_throughput / ga)
    mean = {m: float(np.mean(v)) if v else float("nan")
            for m, v in per_sample.items()}
    return ComparisonReport(per_sample, mean, excluded)


def _write_text(path, text: str) -> None:
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def training_log_csv(episodes: list) -> str:
    rows = ["step,episode,epsilon,loss,length,throughput_bps"]
    for e in episodes:
        rows.append(f"{e.step},{e.episode},{repr(e.epsilon)},{repr(e.loss)},"
                    f"{e.length},{repr(e.throughput)}")
    return "\n".join(rows) + "\n"


def results_csv(records: list) -> str:
    rows = ["sample,channel_seed,dql_action,dql_bps,ga_bps,wmmse_bps,"
            "maxpower_bps,random_bps,dql_norm,wmmse_norm,maxpower_norm,random_norm"]
    for i, r in enumerate(records):
        ga = r.ga_throughput
        norm = [v / ga if ga > 0 else float("nan")
                for v in (r.dql_throughput, r.wmmse_throughput,
                          r.maxpower_throughput, r.random_throughput)]
        action = "|".join(str(a) for a in r.dql_action)
        vals = [repr(v) for v in (r.dql_throughput, ga, r.wmmse_throughput,
                                  r.maxpower_throughput, r.random_throughput)]
        rows.append(f"{i},{r.channel_seed},{action}," + ",".join(vals) + ","
                    + ",".join(repr(v) for v in norm))
    return "\n".join(rows) + "\n"


def load_network(path, expected_sizes=None) -> tuple[MLP, RMSprop]:
    mlp, opt = load_checkpoint(path)
    if expected_sizes is not None and tuple(mlp.layer_sizes) != tuple(expected_sizes):
        raise ConfigError(
            f"checkpoint layer sizes {mlp.layer_sizes} do not match the "
            f"requested scenario {tuple(expected_sizes)}")
    return mlp, opt


def build_env(spec: ExperimentSpec) -> PowerControlEnv:
    return PowerControlEnv(spec.config, terminal_reward=spec.terminal_reward,
                           max_episode_steps=spec.max_episode_steps)


def network_sizes(spec: ExperimentSpec, env: PowerControlEnv) -> tuple[int, int, int]:
    hidden = spec.agent.hidden_size or 2 * env.num_actions
    return (env.state_size, hidden, env.num_actions)


def run_experiment(spec: ExperimentSpec) -> ComparisonReport:
    """Train (or load), evaluate against all baselines on shared channels,
    and write training_log.csv / results.csv / report.json / checkpoint.

    Fully reproducible: all randomness derives from spec.master_seed.
    """
    t0 = time.time()
    os.makedirs(spec.output_dir, exist_ok=True)
    env = build_env(spec)
    sizes = network_sizes(spec, env)

    episodes = []
    grad_steps = 0
    if spec.checkpoint:
        mlp, opt = load_network(spec.checkpoint, sizes)
    else:
        mlp = MLP.init(sizes, np.random.default_rng([spec.master_seed, 10]))
        opt = RMSprop(mlp, spec.agent.learning_rate, spec.agent.rmsprop_decay,
                      spec.agent.rmsprop_epsilon)
        if spec.agent.train_steps > 0:
            buffer = ReplayBuffer(spec.agent.replay_capacity)
            on_step = None
            if spec.checkpoint_interval:
                def on_step(step, gs, net, target, _opt=opt):
                    if step % spec.checkpoint_interval == 0:
                        save_checkpoint(os.path.join(
                            spec.output_dir, f"qnet_step{step}.ckpt"), net, _opt)
            result = agent_mod.train(env, mlp, buffer, spec.agent,
                                     np.random.default_rng([spec.master_seed, 11]),
                                     opt=opt, on_step=on_step)
            episodes = result.episodes
            grad_steps = result.gradient_steps
            _write_text(os.path.join(spec.output_dir, "training_log.csv"),
                        training_log_csv(episodes))

    test_seed = int(np.random.default_rng([spec.master_seed, 12]
                                          ).integers(0, 2 ** 63 - 1))
    if spec.n_test_samples > 0:
        records = agent_mod.test(env, mlp, spec.n_test_samples, test_seed,
                                 ga_config=spec.ga,
                                 max_power_level=spec.max_power_level)
        report = normalized_throughput(records)
    else:
        records = []
        report = ComparisonReport({m: [] for m in METHODS},
                                  {m: float("nan") for m in METHODS}, 0)
    report.metadata = {
        "scenario": spec.scenario,
        "master_seed": spec.master_seed,
        "test_seed": test_seed,
        "config_hash": config_hash(spec),
        "state_size": sizes[0],
        "hidden_size": sizes[1],
        "num_actions": sizes[2],
        "actions_per_cell": env.actions.size,
        "n_test_samples": spec.n_test_samples,
        "train_steps": 0 if spec.checkpoint else spec.agent.train_steps,
        "gradient_steps": grad_steps,
        "episodes": len(episodes),
        "wall_time_s": round(time.time() - t0, 3),
    }

    _write_text(os.path.join(spec.output_dir, "results.csv"), results_csv(records))
    _write_text(os.path.join(spec.output_dir, "report.json"), report.to_json())
    save_checkpoint(os.path.join(spec.output_dir, "qnet.ckpt"), mlp, opt)
    _write_text(os.path.join(spec.output_dir, "actions.csv"),
                actions_to_csv(env.actions))
    return report
