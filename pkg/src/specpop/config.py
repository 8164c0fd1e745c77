"""Run configuration: strict JSON parsing, factories, and initial parameters.

Every section rejects keys it does not know, naming the key and the section,
so typos fail loudly instead of silently training with defaults.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import CharacterSpec, SkillSpec
from .envs.duel import RewardWeights
from .envs.factory import DuelFactory, MatrixFactory
from .envs.matrix import MatrixGameSpec, named_game
from .envs.roster import default_roster
from .objectives import ObjectiveConfig
from .policy import PolicyParams, init_mlp, init_tabular
from .runtime import rng_stream


class ConfigError(ValueError):
    """Malformed configuration; the message names the offending key."""


def _take(section: dict, name: str, allowed: dict):
    """Pop known keys with defaults; reject anything unexpected."""
    if not isinstance(section, dict):
        raise ConfigError(f"section '{name}' must be an object")
    extra = set(section) - set(allowed)
    if extra:
        key = sorted(extra)[0]
        raise ConfigError(f"unknown key '{key}' in section '{name}'")
    return {k: section.get(k, default) for k, default in allowed.items()}


@dataclass(frozen=True)
class PolicyConfig:
    kind: str = "tabular_softmax"
    hidden: int = 32

    def __post_init__(self) -> None:
        if self.kind not in ("tabular_softmax", "mlp"):
            raise ConfigError(f"unknown key value '{self.kind}' in section 'policy'")
        if self.hidden < 1:
            raise ConfigError("'hidden' in section 'policy' must be >= 1")


@dataclass(frozen=True)
class EnvConfig:
    type: str = "matrix"
    game: str | None = "biased_rps"
    payoff: tuple | None = None
    arena_length: int = 11
    tick_limit: int = 60
    roster: str | tuple = "default"
    reward_weights: RewardWeights = field(default_factory=RewardWeights)

    def __post_init__(self) -> None:
        if self.type not in ("matrix", "duel"):
            raise ConfigError(f"unknown key value '{self.type}' in section 'env'")
        if self.type == "matrix" and self.game is None and self.payoff is None:
            raise ConfigError("matrix env needs 'game' or 'payoff' in section 'env'")


@dataclass(frozen=True)
class Stage2Config:
    sweeps: int = 10
    episodes_per_sweep: int = 64
    eval_games: int | None = None
    include_specialist_pool: bool = True
    diag_episodes: int = 8
    learning_rate: float | None = None
    ppo_epochs: int | None = None

    def __post_init__(self) -> None:
        if self.sweeps < 1 or self.episodes_per_sweep < 1:
            raise ConfigError("stage2 sweeps and episodes_per_sweep must be >= 1")


@dataclass(frozen=True)
class RunConfig:
    """Everything a training or evaluation run needs, JSON round-trippable."""

    env: EnvConfig = field(default_factory=EnvConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    objective: ObjectiveConfig = field(default_factory=ObjectiveConfig)
    stage2: Stage2Config = field(default_factory=Stage2Config)
    population_size: int = 2
    generations: int = 10
    episodes_per_generation: int = 64
    ppo_epochs: int = 4
    update_mode: str = "ppo"
    solver_exponent: float = 1.0
    # Harmonic schedule: generation tau trains at lr / (1 + lr_decay * tau).
    # 0 keeps the rate constant.
    lr_decay: float = 0.0
    eval_games: int | None = None
    diag_episodes: int = 8
    convergence_threshold: float = 0.076
    convergence_patience: int = 2
    master_seed: int = 0

    def __post_init__(self) -> None:
        if self.population_size < 2:
            raise ConfigError("'population_size' must be >= 2")
        if self.generations < 1:
            raise ConfigError("'generations' must be >= 1")
        if self.episodes_per_generation < 1:
            raise ConfigError("'episodes_per_generation' must be >= 1")
        if self.ppo_epochs < 1:
            raise ConfigError("'ppo_epochs' must be >= 1")
        if self.update_mode not in ("ppo", "augmented"):
            raise ConfigError(f"unknown key value '{self.update_mode}' for 'update_mode'")
        if self.solver_exponent < 0.0:
            raise ConfigError("'solver_exponent' must be >= 0")
        if self.lr_decay < 0.0:
            raise ConfigError("'lr_decay' must be >= 0")
        if not (0.0 <= self.convergence_threshold < 0.5):
            raise ConfigError("'convergence_threshold' must lie in [0, 0.5)")
        if self.convergence_patience < 1:
            raise ConfigError("'convergence_patience' must be >= 1")
        if self.master_seed < 0:
            raise ConfigError("'master_seed' must be a nonnegative integer")
        if self.env.type == "duel" and self.policy.kind == "tabular_softmax":
            raise ConfigError("duel states are not enumerable; "
                              "section 'policy' needs kind 'mlp'")

    def eval_games_for(self, factory) -> int:
        if self.eval_games is not None:
            return self.eval_games
        return 200 if factory.kind == "matrix" else 50

    def stage2_eval_games_for(self, factory) -> int:
        if self.stage2.eval_games is not None:
            return self.stage2.eval_games
        return self.eval_games_for(factory)

    def to_dict(self) -> dict:
        out = {
            "env": {
                "type": self.env.type,
                "game": self.env.game,
                "payoff": _payoff_to_json(self.env.payoff),
                "arena_length": self.env.arena_length,
                "tick_limit": self.env.tick_limit,
                "roster": _roster_to_json(self.env.roster),
                "reward_weights": dataclasses.asdict(self.env.reward_weights),
            },
            "policy": dataclasses.asdict(self.policy),
            "objective": dataclasses.asdict(self.objective),
            "stage2": dataclasses.asdict(self.stage2),
        }
        for name in _TOP_SCALARS:
            out[name] = getattr(self, name)
        return out


_TOP_SCALARS = (
    "population_size", "generations", "episodes_per_generation", "ppo_epochs",
    "update_mode", "solver_exponent", "lr_decay", "eval_games", "diag_episodes",
    "convergence_threshold", "convergence_patience", "master_seed",
)


def _payoff_to_json(payoff):
    if payoff is None:
        return None
    return [list(row) for row in payoff]


def _roster_to_json(roster):
    if isinstance(roster, str):
        return roster
    return [
        {**dataclasses.asdict(char), "skills": [dataclasses.asdict(s) for s in char.skills]}
        for char in roster
    ]


def _parse_skill(data: dict, where: str) -> SkillSpec:
    got = _take(data, where, {
        "category": None, "cooldown": 0, "damage": 0, "range": 0,
        "mana_cost": 0, "effect_duration": 0,
    })
    if got["category"] is None:
        raise ConfigError(f"missing key 'category' in section '{where}'")
    return SkillSpec(**got)


def _parse_character(data: dict, index: int) -> CharacterSpec:
    where = f"env.roster[{index}]"
    got = _take(data, where, {
        "name": f"char_{index}", "move_speed": 1, "attack_range": 1,
        "attack_damage": 0, "max_hp": 100, "max_mana": 10, "skills": [],
    })
    skills = tuple(
        _parse_skill(s, f"{where}.skills[{i}]") for i, s in enumerate(got.pop("skills"))
    )
    return CharacterSpec(skills=skills, **got)


def _parse_env(section: dict) -> EnvConfig:
    got = _take(section, "env", {
        "type": "matrix",
        "game": None,
        "payoff": None,
        "arena_length": 11,
        "tick_limit": 60,
        "roster": "default",
        "reward_weights": None,
    })
    if got["type"] == "matrix" and got["game"] is None and got["payoff"] is None:
        got["game"] = "biased_rps"
    if got["payoff"] is not None:
        got["payoff"] = tuple(tuple(float(x) for x in row) for row in got["payoff"])
    roster = got["roster"]
    if not isinstance(roster, str):
        roster = tuple(_parse_character(c, i) for i, c in enumerate(roster))
    weights = got["reward_weights"]
    if weights is None:
        weights = RewardWeights()
    else:
        weights = RewardWeights(**_take(weights, "env.reward_weights", {
            "own_hp": 10.0, "opp_hp": 10.0, "result": 10.0, "combo": 5.0, "mana": 5.0,
        }))
    return EnvConfig(type=got["type"], game=got["game"], payoff=got["payoff"],
                     arena_length=got["arena_length"], tick_limit=got["tick_limit"],
                     roster=roster, reward_weights=weights)


def config_from_dict(data: dict) -> RunConfig:
    defaults = RunConfig()
    top_allowed = {"env": None, "policy": None, "objective": None, "stage2": None}
    top_allowed.update({name: getattr(defaults, name) for name in _TOP_SCALARS})
    got = _take(data, "run", top_allowed)
    env = _parse_env(got.pop("env") or {})
    policy = PolicyConfig(**_take(got.pop("policy") or {}, "policy",
                                  {"kind": "tabular_softmax", "hidden": 32}))
    obj_defaults = {f.name: getattr(ObjectiveConfig(), f.name)
                    for f in dataclasses.fields(ObjectiveConfig)}
    try:
        objective = ObjectiveConfig(**_take(got.pop("objective") or {}, "objective",
                                            obj_defaults))
    except ValueError as err:
        raise ConfigError(f"section 'objective': {err}") from err
    s2_defaults = {f.name: getattr(Stage2Config(), f.name)
                   for f in dataclasses.fields(Stage2Config)}
    stage2 = Stage2Config(**_take(got.pop("stage2") or {}, "stage2", s2_defaults))
    return RunConfig(env=env, policy=policy, objective=objective, stage2=stage2, **got)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"config file {path} is not valid JSON: {err}") from err
    if not isinstance(data, dict):
        raise ConfigError(f"config file {path} must hold a JSON object")
    return config_from_dict(data)


def save_config(cfg: RunConfig, path: str | Path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def config_hash(cfg: RunConfig) -> str:
    """Digest of the canonical JSON form; ties checkpoints to their run setup."""
    blob = json.dumps(cfg.to_dict(), sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def build_factory(cfg: RunConfig):
    env = cfg.env
    if env.type == "matrix":
        if env.payoff is not None:
            spec = MatrixGameSpec(np.array(env.payoff, dtype=np.float64))
        else:
            spec = named_game(env.game)
        return MatrixFactory(spec)
    roster = default_roster() if isinstance(env.roster, str) else env.roster
    return DuelFactory(roster, arena_length=env.arena_length,
                       tick_limit=env.tick_limit, weights=env.reward_weights)


def initial_params(cfg: RunConfig, factory) -> PolicyParams:
    """Fresh shared-policy parameters sized for the factory's action space."""
    if cfg.policy.kind == "tabular_softmax":
        return init_tabular(factory.n_states, cfg.population_size, factory.n_actions)
    return init_mlp(factory.obs_dim, cfg.population_size, factory.n_actions,
                    cfg.policy.hidden, rng_stream(cfg.master_seed, "init"))
