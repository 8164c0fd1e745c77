"""Core value types and return arithmetic shared by environments and learners.

Everything here is plain immutable data so instances can be handed to worker
processes or cached inside generation stores without defensive copies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

__all__ = [
    "SKILL_CATEGORIES",
    "AgentId",
    "SkillSpec",
    "CharacterSpec",
    "Transition",
    "TrajectoryBatch",
    "zero_sum_reward",
    "discounted_return",
    "n_step_return",
]

AgentId = int

SKILL_CATEGORIES = ("forcing_move", "counter_move", "substitute")


@dataclass(frozen=True, slots=True)
class SkillSpec:
    """One usable skill: its category plus the gating and effect numbers.

    ``forcing_move`` closes distance and deals damage, ``counter_move``
    punishes an opponent's forcing move played the same tick, and
    ``substitute`` grants temporary invincibility instead of damage.
    """

    category: str
    cooldown: int
    damage: int
    range: int
    mana_cost: int
    effect_duration: int = 0

    def __post_init__(self) -> None:
        if self.category not in SKILL_CATEGORIES:
            raise ValueError(f"unknown skill category {self.category!r}")
        for name in ("cooldown", "damage", "range", "mana_cost", "effect_duration"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.category == "substitute":
            if self.damage != 0:
                raise ValueError("substitute skills deal no damage")
            if self.effect_duration < 1:
                raise ValueError("substitute skills need effect_duration >= 1")


@dataclass(frozen=True, slots=True)
class CharacterSpec:
    """A duel fighter archetype. Characters are heterogeneous by design."""

    name: str
    move_speed: int
    attack_range: int
    attack_damage: int
    max_hp: int
    max_mana: int
    skills: tuple[SkillSpec, ...]

    def __post_init__(self) -> None:
        if self.move_speed < 1:
            raise ValueError("move_speed must be >= 1")
        if self.attack_range < 1:
            raise ValueError("attack_range must be >= 1")
        if self.attack_damage < 0:
            raise ValueError("attack_damage must be >= 0")
        if self.max_hp <= 0 or self.max_mana <= 0:
            raise ValueError("max_hp and max_mana must be positive")
        object.__setattr__(self, "skills", tuple(self.skills))
        present = {skill.category for skill in self.skills}
        missing = [c for c in SKILL_CATEGORIES if c not in present]
        if missing:
            raise ValueError(f"character {self.name!r} lacks categories {missing}")

    @property
    def n_skills(self) -> int:
        return len(self.skills)


@dataclass(frozen=True, slots=True, eq=False)
class Transition:
    """A single step from the acting agent's perspective.

    ``reward`` is already the zero-sum difference signal. ``bucket`` is the
    coarse state-bucket index assigned at collection time; -1 when unset.
    """

    state: np.ndarray
    action_self: int
    action_opp: int
    reward: float
    next_state: np.ndarray
    done: bool
    mask_self: np.ndarray
    log_prob_self: float
    id_self: AgentId
    id_opp: AgentId
    bucket: int = -1

    def __post_init__(self) -> None:
        if not math.isfinite(self.reward):
            raise ValueError("non-finite reward")
        if self.log_prob_self > 0.0:
            raise ValueError("log_prob_self must be <= 0")
        if not self.mask_self[self.action_self]:
            raise ValueError("action_self is masked out")


class TrajectoryBatch:
    """Transitions for one learning agent, with explicit episode boundaries.

    ``episode_starts`` holds the start index of every episode; episodes are
    contiguous, ordered, and non-empty. ``collected_vs`` tags the opponent
    provenance (for instance "frozen_mia") for diagnostics that require it.
    """

    def __init__(
        self,
        transitions: Sequence[Transition],
        agent: AgentId,
        episode_starts: Sequence[int],
        collected_vs: str = "",
    ) -> None:
        self.transitions = list(transitions)
        self.agent = int(agent)
        self.episode_starts = list(episode_starts)
        self.collected_vs = collected_vs
        self._arrays: dict[str, np.ndarray] | None = None
        n = len(self.transitions)
        if n == 0:
            raise ValueError("empty batch")
        if not self.episode_starts or self.episode_starts[0] != 0:
            raise ValueError("episode_starts must begin at 0")
        for a, b in zip(self.episode_starts, self.episode_starts[1:]):
            if b <= a:
                raise ValueError("episode_starts must be strictly increasing")
        if self.episode_starts[-1] >= n:
            raise ValueError("episode start beyond batch end")

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def n_episodes(self) -> int:
        return len(self.episode_starts)

    def episode_slices(self) -> Iterator[slice]:
        bounds = self.episode_starts + [len(self.transitions)]
        for a, b in zip(bounds, bounds[1:]):
            yield slice(a, b)

    def as_arrays(self) -> dict[str, np.ndarray]:
        """Dense views of the batch; computed once and cached."""
        if self._arrays is None:
            ts = self.transitions
            self._arrays = {
                "states": np.stack([t.state for t in ts]).astype(np.float64),
                "next_states": np.stack([t.next_state for t in ts]).astype(np.float64),
                "actions": np.array([t.action_self for t in ts], dtype=np.int64),
                "actions_opp": np.array([t.action_opp for t in ts], dtype=np.int64),
                "rewards": np.array([t.reward for t in ts], dtype=np.float64),
                "dones": np.array([t.done for t in ts], dtype=bool),
                "masks": np.stack([t.mask_self for t in ts]).astype(bool),
                "log_probs": np.array([t.log_prob_self for t in ts], dtype=np.float64),
                "ids": np.array([t.id_self for t in ts], dtype=np.int64),
                "ids_opp": np.array([t.id_opp for t in ts], dtype=np.int64),
                "buckets": np.array([t.bucket for t in ts], dtype=np.int64),
            }
        return self._arrays


def zero_sum_reward(payoff_self: float, payoff_opp: float) -> float:
    """Difference reward: own payoff minus the opponent's."""
    if not (math.isfinite(payoff_self) and math.isfinite(payoff_opp)):
        raise ValueError("non-finite payoff")
    return float(payoff_self) - float(payoff_opp)


def _check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not (0.0 <= gamma < 1.0):
        raise ValueError("gamma must lie in [0, 1)")
    return gamma


def discounted_return(rewards: Sequence[float], gamma: float) -> float:
    """Sum of gamma^t * r_t over the whole reward sequence."""
    gamma = _check_gamma(gamma)
    acc = 0.0
    for r in reversed(list(rewards)):
        r = float(r)
        if not math.isfinite(r):
            raise ValueError("non-finite reward")
        acc = r + gamma * acc
    return acc


def n_step_return(rewards: Sequence[float], gamma: float, bootstrap_value: float) -> float:
    """n-step return: discounted rewards plus gamma^n times the bootstrap value."""
    rewards = list(rewards)
    if not rewards:
        raise ValueError("n_step_return needs at least one reward")
    gamma = _check_gamma(gamma)
    if not math.isfinite(bootstrap_value):
        raise ValueError("non-finite bootstrap value")
    acc = float(bootstrap_value)
    for r in reversed(rewards):
        r = float(r)
        if not math.isfinite(r):
            raise ValueError("non-finite reward")
        acc = r + gamma * acc
    return acc
