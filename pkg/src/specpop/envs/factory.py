"""Factories that map population member ids onto playable matchups.

A factory answers three questions for the training and evaluation loops:
which pairs of members can face each other, how a match between two members
is built, and how executed actions group into reporting categories.
"""

from __future__ import annotations

import numpy as np

from ..core import CharacterSpec
from . import duel as duel_mod
from .base import Outcome
from .duel import DuelConfig, DuelState, RewardWeights
from .matrix import MatrixGameSpec, MatrixMatch

__all__ = ["MatrixFactory", "DuelFactory", "DuelMatch"]

DUEL_CATEGORIES = (
    "forcing_move",
    "counter_move",
    "substitute",
    "basic_attack",
    "movement",
    "noop",
)


class MatrixFactory:
    """Members alternate seats by parity: even ids play rows, odd ids columns."""

    kind = "matrix"

    def __init__(self, spec: MatrixGameSpec):
        self.spec = spec
        self.n_actions = max(spec.n_actions_row, spec.n_actions_col)
        self.obs_dim = 1
        self.n_states = 1
        # Frequency reporting degrades to one category per action index.
        self.category_names = tuple(f"action_{a}" for a in range(self.n_actions))

    def seat(self, member: int) -> int:
        return member % 2

    def compatible(self, member_a: int, member_b: int) -> bool:
        return self.seat(member_a) != self.seat(member_b)

    def compatible_pairs(self, n_members: int) -> list[tuple[int, int]]:
        return [
            (a, b)
            for a in range(n_members)
            for b in range(n_members)
            if a != b and self.compatible(a, b)
        ]

    def make_match(self, member_a: int, member_b: int) -> MatrixMatch:
        if not self.compatible(member_a, member_b):
            raise ValueError(f"members {member_a} and {member_b} share a seat parity")
        row_side = 0 if self.seat(member_a) == 0 else 1
        return MatrixMatch(self.spec, (member_a, member_b), row_side, self.n_actions)

    def action_category(self, action: int, member: int) -> int:
        return action


class DuelMatch:
    """Match interface over the duel simulator for two roster members."""

    def __init__(self, config: DuelConfig, ids: tuple[int, int], n_actions: int):
        self.config = config
        self.ids = ids
        self.n_actions = n_actions

    def reset(self, rng: np.random.Generator | None = None) -> DuelState:
        return duel_mod.duel_reset(self.config)

    def obs(self, state: DuelState, side: int) -> np.ndarray:
        return duel_mod.observe(state, self.config, side)

    def mask(self, state: DuelState, side: int) -> np.ndarray:
        return duel_mod.action_mask(state, self.config, side, self.n_actions)

    def step(
        self, state: DuelState, action_0: int, action_1: int
    ) -> tuple[DuelState, tuple[float, float], bool]:
        return duel_mod.duel_step(state, self.config, action_0, action_1)

    def outcome(self, state: DuelState) -> Outcome:
        return duel_mod.outcome(state, self.config)

    def bucket(self, state: DuelState, side: int, n_buckets: int) -> int:
        return duel_mod.state_bucket(state, self.config, side, n_buckets)


class DuelFactory:
    """Members map onto the roster round-robin; every pairing is playable."""

    kind = "duel"

    def __init__(
        self,
        roster: tuple[CharacterSpec, ...],
        arena_length: int = 11,
        tick_limit: int = 60,
        weights: RewardWeights = RewardWeights(),
    ):
        if not roster:
            raise ValueError("empty roster")
        self.roster = tuple(roster)
        self.arena_length = arena_length
        self.tick_limit = tick_limit
        self.weights = weights
        self.skill_slots = max(char.n_skills for char in roster)
        self.n_actions = duel_mod.SKILL_OFFSET + self.skill_slots
        self.obs_dim = duel_mod.obs_dim(self.skill_slots)
        self.n_states = 0  # not enumerable; tabular policies do not apply
        self.category_names = DUEL_CATEGORIES

    def character(self, member: int) -> CharacterSpec:
        return self.roster[member % len(self.roster)]

    def compatible(self, member_a: int, member_b: int) -> bool:
        return True

    def compatible_pairs(self, n_members: int) -> list[tuple[int, int]]:
        return [(a, b) for a in range(n_members) for b in range(n_members) if a != b]

    def make_match(self, member_a: int, member_b: int) -> DuelMatch:
        config = DuelConfig(
            char_i=self.character(member_a),
            char_ii=self.character(member_b),
            arena_length=self.arena_length,
            tick_limit=self.tick_limit,
            weights=self.weights,
            skill_slots=self.skill_slots,
        )
        return DuelMatch(config, (member_a, member_b), self.n_actions)

    def action_category(self, action: int, member: int) -> int:
        label = duel_mod.action_category(action, self.character(member))
        return DUEL_CATEGORIES.index(label)
