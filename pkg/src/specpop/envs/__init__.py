"""Desk-scale zero-sum environments: one-shot matrix games and tick duels."""

from .base import Outcome
from .duel import (
    ADVANCE,
    ATTACK,
    COMBO_CAP,
    MANA_REGEN,
    NOOP,
    RETREAT,
    SKILL_OFFSET,
    DuelConfig,
    DuelState,
    FighterState,
    RewardWeights,
    action_category,
    action_mask,
    duel_reset,
    duel_step,
    mirror_state,
    observe,
    outcome,
    shaped_reward,
    state_bucket,
)
from .factory import DUEL_CATEGORIES, DuelFactory, DuelMatch, MatrixFactory
from .matrix import (
    MatrixGameSpec,
    MatrixMatch,
    biased_rock_paper_scissors,
    matching_pennies,
    matrix_play,
    named_game,
    rock_paper_scissors,
    seat_mask,
)
from .roster import default_roster

__all__ = [
    "Outcome",
    "MatrixGameSpec",
    "MatrixMatch",
    "MatrixFactory",
    "DuelFactory",
    "DuelMatch",
    "DuelConfig",
    "DuelState",
    "FighterState",
    "RewardWeights",
    "DUEL_CATEGORIES",
    "matrix_play",
    "named_game",
    "matching_pennies",
    "rock_paper_scissors",
    "biased_rock_paper_scissors",
    "seat_mask",
    "default_roster",
    "duel_reset",
    "duel_step",
    "action_mask",
    "action_category",
    "shaped_reward",
    "outcome",
    "observe",
    "mirror_state",
    "state_bucket",
    "NOOP",
    "ADVANCE",
    "RETREAT",
    "ATTACK",
    "SKILL_OFFSET",
    "COMBO_CAP",
    "MANA_REGEN",
]
