"""A 1-D skirmish duel resolved in simultaneous ticks.

Two fighters share a short line of cells. Each tick both pick one action:
no-op, advance, retreat, basic attack, or one of their character's skills.
Resolution order within a tick is fixed: substitutes, then counter moves,
then forcing moves, then basic attacks, then movement. Damage against a
fighter whose invincibility window covers the current tick is nullified.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..core import CharacterSpec, SkillSpec
from .base import Outcome

__all__ = [
    "NOOP",
    "ADVANCE",
    "RETREAT",
    "ATTACK",
    "SKILL_OFFSET",
    "COMBO_CAP",
    "MANA_REGEN",
    "RewardWeights",
    "DuelConfig",
    "FighterState",
    "DuelState",
    "duel_reset",
    "duel_step",
    "action_mask",
    "shaped_reward",
    "outcome",
    "observe",
    "obs_dim",
    "n_actions_for",
    "action_category",
    "mirror_state",
    "state_bucket",
]

NOOP = 0
ADVANCE = 1
RETREAT = 2
ATTACK = 3
SKILL_OFFSET = 4

COMBO_CAP = 10
MANA_REGEN = 1
# Scale for the invincibility-remaining observation feature.
_INVINCIBLE_OBS_TICKS = 5


@dataclass(frozen=True, slots=True)
class RewardWeights:
    own_hp: float = 10.0
    opp_hp: float = 10.0
    result: float = 10.0
    combo: float = 5.0
    mana: float = 5.0

    def __post_init__(self) -> None:
        for name in ("own_hp", "opp_hp", "result", "combo", "mana"):
            if getattr(self, name) < 0:
                raise ValueError(f"reward weight {name} must be >= 0")

    def total(self) -> float:
        return self.own_hp + self.opp_hp + self.result + self.combo + self.mana


@dataclass(frozen=True, slots=True)
class DuelConfig:
    """One matchup: the two characters plus arena and reward settings.

    ``skill_slots`` fixes the padded cooldown block in observations so that
    every matchup in a roster shares one observation layout.
    """

    char_i: CharacterSpec
    char_ii: CharacterSpec
    arena_length: int = 11
    tick_limit: int = 60
    weights: RewardWeights = RewardWeights()
    skill_slots: int = 0

    def __post_init__(self) -> None:
        if self.arena_length < 3:
            raise ValueError("arena_length must be >= 3")
        if self.tick_limit < 1:
            raise ValueError("tick_limit must be >= 1")
        slots = max(self.skill_slots, self.char_i.n_skills, self.char_ii.n_skills)
        object.__setattr__(self, "skill_slots", slots)

    def char(self, side: int) -> CharacterSpec:
        return self.char_i if side == 0 else self.char_ii


@dataclass(frozen=True, slots=True)
class FighterState:
    pos: int
    hp: int
    mana: int
    combo: int
    cooldowns: tuple[int, ...]
    invincible_until: int


@dataclass(frozen=True, slots=True)
class DuelState:
    tick: int
    fighters: tuple[FighterState, FighterState]


def n_actions_for(char: CharacterSpec) -> int:
    return SKILL_OFFSET + char.n_skills


def action_category(action: int, char: CharacterSpec) -> str:
    """Category label for one of the fighter's actions."""
    if action == NOOP:
        return "noop"
    if action in (ADVANCE, RETREAT):
        return "movement"
    if action == ATTACK:
        return "basic_attack"
    skill_index = action - SKILL_OFFSET
    if 0 <= skill_index < char.n_skills:
        return char.skills[skill_index].category
    raise ValueError(f"action {action} undefined for {char.name!r}")


def duel_reset(config: DuelConfig, seed: int | None = None) -> DuelState:
    """Fresh duel: full resources, fighters one cell in from each end.

    When the arena is too short for that placement to keep the fighters
    apart, they start on the end cells instead. Placement is deterministic;
    ``seed`` is accepted for interface uniformity.
    """
    length = config.arena_length
    pos_i, pos_ii = 1, length - 2
    if pos_i >= pos_ii:
        pos_i, pos_ii = 0, length - 1
    fighters = tuple(
        FighterState(
            pos=pos,
            hp=char.max_hp,
            mana=char.max_mana,
            combo=0,
            cooldowns=(0,) * char.n_skills,
            invincible_until=0,
        )
        for pos, char in ((pos_i, config.char_i), (pos_ii, config.char_ii))
    )
    return DuelState(tick=0, fighters=fighters)


def action_mask(state: DuelState, config: DuelConfig, side: int, n_actions: int | None = None) -> np.ndarray:
    """Availability mask: skills gate on cooldown and mana, the rest is free."""
    char = config.char(side)
    me = state.fighters[side]
    total = n_actions if n_actions is not None else n_actions_for(char)
    if total < n_actions_for(char):
        raise ValueError("global action space smaller than the character's action count")
    mask = np.zeros(total, dtype=bool)
    mask[NOOP] = mask[ADVANCE] = mask[RETREAT] = mask[ATTACK] = True
    for k, skill in enumerate(char.skills):
        mask[SKILL_OFFSET + k] = me.cooldowns[k] == 0 and skill.mana_cost <= me.mana
    return mask


def _skill_for(action: int, char: CharacterSpec) -> SkillSpec | None:
    if action >= SKILL_OFFSET:
        return char.skills[action - SKILL_OFFSET]
    return None


def _toward(pos: int, target: int, dist: int, length: int) -> int:
    # Advancing stops on the target's cell, never crosses it.
    if target > pos:
        return min(pos + dist, target)
    if target < pos:
        return max(pos - dist, target)
    return pos


def _away(pos: int, target: int, dist: int, length: int, side: int) -> int:
    if target > pos:
        return max(pos - dist, 0)
    if target < pos:
        return min(pos + dist, length - 1)
    # Same cell: fall back to each side's home direction so that mirrored
    # states stay mirrored.
    return max(pos - dist, 0) if side == 0 else min(pos + dist, length - 1)


def duel_step(
    state: DuelState, config: DuelConfig, action_i: int, action_ii: int
) -> tuple[DuelState, tuple[float, float], bool]:
    """Advance one tick; returns (next state, shaped rewards, done)."""
    if outcome(state, config) is not Outcome.ONGOING:
        raise ValueError("duel already finished")
    actions = (action_i, action_ii)
    chars = (config.char_i, config.char_ii)
    for side in (0, 1):
        mask = action_mask(state, config, side)
        if not (0 <= actions[side] < mask.size) or not mask[actions[side]]:
            raise ValueError(f"side {side} action {actions[side]} is masked out")

    tick = state.tick
    pos = [f.pos for f in state.fighters]
    hp = [f.hp for f in state.fighters]
    mana = [f.mana for f in state.fighters]
    inv = [f.invincible_until for f in state.fighters]
    cds = [list(f.cooldowns) for f in state.fighters]
    dealt = [False, False]

    # Cooldowns tick down first; a skill used now re-arms afterwards.
    for side in (0, 1):
        cds[side] = [max(0, c - 1) for c in cds[side]]

    skills = [(_skill_for(actions[side], chars[side])) for side in (0, 1)]

    def pay(side: int) -> None:
        skill = skills[side]
        mana[side] -= skill.mana_cost
        cds[side][actions[side] - SKILL_OFFSET] = skill.cooldown

    def invincible(side: int) -> bool:
        return tick < inv[side]

    def hit(target: int, damage: int) -> None:
        if damage > 0 and not invincible(target):
            hp[target] = max(0, hp[target] - damage)
            dealt[1 - target] = True

    # 1. Substitutes come first so their shield covers this whole tick.
    for side in (0, 1):
        skill = skills[side]
        if skill is not None and skill.category == "substitute":
            pay(side)
            inv[side] = tick + skill.effect_duration

    # 2. Counter moves: only bite when the opponent committed a forcing move.
    forcing_cancelled = [False, False]
    for side in (0, 1):
        skill = skills[side]
        if skill is not None and skill.category == "counter_move":
            pay(side)
            opp = 1 - side
            opp_skill = skills[opp]
            if opp_skill is not None and opp_skill.category == "forcing_move":
                forcing_cancelled[opp] = True
                hit(opp, skill.damage)

    # 3. Forcing moves close distance, then strike if within the skill's reach.
    #    Both sides move off the pre-phase positions (simultaneous resolution).
    base_pos = list(pos)
    for side in (0, 1):
        skill = skills[side]
        if skill is not None and skill.category == "forcing_move":
            pay(side)
            if not forcing_cancelled[side]:
                pos[side] = _toward(base_pos[side], base_pos[1 - side], chars[side].move_speed, config.arena_length)
    for side in (0, 1):
        skill = skills[side]
        if skill is not None and skill.category == "forcing_move" and not forcing_cancelled[side]:
            if abs(pos[side] - pos[1 - side]) <= skill.range:
                hit(1 - side, skill.damage)

    # 4. Basic attacks use post-forcing positions.
    for side in (0, 1):
        if actions[side] == ATTACK and abs(pos[side] - pos[1 - side]) <= chars[side].attack_range:
            hit(1 - side, chars[side].attack_damage)

    # 5. Plain movement, simultaneous off the current positions.
    move_base = list(pos)
    for side in (0, 1):
        if actions[side] == ADVANCE:
            pos[side] = _toward(move_base[side], move_base[1 - side], chars[side].move_speed, config.arena_length)
        elif actions[side] == RETREAT:
            pos[side] = _away(move_base[side], move_base[1 - side], chars[side].move_speed, config.arena_length, side)

    combo = [
        min(state.fighters[side].combo + 1, COMBO_CAP) if dealt[side] else 0
        for side in (0, 1)
    ]
    mana = [min(mana[side] + MANA_REGEN, chars[side].max_mana) for side in (0, 1)]

    next_state = DuelState(
        tick=tick + 1,
        fighters=tuple(
            FighterState(
                pos=pos[side],
                hp=hp[side],
                mana=mana[side],
                combo=combo[side],
                cooldowns=tuple(cds[side]),
                invincible_until=inv[side],
            )
            for side in (0, 1)
        ),
    )
    rewards = (
        shaped_reward(state, next_state, config, 0),
        shaped_reward(state, next_state, config, 1),
    )
    done = outcome(next_state, config) is not Outcome.ONGOING
    return next_state, rewards, done


def outcome(state: DuelState, config: DuelConfig) -> Outcome:
    hp_i, hp_ii = state.fighters[0].hp, state.fighters[1].hp
    if hp_i <= 0 or hp_ii <= 0:
        if hp_i == hp_ii:
            return Outcome.DRAW
        return Outcome.WIN_I if hp_i > hp_ii else Outcome.WIN_II
    if state.tick >= config.tick_limit:
        if hp_i == hp_ii:
            return Outcome.DRAW
        return Outcome.WIN_I if hp_i > hp_ii else Outcome.WIN_II
    return Outcome.ONGOING


def _result_term(state: DuelState, config: DuelConfig, side: int) -> float:
    final = outcome(state, config)
    if final is Outcome.ONGOING or final is Outcome.DRAW:
        return 0.0
    won = final is (Outcome.WIN_I if side == 0 else Outcome.WIN_II)
    return 1.0 if won else -1.0


def shaped_reward(prev: DuelState, nxt: DuelState, config: DuelConfig, side: int) -> float:
    """Weighted sum of normalized deltas; symmetric terms keep the duel zero-sum.

    Combo and mana enter as self-minus-opponent differences so the two
    sides' rewards negate each other exactly under equal HP weights.
    """
    w = config.weights
    opp = 1 - side
    me_char, opp_char = config.char(side), config.char(opp)

    own_delta = (nxt.fighters[side].hp - prev.fighters[side].hp) / me_char.max_hp
    opp_delta = (nxt.fighters[opp].hp - prev.fighters[opp].hp) / opp_char.max_hp

    def combo_diff(s: DuelState) -> float:
        return s.fighters[side].combo / COMBO_CAP - s.fighters[opp].combo / COMBO_CAP

    def mana_diff(s: DuelState) -> float:
        return (
            s.fighters[side].mana / me_char.max_mana
            - s.fighters[opp].mana / opp_char.max_mana
        )

    return (
        w.own_hp * own_delta
        - w.opp_hp * opp_delta
        + w.result * _result_term(nxt, config, side)
        + w.combo * (combo_diff(nxt) - combo_diff(prev))
        + w.mana * (mana_diff(nxt) - mana_diff(prev))
    )


def obs_dim(skill_slots: int) -> int:
    return 12 + 2 * skill_slots


def observe(state: DuelState, config: DuelConfig, side: int) -> np.ndarray:
    """Egocentric full-state encoding, every feature normalized to [-1, 1].

    Positions are measured from each fighter's own back wall, so the side-1
    view of a state equals the side-0 view of the mirrored state. Both sides
    therefore read the same information, just from their own perspective.
    """
    opp = 1 - side
    me, other = state.fighters[side], state.fighters[opp]
    me_char, opp_char = config.char(side), config.char(opp)
    span = config.arena_length - 1
    facing = 1 if side == 0 else -1

    def inv_frac(fighter: FighterState) -> float:
        return min(max(fighter.invincible_until - state.tick, 0) / _INVINCIBLE_OBS_TICKS, 1.0)

    def cd_block(fighter: FighterState, char: CharacterSpec) -> list[float]:
        block = [0.0] * config.skill_slots
        for k, skill in enumerate(char.skills):
            block[k] = fighter.cooldowns[k] / max(1, skill.cooldown)
        return block

    my_progress = (me.pos if side == 0 else span - me.pos) / span
    opp_progress = ((span - other.pos) if side == 0 else other.pos) / span
    features = [
        my_progress,
        opp_progress,
        (other.pos - me.pos) * facing / span,
        me.hp / me_char.max_hp,
        other.hp / opp_char.max_hp,
        me.mana / me_char.max_mana,
        other.mana / opp_char.max_mana,
        me.combo / COMBO_CAP,
        other.combo / COMBO_CAP,
        inv_frac(me),
        inv_frac(other),
        state.tick / config.tick_limit,
    ]
    features.extend(cd_block(me, me_char))
    features.extend(cd_block(other, opp_char))
    return np.array(features, dtype=np.float64)


def mirror_state(state: DuelState, config: DuelConfig) -> DuelState:
    """Swap the fighters and reflect positions across the arena midpoint."""
    span = config.arena_length - 1
    f_ii, f_i = state.fighters
    return DuelState(
        tick=state.tick,
        fighters=(
            replace(f_i, pos=span - f_i.pos),
            replace(f_ii, pos=span - f_ii.pos),
        ),
    )


def state_bucket(state: DuelState, config: DuelConfig, side: int, n_buckets: int) -> int:
    """Coarse bucket: relative-position sign plus both HP quintiles."""
    opp = 1 - side
    me, other = state.fighters[side], state.fighters[opp]
    sign = int(np.sign(other.pos - me.pos)) + 1
    my_q = min(int(5 * me.hp / config.char(side).max_hp), 4)
    opp_q = min(int(5 * other.hp / config.char(opp).max_hp), 4)
    return (sign * 25 + my_q * 5 + opp_q) % n_buckets
