"""The built-in four-fighter roster.

Each fighter carries at least one skill per category but leans on a
different game plan: raw aggression, reach, counters, or substitutes.
"""

from __future__ import annotations

from ..core import CharacterSpec, SkillSpec

__all__ = ["default_roster"]


def default_roster() -> tuple[CharacterSpec, ...]:
    brawler = CharacterSpec(
        name="brawler",
        move_speed=2,
        attack_range=1,
        attack_damage=12,
        max_hp=100,
        max_mana=10,
        skills=(
            SkillSpec("forcing_move", cooldown=6, damage=18, range=3, mana_cost=3),
            SkillSpec("counter_move", cooldown=8, damage=14, range=2, mana_cost=2),
            SkillSpec("substitute", cooldown=10, damage=0, range=0, mana_cost=3, effect_duration=2),
        ),
    )
    sniper = CharacterSpec(
        name="sniper",
        move_speed=1,
        attack_range=4,
        attack_damage=10,
        max_hp=80,
        max_mana=12,
        skills=(
            SkillSpec("forcing_move", cooldown=7, damage=22, range=5, mana_cost=4),
            SkillSpec("counter_move", cooldown=9, damage=10, range=3, mana_cost=2),
            SkillSpec("substitute", cooldown=12, damage=0, range=0, mana_cost=3, effect_duration=2),
        ),
    )
    warden = CharacterSpec(
        name="warden",
        move_speed=1,
        attack_range=2,
        attack_damage=8,
        max_hp=120,
        max_mana=10,
        skills=(
            SkillSpec("forcing_move", cooldown=8, damage=12, range=3, mana_cost=3),
            SkillSpec("counter_move", cooldown=4, damage=20, range=2, mana_cost=2),
            SkillSpec("counter_move", cooldown=6, damage=12, range=2, mana_cost=1),
            SkillSpec("substitute", cooldown=12, damage=0, range=0, mana_cost=2, effect_duration=1),
        ),
    )
    trickster = CharacterSpec(
        name="trickster",
        move_speed=2,
        attack_range=2,
        attack_damage=9,
        max_hp=90,
        max_mana=14,
        skills=(
            SkillSpec("forcing_move", cooldown=7, damage=14, range=4, mana_cost=3),
            SkillSpec("counter_move", cooldown=8, damage=10, range=2, mana_cost=2),
            SkillSpec("substitute", cooldown=6, damage=0, range=0, mana_cost=2, effect_duration=2),
            SkillSpec("substitute", cooldown=9, damage=0, range=0, mana_cost=3, effect_duration=3),
        ),
    )
    return (brawler, sniper, warden, trickster)
