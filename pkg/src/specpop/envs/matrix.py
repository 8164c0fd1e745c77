"""One-shot matrix duels, possibly asymmetric, with exact enumeration support.

The payoff table is expressed for the row seat; the column seat receives the
negation. Episodes last a single simultaneous step.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import Outcome

__all__ = [
    "MatrixGameSpec",
    "matrix_play",
    "named_game",
    "matching_pennies",
    "rock_paper_scissors",
    "biased_rock_paper_scissors",
    "seat_mask",
    "MatrixMatch",
]

_MIN_ACTIONS = 2
_MAX_ACTIONS = 8


@dataclass(frozen=True, eq=False)
class MatrixGameSpec:
    """Payoff table for the row seat; column seat gets the negation."""

    payoff: np.ndarray

    def __post_init__(self) -> None:
        table = np.array(self.payoff, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("payoff must be 2-D")
        rows, cols = table.shape
        for n in (rows, cols):
            if not (_MIN_ACTIONS <= n <= _MAX_ACTIONS):
                raise ValueError(f"action counts must lie in [{_MIN_ACTIONS}, {_MAX_ACTIONS}]")
        if not np.all(np.isfinite(table)):
            raise ValueError("payoff entries must be finite")
        table.setflags(write=False)
        object.__setattr__(self, "payoff", table)

    @property
    def n_actions_row(self) -> int:
        return self.payoff.shape[0]

    @property
    def n_actions_col(self) -> int:
        return self.payoff.shape[1]


def matrix_play(spec: MatrixGameSpec, action_row: int, action_col: int) -> tuple[float, float]:
    """Resolve one simultaneous play; returns (row reward, col reward)."""
    if not (0 <= action_row < spec.n_actions_row):
        raise ValueError(f"row action {action_row} out of range")
    if not (0 <= action_col < spec.n_actions_col):
        raise ValueError(f"col action {action_col} out of range")
    value = float(spec.payoff[action_row, action_col])
    return value, -value


def seat_mask(spec: MatrixGameSpec, seat: int, n_actions: int) -> np.ndarray:
    """Availability mask for a seat inside a global action space of n_actions."""
    count = spec.n_actions_row if seat == 0 else spec.n_actions_col
    if n_actions < count:
        raise ValueError("global action space smaller than the seat's action count")
    mask = np.zeros(n_actions, dtype=bool)
    mask[:count] = True
    return mask


def matching_pennies() -> MatrixGameSpec:
    return MatrixGameSpec(np.array([[1.0, -1.0], [-1.0, 1.0]]))


def rock_paper_scissors() -> MatrixGameSpec:
    return MatrixGameSpec(np.array([
        [0.0, -1.0, 1.0],
        [1.0, 0.0, -1.0],
        [-1.0, 1.0, 0.0],
    ]))


def biased_rock_paper_scissors() -> MatrixGameSpec:
    """Rock-vs-scissors pays double; the unique equilibrium is (1/4, 1/2, 1/4)."""
    return MatrixGameSpec(np.array([
        [0.0, -1.0, 2.0],
        [1.0, 0.0, -1.0],
        [-2.0, 1.0, 0.0],
    ]))


_NAMED = {
    "matching_pennies": matching_pennies,
    "rps": rock_paper_scissors,
    "biased_rps": biased_rock_paper_scissors,
}


def named_game(name: str) -> MatrixGameSpec:
    if name not in _NAMED:
        raise ValueError(f"unknown game {name!r}; choose from {sorted(_NAMED)}")
    return _NAMED[name]()


class MatrixMatch:
    """A single matrix episode between two population members.

    ``ids`` records (member on side 0, member on side 1). Side 0 is not
    necessarily the row seat; ``row_side`` says which side plays rows.
    State is ``(phase, row_reward)`` so the outcome survives in the state.
    """

    def __init__(self, spec: MatrixGameSpec, ids: tuple[int, int], row_side: int, n_actions: int):
        self.spec = spec
        self.ids = ids
        self.row_side = row_side
        self.n_actions = n_actions

    def reset(self, rng: np.random.Generator | None = None) -> tuple[int, float]:
        return (0, 0.0)

    def obs(self, state: tuple[int, float], side: int) -> np.ndarray:
        return np.zeros(1, dtype=np.float64)

    def mask(self, state: tuple[int, float], side: int) -> np.ndarray:
        seat = 0 if side == self.row_side else 1
        return seat_mask(self.spec, seat, self.n_actions)

    def step(
        self, state: tuple[int, float], action_0: int, action_1: int
    ) -> tuple[tuple[int, float], tuple[float, float], bool]:
        if state[0] != 0:
            raise ValueError("matrix episodes last one step")
        if self.row_side == 0:
            row_a, col_a = action_0, action_1
        else:
            row_a, col_a = action_1, action_0
        row_r, col_r = matrix_play(self.spec, row_a, col_a)
        rewards = (row_r, col_r) if self.row_side == 0 else (col_r, row_r)
        return (1, row_r), rewards, True

    def outcome(self, state: tuple[int, float]) -> Outcome:
        phase, row_reward = state
        if phase == 0:
            return Outcome.ONGOING
        if row_reward == 0.0:
            return Outcome.DRAW
        row_won = row_reward > 0.0
        side0_is_row = self.row_side == 0
        return Outcome.WIN_I if (row_won == side0_is_row) else Outcome.WIN_II

    def bucket(self, state: tuple[int, float], side: int, n_buckets: int) -> int:
        return 0
