"""Shared environment vocabulary."""

from __future__ import annotations

import enum

__all__ = ["Outcome"]


class Outcome(enum.Enum):
    """Result of a finished (or still running) two-player episode."""

    WIN_I = "win_i"
    WIN_II = "win_ii"
    DRAW = "draw"
    ONGOING = "ongoing"

    def score_i(self) -> float:
        """Points for the first seat: win 1, draw 0.5, loss 0."""
        if self is Outcome.ONGOING:
            raise ValueError("episode still running")
        return {Outcome.WIN_I: 1.0, Outcome.DRAW: 0.5, Outcome.WIN_II: 0.0}[self]
