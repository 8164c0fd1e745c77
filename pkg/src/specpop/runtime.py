"""Deterministic randomness streams and the optional worker pool.

Every random decision in a run draws from a generator keyed by the master
seed plus a structured label, so results are bit-identical for a fixed
(config, seed) pair regardless of worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Callable, Sequence

import numpy as np

__all__ = ["rng_stream", "spawn_key", "parallel_map"]


def spawn_key(*parts: int | str) -> tuple[int, ...]:
    """Map a mixed label path to a stable tuple of uint32 words."""
    words: list[int] = []
    for part in parts:
        if isinstance(part, str):
            digest = hashlib.sha256(part.encode("utf-8")).digest()
            words.append(int.from_bytes(digest[:4], "big"))
        else:
            value = int(part)
            if value < 0:
                value = (abs(value) << 1) | 1
            else:
                value = value << 1
            words.append(value & 0xFFFFFFFF)
    return tuple(words)


def rng_stream(master_seed: int, *parts: int | str) -> np.random.Generator:
    """A generator for the stream identified by (master_seed, *parts)."""
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key(*parts))
    return np.random.default_rng(seq)


def parallel_map(
    fn: Callable[[Any], Any],
    tasks: Sequence[Any],
    workers: int = 1,
) -> list[Any]:
    """Apply ``fn`` over ``tasks``, preserving task order in the result.

    ``fn`` and every task must be picklable when workers > 1. Tasks carry
    their own seed material, so the output does not depend on ``workers``.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    tasks = list(tasks)
    if workers == 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(fn, tasks))
