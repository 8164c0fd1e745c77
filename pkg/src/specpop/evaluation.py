"""Evaluation harness: empirical matrices, behavior statistics, exploitation.

Win-rate matrices play each unordered pair once and fill the transpose as
``1 - u`` so the zero-sum antisymmetry holds exactly in floating point, not
just in expectation.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .objectives import exact_distributions, mutual_information_sampled
from .envs.matrix import MatrixGameSpec
from .population import PayoffMatrix, PolicyHandle, _series_task, run_match
from .runtime import parallel_map, rng_stream

WinRateMatrix = PayoffMatrix


def _label(handle: PolicyHandle, prefix: str, index: int) -> str:
    if handle.label:
        return handle.label
    tail = "" if handle.agent_id is None else f"@{handle.agent_id}"
    return f"{prefix}{index}{tail}"


def win_rate_matrix(factory, pop_a: list[PolicyHandle],
                    pop_b: list[PolicyHandle] | None = None, *,
                    games: int = 50, master_seed: int = 0,
                    workers: int = 1) -> WinRateMatrix:
    """Empirical win rates between entities, one series per unordered pair.

    Intra-population mode (``pop_b`` None) plays x-vs-y once and sets
    u[y, x] = 1 - u[x, y], so u + u.T is exactly the all-ones matrix; the
    diagonal is 1/2 by definition. Pairs the factory cannot seat together
    stay at the uninformative 1/2 with a game count of zero.
    """
    if games < 1:
        raise ValueError("need at least one game per pair")
    intra = pop_b is None
    rows = pop_a
    cols = pop_a if intra else pop_b
    row_labels = tuple(_label(h, "a", i) for i, h in enumerate(rows))
    col_labels = tuple(_label(h, "a" if intra else "b", j) for j, h in enumerate(cols))
    u = np.full((len(rows), len(cols)), 0.5)
    counts = np.zeros((len(rows), len(cols)), dtype=np.int64)
    payloads, slots = [], []
    for x in range(len(rows)):
        for y in range(x + 1 if intra else 0, len(cols)):
            if intra and x == y:
                continue
            if not factory.compatible(rows[x].agent_id, cols[y].agent_id):
                continue
            payloads.append((factory, rows[x], cols[y], games, master_seed,
                             ("wrm" if intra else "wrm_cross", x, y)))
            slots.append((x, y))
    for (x, y), w in zip(slots, parallel_map(_series_task, payloads, workers)):
        u[x, y] = w
        counts[x, y] = games
        if intra:
            u[y, x] = 1.0 - w
            counts[y, x] = games
    return WinRateMatrix(u=u, games=counts, row_labels=row_labels,
                         col_labels=col_labels)


def epsilon_ne(win_rate: float) -> float:
    """Distance of an empirical win rate from the zero-sum draw point 1/2."""
    if not (0.0 <= win_rate <= 1.0):
        raise ValueError("win rate must lie in [0, 1]")
    return abs(win_rate - 0.5)


# ---------------------------------------------------------------------------
# Behavior statistics.


@dataclass(frozen=True)
class ActionFrequencyVector:
    """How often one entity plays each action category, over whole episodes."""

    label: str
    frequencies: np.ndarray
    episodes: int
    category_names: tuple[str, ...]

    def __post_init__(self) -> None:
        freq = np.asarray(self.frequencies, dtype=np.float64)
        if freq.ndim != 1 or freq.size != len(self.category_names):
            raise ValueError("one frequency per category required")
        if freq.min() < 0.0 or abs(freq.sum() - 1.0) > 1e-9:
            raise ValueError("frequencies must form a distribution")
        freq.flags.writeable = False
        object.__setattr__(self, "frequencies", freq)


def action_frequency_vector(factory, handle: PolicyHandle,
                            opponents: PolicyHandle | list[PolicyHandle],
                            episodes: int, rng: np.random.Generator) -> ActionFrequencyVector:
    """Category frequencies of one entity's executed actions.

    Opponents rotate per episode and seats alternate, so two entities probed
    against the same opponent list face the same schedule and their vectors
    are comparable.
    """
    if isinstance(opponents, PolicyHandle):
        opponents = [opponents]
    if episodes < 1 or not opponents:
        raise ValueError("need at least one episode and one opponent")
    counts = np.zeros(len(factory.category_names))
    for g in range(episodes):
        opp = opponents[g % len(opponents)]
        if g % 2 == 0:
            got, _, _ = run_match(factory, handle, opp, rng, record=(True, False))
        else:
            _, got, _ = run_match(factory, opp, handle, rng, record=(False, True))
        for t in got:
            counts[factory.action_category(t.action_self, handle.agent_id)] += 1
    return ActionFrequencyVector(
        label=handle.label or f"id{handle.agent_id}",
        frequencies=counts / counts.sum(),
        episodes=episodes,
        category_names=tuple(factory.category_names),
    )


@dataclass(frozen=True)
class DiversityReport:
    """Population behavioral spread: expected pairwise distance of frequencies."""

    score: float
    n_pairs: int
    labels: tuple[str, ...]
    pair_distances: tuple[float, ...]


def diversity_score(vectors: list[ActionFrequencyVector]) -> DiversityReport:
    """Mean Euclidean distance between all unordered pairs of frequency vectors."""
    if len(vectors) < 2:
        raise ValueError("diversity needs at least two entities")
    names = {v.category_names for v in vectors}
    if len(names) != 1:
        raise ValueError("frequency vectors use different category sets")
    distances = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            d = float(np.linalg.norm(vectors[i].frequencies - vectors[j].frequencies))
            distances.append(d)
    return DiversityReport(
        score=float(np.mean(distances)),
        n_pairs=len(distances),
        labels=tuple(v.label for v in vectors),
        pair_distances=tuple(distances),
    )


def format_relative_change(before: float, after: float) -> str:
    """Signed percent change, one decimal: 0.9210 -> 1.0585 reads '+14.9%'."""
    if before <= 0.0:
        raise ValueError("baseline must be positive")
    return f"{100.0 * (after - before) / before:+.1f}%"


def radial_export(reports: list[ActionFrequencyVector]) -> list[dict]:
    """Rows of per-category frequency and deviation from the population mean."""
    if not reports:
        raise ValueError("no frequency vectors given")
    names = reports[0].category_names
    mean = np.mean([r.frequencies for r in reports], axis=0)
    rows = []
    for r in reports:
        for c, name in enumerate(names):
            rows.append({
                "agent": r.label,
                "category": name,
                "frequency": float(r.frequencies[c]),
                "deviation": float(r.frequencies[c] - mean[c]),
            })
    return rows


# ---------------------------------------------------------------------------
# Mutual information between entities' realized action streams.


def mi_report(factory, handles: list[PolicyHandle], *, episodes: int = 32,
              master_seed: int = 0) -> dict:
    """Sampled MI of joint action choices for every playable entity pair.

    Each pair plays its real matches; every tick contributes the two executed
    actions plus a coarse state bucket from the first entity's perspective.
    Deterministic twins produce identical streams, so their MI equals the
    entropy of the shared action distribution; independent random play drops
    to zero as the sample grows.
    """
    if len(handles) < 2:
        raise ValueError("MI needs at least two entities")
    pair_rows = []
    for i in range(len(handles)):
        for j in range(i + 1, len(handles)):
            a, b = handles[i], handles[j]
            if not factory.compatible(a.agent_id, b.agent_id):
                continue
            rng = rng_stream(master_seed, "mi_probe", i, j)
            pairs, buckets = [], []
            for g in range(episodes):
                if g % 2 == 0:
                    got, _, _ = run_match(factory, a, b, rng, record=(True, False))
                else:
                    _, got, _ = run_match(factory, b, a, rng, record=(False, True))
                # Either way ``got`` is entity a's view: pairs stay (a, b)
                # ordered and the bucket is always a's perspective.
                pairs.extend((t.action_self, t.action_opp) for t in got)
                buckets.extend(t.bucket for t in got)
            mi = mutual_information_sampled(np.array(pairs), np.array(buckets))
            pair_rows.append({
                "a": _label(a, "h", i),
                "b": _label(b, "h", j),
                "mi_nats": float(mi),
                "samples": len(pairs),
            })
    if not pair_rows:
        raise ValueError("no playable entity pair")
    return {
        "pairs": pair_rows,
        "mean_mi_nats": float(np.mean([row["mi_nats"] for row in pair_rows])),
        "episodes_per_pair": episodes,
    }


# ---------------------------------------------------------------------------
# Exploitation of matrix-game strategies.


def _seat_dists(game: MatrixGameSpec, params, ids, dist_row, dist_col):
    if params is not None:
        d_row, d_col, _, _ = exact_distributions(params, game, ids)
        dist_row = d_row.probs[:game.n_actions_row]
        dist_col = d_col.probs[:game.n_actions_col]
    if dist_row is None or dist_col is None:
        raise ValueError("need either params or both seat distributions")
    p = np.asarray(dist_row, dtype=np.float64)
    q = np.asarray(dist_col, dtype=np.float64)
    if p.shape != (game.n_actions_row,) or q.shape != (game.n_actions_col,):
        raise ValueError("distribution sizes must match the game")
    for d in (p, q):
        if d.min() < 0.0 or abs(d.sum() - 1.0) > 1e-9:
            raise ValueError("seat distributions must be normalized")
    return p, q


def best_response(game: MatrixGameSpec, seat: int, opponent_dist: np.ndarray) -> tuple[int, float]:
    """Brute-force best pure reply and its value for the replying seat."""
    opponent_dist = np.asarray(opponent_dist, dtype=np.float64)
    if seat == 0:
        vals = game.payoff @ opponent_dist
    elif seat == 1:
        vals = -(opponent_dist @ game.payoff)
    else:
        raise ValueError("seat must be 0 or 1")
    action = int(np.argmax(vals))
    return action, float(vals[action])


def exploitability(game: MatrixGameSpec, params=None, *,
                   ids: tuple[int, int] = (0, 1),
                   dist_row: np.ndarray | None = None,
                   dist_col: np.ndarray | None = None) -> float:
    """Largest one-sided gain a brute-force best response achieves.

    Zero exactly at a Nash equilibrium; 1.0 for pure rock against itself in
    standard rock-paper-scissors.
    """
    p, q = _seat_dists(game, params, ids, dist_row, dist_col)
    value = float(p @ game.payoff @ q)
    _, row_best = best_response(game, 0, q)
    _, col_best = best_response(game, 1, p)
    gain_row = row_best - value
    gain_col = col_best - (-value)
    return max(gain_row, gain_col)


# ---------------------------------------------------------------------------
# File exports.


def write_matrix_csv(path: str | Path, matrix: WinRateMatrix) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["", *matrix.col_labels])
        for x, row_label in enumerate(matrix.row_labels):
            writer.writerow([row_label, *[repr(float(v)) for v in matrix.u[x]]])


def write_diversity_json(path: str | Path, report: DiversityReport,
                         extra: dict | None = None) -> None:
    payload = {
        "score": report.score,
        "n_pairs": report.n_pairs,
        "labels": list(report.labels),
        "pair_distances": list(report.pair_distances),
    }
    payload.update(extra or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def write_radial_csv(path: str | Path, rows: list[dict]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["agent", "category", "frequency",
                                                "deviation"])
        writer.writeheader()
        writer.writerows(rows)


def write_mi_json(path: str | Path, report: dict) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
