"""Independent reference implementations used only by the tests.

These deliberately take different computational routes than the package:
entropy decomposition instead of log-ratio sums for MI, explicit power
series instead of Horner recursion for returns, plain loops instead of
vectorized batch math, so agreement between the two is evidence, not an
identity.
"""
from __future__ import annotations

import math

import numpy as np


def fd_gradient(fn, x: np.ndarray, step: float = 1e-5) -> np.ndarray:
    """Central finite differences, written independently of the package."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    for i in range(x.size):
        plus = x.copy()
        minus = x.copy()
        plus[i] = x[i] + step
        minus[i] = x[i] - step
        out[i] = (fn(plus) - fn(minus)) / (2.0 * step)
    return out


def grad_close(analytic: np.ndarray, reference: np.ndarray,
               rel: float = 1e-4, abs_guard: float = 1e-7) -> bool:
    """Relative comparison with an absolute floor for near-zero gradients."""
    analytic = np.asarray(analytic, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    diff = np.linalg.norm(analytic - reference)
    scale = np.linalg.norm(reference)
    return diff <= max(rel * scale, abs_guard)


def softmax_ref(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Reference masked softmax using explicit exponentials over a shift."""
    logits = np.asarray(logits, dtype=np.float64)
    mask = np.asarray(mask, dtype=bool)
    shift = logits[mask].max()
    weights = np.zeros_like(logits)
    for a in range(logits.size):
        if mask[a]:
            weights[a] = math.exp(logits[a] - shift)
    return weights / weights.sum()


def discounted_return_ref(rewards, gamma: float) -> float:
    """Explicit power-series sum (the package uses a Horner recursion)."""
    return sum((gamma ** t) * r for t, r in enumerate(rewards))


def n_step_return_ref(rewards, gamma: float, bootstrap: float) -> float:
    rewards = list(rewards)
    return discounted_return_ref(rewards, gamma) + (gamma ** len(rewards)) * bootstrap


def entropy_ref(p: np.ndarray) -> float:
    p = np.asarray(p, dtype=np.float64)
    return float(-sum(x * math.log(x) for x in p.ravel() if x > 0.0))


def mi_ref(joint: np.ndarray) -> float:
    """MI via the entropy decomposition H(row) + H(col) - H(joint)."""
    joint = np.asarray(joint, dtype=np.float64)
    return max(entropy_ref(joint.sum(axis=1)) + entropy_ref(joint.sum(axis=0))
               - entropy_ref(joint), 0.0)


def matrix_value_ref(p: np.ndarray, q: np.ndarray, payoff: np.ndarray) -> float:
    """Row player's expected payoff through explicit double loops."""
    total = 0.0
    for a in range(payoff.shape[0]):
        for b in range(payoff.shape[1]):
            total += p[a] * q[b] * payoff[a][b]
    return total


def exploitability_ref(payoff: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Best pure-response gains found by explicit enumeration."""
    payoff = np.asarray(payoff, dtype=np.float64)
    value = matrix_value_ref(p, q, payoff)
    best_row = max(
        matrix_value_ref(np.eye(payoff.shape[0])[a], q, payoff)
        for a in range(payoff.shape[0])
    )
    best_col = min(
        matrix_value_ref(p, np.eye(payoff.shape[1])[b], payoff)
        for b in range(payoff.shape[1])
    )
    return max(best_row - value, value - best_col)


def win_rate_ref(payoff: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Row player's expected outcome score: win 1, draw 1/2, loss 0."""
    total = 0.0
    for a in range(payoff.shape[0]):
        for b in range(payoff.shape[1]):
            if payoff[a][b] > 0:
                score = 1.0
            elif payoff[a][b] < 0:
                score = 0.0
            else:
                score = 0.5
            total += p[a] * q[b] * score
    return total


def mean_pairwise_distance_ref(vectors) -> float:
    """Average Euclidean distance over unordered pairs, explicit loops."""
    vectors = [np.asarray(v, dtype=np.float64) for v in vectors]
    dists = []
    for i in range(len(vectors)):
        for j in range(i + 1, len(vectors)):
            dists.append(math.sqrt(float(((vectors[i] - vectors[j]) ** 2).sum())))
    return sum(dists) / len(dists)
