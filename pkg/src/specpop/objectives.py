"""Training signals: return estimators, mutual information, losses, updates.

Sampled estimators operate on aligned pairs of per-seat trajectory batches
(one step in a self-play episode yields one transition per seat). Exact
variants enumerate small matrix games and exist so every gradient can be
validated against finite differences and closed forms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import TrajectoryBatch
from .envs.matrix import MatrixGameSpec, seat_mask
from .policy import (
    PolicyParams,
    action_logits,
    forward,
    forward_batch,
    grad_log_prob,
    logit_jacobian,
    value_batch,
    weighted_score_sum,
    weighted_value_grad_sum,
)

__all__ = [
    "ObjectiveConfig",
    "ValueEstimates",
    "GradEstimate",
    "compute_value_estimates",
    "normalize_advantages",
    "estimate_J",
    "policy_gradient",
    "exact_distributions",
    "exact_objective",
    "exact_policy_gradient",
    "mutual_information_of_joint",
    "mutual_information_exact",
    "mutual_information_sampled",
    "coupled_joint",
    "mi_objective_exact",
    "mi_gradient_exact",
    "mi_gradient_sampled",
    "augmented_gradient",
    "augmented_objective_exact",
    "augmented_gradient_exact",
    "augmented_step_gradient",
    "mia_loss",
    "mia_loss_exact",
    "cam_loss",
    "cam_loss_exact",
    "ppo_surrogate",
    "value_loss_and_grad",
    "clip_grad_norm",
    "sgd_step",
]

_VAR_FLOOR = 1e-8


@dataclass(frozen=True, slots=True)
class ObjectiveConfig:
    """Hyperparameters shared by both training stages."""

    gamma: float = 0.995
    lambda_mi: float = 0.1
    ppo_clip: float = 0.1
    n_step: int = 100
    learning_rate: float = 1e-4
    grad_clip: float = 10.0
    mi_mode: str = "sampled"
    state_buckets: int = 16
    # Raw advantages shrink as the opponent pool's average strategy settles,
    # which lets the policy come to rest; unit-variance rescaling erases that
    # annealing, so it is optional.
    advantage_normalization: bool = True

    def __post_init__(self) -> None:
        if not (0.0 <= self.gamma < 1.0):
            raise ValueError("gamma must lie in [0, 1)")
        if self.lambda_mi < 0.0:
            raise ValueError("lambda_mi must be >= 0")
        if self.ppo_clip <= 0.0:
            raise ValueError("ppo_clip must be positive")
        if self.n_step < 1:
            raise ValueError("n_step must be >= 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.grad_clip <= 0.0:
            raise ValueError("grad_clip must be positive")
        if self.mi_mode not in ("exact", "sampled"):
            raise ValueError("mi_mode must be 'exact' or 'sampled'")
        if self.state_buckets < 1:
            raise ValueError("state_buckets must be >= 1")


@dataclass(frozen=True, slots=True, eq=False)
class ValueEstimates:
    """n-step action values, state-value baseline, and their difference."""

    q: np.ndarray
    v: np.ndarray
    advantage: np.ndarray

    def __post_init__(self) -> None:
        if not (self.q.shape == self.v.shape == self.advantage.shape):
            raise ValueError("q, v, advantage must share a shape")


@dataclass(frozen=True, slots=True, eq=False)
class GradEstimate:
    """A flat gradient estimate plus bookkeeping for diagnostics."""

    grad: np.ndarray
    n_samples: int
    diagnostics: dict = field(default_factory=dict)


def compute_value_estimates(batch: TrajectoryBatch, params: PolicyParams,
                            cfg: ObjectiveConfig) -> ValueEstimates:
    """n-step bootstrapped returns and the value baseline for one batch.

    Within each episode the return for step t sums up to ``n_step``
    discounted rewards, then bootstraps with V of the state n steps ahead.
    Episodes that end inside the window contribute a zero terminal value
    when done, or V of the final next-state when truncated.
    """
    arrs = batch.as_arrays()
    rewards, dones = arrs["rewards"], arrs["dones"]
    v = value_batch(params, arrs["states"], arrs["ids"])
    q = np.empty_like(v)
    gamma, n = cfg.gamma, cfg.n_step
    for ep in batch.episode_slices():
        r = rewards[ep]
        length = r.size
        tail = 0.0
        if not dones[ep.stop - 1]:
            last = batch.transitions[ep.stop - 1]
            tail = _single_value(params, last.next_state, last.id_self)
        full = np.empty(length + 1)
        full[length] = tail
        for t in range(length - 1, -1, -1):
            full[t] = r[t] + gamma * full[t + 1]
        gn = gamma ** n
        v_ep = v[ep]
        for t in range(length):
            if t + n < length:
                q[ep.start + t] = full[t] - gn * full[t + n] + gn * v_ep[t + n]
            else:
                q[ep.start + t] = full[t]
    return ValueEstimates(q=q, v=v, advantage=q - v)


def _single_value(params: PolicyParams, state: np.ndarray, agent_id: int) -> float:
    return float(value_batch(params, state[None, :], np.array([agent_id]))[0])


def normalize_advantages(advantage: np.ndarray) -> np.ndarray:
    """Zero-mean unit-variance rescaling, skipped for near-constant batches."""
    advantage = np.asarray(advantage, dtype=np.float64)
    var = advantage.var()
    if var < _VAR_FLOOR:
        return advantage.copy()
    return (advantage - advantage.mean()) / math.sqrt(var)


def _as_lists(batches, values) -> tuple[list[TrajectoryBatch], list[ValueEstimates]]:
    if isinstance(batches, TrajectoryBatch):
        batches, values = [batches], [values]
    else:
        batches, values = list(batches), list(values)
    if len(batches) != len(values):
        raise ValueError("batches and values must pair up")
    for b, est in zip(batches, values):
        if len(b) != est.q.size:
            raise ValueError("value estimates misaligned with batch")
    return batches, values


def estimate_J(batches, values) -> float:
    """Monte-Carlo estimate of the centralized return objective.

    Half the sum over seats of each seat's mean n-step value; with both
    seats of a zero-sum game present the exact expectation is zero.
    """
    batches, values = _as_lists(batches, values)
    return 0.5 * sum(float(est.q.mean()) for est in values)


def _check_paired(batch_i: TrajectoryBatch, batch_ii: TrajectoryBatch) -> None:
    if len(batch_i) != len(batch_ii):
        raise ValueError("paired batches must align step for step")
    if batch_i.episode_starts != batch_ii.episode_starts:
        raise ValueError("paired batches must share episode boundaries")


def policy_gradient(batch_i: TrajectoryBatch, batch_ii: TrajectoryBatch,
                    values_i: ValueEstimates, values_ii: ValueEstimates,
                    params: PolicyParams) -> GradEstimate:
    """Symmetric score-function gradient over aligned self-play batches.

    Per paired step both seats' advantages weight the sum of both seats'
    score vectors, then everything averages over steps.
    """
    _check_paired(batch_i, batch_ii)
    m = len(batch_i)
    pair_w = 0.5 * (values_i.advantage + values_ii.advantage) / m
    grad = np.zeros_like(params.flat)
    for batch in (batch_i, batch_ii):
        arrs = batch.as_arrays()
        grad += weighted_score_sum(
            params, arrs["states"], arrs["ids"], arrs["actions"], arrs["masks"], pair_w,
        )
    diag = {"mean_abs_advantage": float(np.abs(pair_w).mean() * m)}
    return GradEstimate(grad=grad, n_samples=m, diagnostics=diag)


# ---------------------------------------------------------------------------
# Exact enumeration over matrix games.


def exact_distributions(params: PolicyParams, game: MatrixGameSpec,
                        ids: tuple[int, int] = (0, 1)):
    """Per-seat action distributions (and masks) on the single matrix state."""
    state = np.zeros(1)
    mask_row = seat_mask(game, 0, params.n_actions)
    mask_col = seat_mask(game, 1, params.n_actions)
    dist_row = forward(params, state, ids[0], mask_row)
    dist_col = forward(params, state, ids[1], mask_col)
    return dist_row, dist_col, mask_row, mask_col


def _q_tables(game: MatrixGameSpec, q_row, q_col) -> tuple[np.ndarray, np.ndarray]:
    q_row = game.payoff if q_row is None else np.asarray(q_row, dtype=np.float64)
    q_col = -game.payoff if q_col is None else np.asarray(q_col, dtype=np.float64)
    if q_row.shape != game.payoff.shape or q_col.shape != game.payoff.shape:
        raise ValueError("q tables must match the payoff shape")
    return q_row, q_col


def _pad_joint(params: PolicyParams, dist_row, dist_col, game: MatrixGameSpec):
    p_row = dist_row.probs[: game.n_actions_row]
    p_col = dist_col.probs[: game.n_actions_col]
    return p_row, p_col


def exact_objective(params: PolicyParams, game: MatrixGameSpec,
                    q_row=None, q_col=None, ids: tuple[int, int] = (0, 1)) -> float:
    """Full enumeration of the centralized objective on a matrix game."""
    dist_row, dist_col, _, _ = exact_distributions(params, game, ids)
    p_row, p_col = _pad_joint(params, dist_row, dist_col, game)
    q_r, q_c = _q_tables(game, q_row, q_col)
    joint = np.outer(p_row, p_col)
    return float((joint * 0.5 * (q_r + q_c)).sum())


def exact_policy_gradient(params: PolicyParams, game: MatrixGameSpec,
                          q_row=None, q_col=None,
                          ids: tuple[int, int] = (0, 1)) -> np.ndarray:
    """Analytic gradient of ``exact_objective`` with respect to the params."""
    dist_row, dist_col, mask_row, mask_col = exact_distributions(params, game, ids)
    p_row, p_col = _pad_joint(params, dist_row, dist_col, game)
    q_r, q_c = _q_tables(game, q_row, q_col)
    weights = np.outer(p_row, p_col) * 0.5 * (q_r + q_c)
    state = np.zeros(1)
    grad = np.zeros_like(params.flat)
    row_w = weights.sum(axis=1)
    col_w = weights.sum(axis=0)
    for a, w in enumerate(row_w):
        if p_row[a] > 0.0 and w != 0.0:
            grad += w * grad_log_prob(params, state, ids[0], a, mask_row)
    for b, w in enumerate(col_w):
        if p_col[b] > 0.0 and w != 0.0:
            grad += w * grad_log_prob(params, state, ids[1], b, mask_col)
    return grad


# ---------------------------------------------------------------------------
# Mutual information.


def mutual_information_of_joint(joint: np.ndarray) -> float:
    """MI in nats of a 2-D joint action table; rejects unnormalized input."""
    joint = np.asarray(joint, dtype=np.float64)
    if joint.ndim != 2:
        raise ValueError("joint table must be 2-D")
    if np.any(joint < 0.0):
        raise ValueError("joint table entries must be non-negative")
    total = joint.sum()
    if abs(total - 1.0) > 1e-9:
        raise ValueError("joint table must sum to 1")
    p_row = joint.sum(axis=1)
    p_col = joint.sum(axis=0)
    mask = joint > 0.0
    ratio = joint[mask] / (np.outer(p_row, p_col)[mask])
    value = float((joint[mask] * np.log(ratio)).sum())
    return max(value, 0.0)


def mutual_information_exact(params: PolicyParams | None = None,
                             state: np.ndarray | None = None,
                             ids: tuple[int, int] = (0, 1),
                             masks: tuple[np.ndarray, np.ndarray] | None = None,
                             joint: np.ndarray | None = None) -> float:
    """MI of the factorized joint policy (identically zero), or of a
    caller-supplied joint table."""
    if joint is not None:
        return mutual_information_of_joint(joint)
    if params is None or state is None or masks is None:
        raise ValueError("need (params, state, masks) or an explicit joint")
    dist_i = forward(params, state, ids[0], masks[0])
    dist_ii = forward(params, state, ids[1], masks[1])
    return mutual_information_of_joint(np.outer(dist_i.probs, dist_ii.probs))


def _bucket_tables(pairs: np.ndarray, buckets: np.ndarray):
    """Per-bucket empirical joint tables keyed by bucket id."""
    pairs = np.asarray(pairs, dtype=np.int64)
    buckets = np.asarray(buckets, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise ValueError("pairs must be an (m, 2) array")
    if pairs.shape[0] == 0:
        raise ValueError("no samples")
    if buckets.shape[0] != pairs.shape[0]:
        raise ValueError("buckets misaligned with pairs")
    n_a = int(pairs[:, 0].max()) + 1
    n_b = int(pairs[:, 1].max()) + 1
    tables: dict[int, np.ndarray] = {}
    for b in np.unique(buckets):
        sel = pairs[buckets == b]
        table = np.zeros((n_a, n_b))
        np.add.at(table, (sel[:, 0], sel[:, 1]), 1.0)
        tables[int(b)] = table
    return tables, pairs.shape[0]


def mutual_information_sampled(pairs: np.ndarray, buckets: np.ndarray) -> float:
    """Plug-in MI from joint action draws, bucketed by coarse state.

    Each bucket contributes its own empirical-table MI, weighted by the
    bucket's visitation share.
    """
    tables, m = _bucket_tables(pairs, buckets)
    total = 0.0
    for table in tables.values():
        count = table.sum()
        total += (count / m) * mutual_information_of_joint(table / count)
    return max(total, 0.0)


def coupled_joint(params: PolicyParams, state: np.ndarray,
                  ids: tuple[int, int], masks: tuple[np.ndarray, np.ndarray],
                  coupling: np.ndarray) -> np.ndarray:
    """A correlated joint built from both seats' logits plus a coupling table.

    Softmax over pairs of (logit_i + logit_ii + coupling); unlike the
    factorized product this joint carries nonzero MI, which makes it the
    non-degenerate target for MI gradient checks.
    """
    coupling = np.asarray(coupling, dtype=np.float64)
    l_i = action_logits(params, state, ids[0])
    l_ii = action_logits(params, state, ids[1])
    if coupling.shape != (l_i.size, l_ii.size):
        raise ValueError("coupling must be (n_actions, n_actions)")
    z = l_i[:, None] + l_ii[None, :] + coupling
    avail = np.asarray(masks[0], dtype=bool)[:, None] & np.asarray(masks[1], dtype=bool)[None, :]
    if not avail.any():
        raise ValueError("no available joint action")
    z = np.where(avail, z, -np.inf)
    z = z - z.max()
    expd = np.where(avail, np.exp(z), 0.0)
    return expd / expd.sum()


def _game_masks(params: PolicyParams, game: MatrixGameSpec):
    return seat_mask(game, 0, params.n_actions), seat_mask(game, 1, params.n_actions)


def mi_objective_exact(params: PolicyParams, game: MatrixGameSpec,
                       ids: tuple[int, int] = (0, 1),
                       coupling: np.ndarray | None = None) -> float:
    """Scalar MI objective used for finite-difference validation."""
    state = np.zeros(1)
    masks = _game_masks(params, game)
    if coupling is None:
        return mutual_information_exact(params, state, ids, masks)
    return mutual_information_of_joint(coupled_joint(params, state, ids, masks, coupling))


def mi_gradient_exact(params: PolicyParams, game: MatrixGameSpec,
                      ids: tuple[int, int] = (0, 1),
                      coupling: np.ndarray | None = None) -> np.ndarray:
    """Analytic MI gradient by enumeration.

    Under the factorized joint the pointwise log-ratio vanishes, so the
    gradient is exactly zero; with a coupling table the full chain rule
    through both seats' logits applies.
    """
    state = np.zeros(1)
    masks = _game_masks(params, game)
    if coupling is None:
        dist_i = forward(params, state, ids[0], masks[0])
        dist_ii = forward(params, state, ids[1], masks[1])
        joint = np.outer(dist_i.probs, dist_ii.probs)
        p_row, p_col = dist_i.probs, dist_ii.probs
        log_ratio = _safe_log_ratio(joint, p_row, p_col)
        u_row = log_ratio @ p_col
        u_col = p_row @ log_ratio
        dl_row = p_row * (u_row - float(p_row @ u_row))
        dl_col = p_col * (u_col - float(p_col @ u_col))
    else:
        joint = coupled_joint(params, state, ids, masks, coupling)
        p_row = joint.sum(axis=1)
        p_col = joint.sum(axis=0)
        log_ratio = _safe_log_ratio(joint, p_row, p_col)
        mean_ratio = float((joint * log_ratio).sum())
        dz = joint * (log_ratio - mean_ratio)
        dl_row = dz.sum(axis=1)
        dl_col = dz.sum(axis=0)
    jac_row = logit_jacobian(params, state, ids[0])
    jac_col = logit_jacobian(params, state, ids[1])
    return jac_row.T @ dl_row + jac_col.T @ dl_col


def _safe_log_ratio(joint: np.ndarray, p_row: np.ndarray, p_col: np.ndarray) -> np.ndarray:
    outer = np.outer(p_row, p_col)
    out = np.zeros_like(joint)
    mask = joint > 0.0
    out[mask] = np.log(joint[mask] / outer[mask])
    return out


def mi_gradient_sampled(batch_i: TrajectoryBatch, batch_ii: TrajectoryBatch,
                        params: PolicyParams) -> GradEstimate:
    """Score-function MI gradient from aligned self-play batches.

    Plug-in log-ratio weights from per-bucket empirical tables multiply the
    summed score vectors of both seats.
    """
    _check_paired(batch_i, batch_ii)
    arrs_i, arrs_ii = batch_i.as_arrays(), batch_ii.as_arrays()
    pairs = np.stack([arrs_i["actions"], arrs_ii["actions"]], axis=1)
    buckets = arrs_i["buckets"]
    tables, m = _bucket_tables(pairs, buckets)
    log_w = np.empty(m)
    for b, table in tables.items():
        sel = buckets == b
        count = table.sum()
        joint = table / count
        p_row = joint.sum(axis=1)
        p_col = joint.sum(axis=0)
        a_i = arrs_i["actions"][sel]
        a_ii = arrs_ii["actions"][sel]
        log_w[sel] = (
            np.log(joint[a_i, a_ii]) - np.log(p_row[a_i]) - np.log(p_col[a_ii])
        )
    weights = log_w / m
    grad = np.zeros_like(params.flat)
    for arrs in (arrs_i, arrs_ii):
        grad += weighted_score_sum(
            params, arrs["states"], arrs["ids"], arrs["actions"], arrs["masks"], weights,
        )
    return GradEstimate(grad=grad, n_samples=m,
                        diagnostics={"mean_log_ratio": float(log_w.mean())})


def augmented_gradient(batch_i: TrajectoryBatch, batch_ii: TrajectoryBatch,
                       values_i: ValueEstimates, values_ii: ValueEstimates,
                       params: PolicyParams, cfg: ObjectiveConfig,
                       game: MatrixGameSpec | None = None,
                       coupling: np.ndarray | None = None) -> GradEstimate:
    """Return gradient plus lambda times the MI gradient, with per-term norms."""
    pg = policy_gradient(batch_i, batch_ii, values_i, values_ii, params)
    if cfg.mi_mode == "exact":
        if game is None:
            raise ValueError("exact MI mode needs the matrix game")
        ids = (batch_i.agent, batch_ii.agent)
        mi_grad = mi_gradient_exact(params, game, ids, coupling)
        mi_samples = pg.n_samples
    else:
        mi_est = mi_gradient_sampled(batch_i, batch_ii, params)
        mi_grad, mi_samples = mi_est.grad, mi_est.n_samples
    grad = pg.grad + cfg.lambda_mi * mi_grad
    diag = {
        "reward_term_norm": float(np.linalg.norm(pg.grad)),
        "mi_term_norm": float(np.linalg.norm(cfg.lambda_mi * mi_grad)),
    }
    return GradEstimate(grad=grad, n_samples=mi_samples, diagnostics=diag)


def augmented_objective_exact(params: PolicyParams, game: MatrixGameSpec,
                              cfg: ObjectiveConfig, q_row=None, q_col=None,
                              ids: tuple[int, int] = (0, 1),
                              coupling: np.ndarray | None = None) -> float:
    return exact_objective(params, game, q_row, q_col, ids) + cfg.lambda_mi * mi_objective_exact(
        params, game, ids, coupling)


def augmented_gradient_exact(params: PolicyParams, game: MatrixGameSpec,
                             cfg: ObjectiveConfig, q_row=None, q_col=None,
                             ids: tuple[int, int] = (0, 1),
                             coupling: np.ndarray | None = None) -> np.ndarray:
    return exact_policy_gradient(params, game, q_row, q_col, ids) + cfg.lambda_mi * (
        mi_gradient_exact(params, game, ids, coupling))


def augmented_step_gradient(batches: list[TrajectoryBatch],
                            values: list[ValueEstimates],
                            params: PolicyParams,
                            cfg: ObjectiveConfig) -> GradEstimate:
    """Advantage-plus-MI ascent gradient for batches played against a frozen pool.

    Only the learner's seat is parameterized here, so the score-function MI
    term reduces to the learner's own score weighted by the plug-in log ratio
    of its action against the opponent's recorded action, bucket by bucket.
    """
    if len(batches) != len(values):
        raise ValueError("need one value estimate per batch")
    arrs_all = [b.as_arrays() for b in batches]
    pairs = np.concatenate(
        [np.stack([a["actions"], a["actions_opp"]], axis=1) for a in arrs_all])
    buckets = np.concatenate([a["buckets"] for a in arrs_all])
    tables, m = _bucket_tables(pairs, buckets)
    log_w = np.empty(m)
    for b, table in tables.items():
        sel = buckets == b
        joint = table / table.sum()
        p_row = joint.sum(axis=1)
        p_col = joint.sum(axis=0)
        a_s, a_o = pairs[sel, 0], pairs[sel, 1]
        log_w[sel] = np.log(joint[a_s, a_o]) - np.log(p_row[a_s]) - np.log(p_col[a_o])
    adv = np.concatenate([v.advantage for v in values])
    if adv.shape[0] != m:
        raise ValueError("value estimates misaligned with batches")
    weights = (adv + cfg.lambda_mi * log_w) / m
    grad = np.zeros_like(params.flat)
    offset = 0
    for arrs in arrs_all:
        k = arrs["actions"].shape[0]
        grad += weighted_score_sum(
            params, arrs["states"], arrs["ids"], arrs["actions"], arrs["masks"],
            weights[offset:offset + k],
        )
        offset += k
    diag = {
        "mean_log_ratio": float(log_w.mean()),
        "mi_term_share": float(cfg.lambda_mi * np.abs(log_w).mean()
                               / max(np.abs(adv).mean(), 1e-12)),
    }
    return GradEstimate(grad=grad, n_samples=m, diagnostics=diag)


# ---------------------------------------------------------------------------
# Stage losses (diagnostics; the applied update is the PPO surrogate).


def _recomputed_log_probs(batch: TrajectoryBatch, params: PolicyParams) -> np.ndarray:
    arrs = batch.as_arrays()
    probs = forward_batch(params, arrs["states"], arrs["ids"], arrs["masks"])
    picked = probs[np.arange(len(batch)), arrs["actions"]]
    if np.any(picked <= 0.0):
        raise ValueError("taken action has zero probability under these params")
    return np.log(picked)


def mia_loss(batch_i: TrajectoryBatch, batch_ii: TrajectoryBatch,
             values_i: ValueEstimates, values_ii: ValueEstimates,
             params: PolicyParams) -> float:
    """Literal stage-1 objective evaluated in Monte-Carlo form.

    With a factorized joint the joint log-probability equals the sum of the
    seat log-probabilities, so the summand reduces to
    (q_i + q_ii - v_i - v_ii) times that shared quantity; Q identical to V
    makes the loss vanish exactly.
    """
    _check_paired(batch_i, batch_ii)
    lp_joint = _recomputed_log_probs(batch_i, params) + _recomputed_log_probs(batch_ii, params)
    weight = values_i.q + values_ii.q - values_i.v - values_ii.v
    return float((weight * lp_joint).mean())


def mia_loss_exact(params: PolicyParams, game: MatrixGameSpec,
                   q_row=None, q_col=None, v_row: float = 0.0, v_col: float = 0.0,
                   ids: tuple[int, int] = (0, 1)) -> float:
    """Enumerated stage-1 objective on a matrix game."""
    dist_row, dist_col, _, _ = exact_distributions(params, game, ids)
    p_row, p_col = _pad_joint(params, dist_row, dist_col, game)
    q_r, q_c = _q_tables(game, q_row, q_col)
    joint = np.outer(p_row, p_col)
    total = 0.0
    for a in range(game.n_actions_row):
        for b in range(game.n_actions_col):
            if joint[a, b] <= 0.0:
                continue
            lp_joint = math.log(p_row[a]) + math.log(p_col[b])
            total += joint[a, b] * ((q_r[a, b] - v_row) + (q_c[a, b] - v_col)) * lp_joint
    return total


def cam_loss(batches: Sequence[TrajectoryBatch], values: Sequence[ValueEstimates],
             specialists: Sequence[PolicyParams]) -> float:
    """Mean advantage-weighted log-likelihood of the specialists' own actions.

    Batches must have been collected against the frozen stage-1 baseline;
    anything else is rejected because the loss is defined on that state
    distribution.
    """
    if not (len(batches) == len(values) == len(specialists)) or not batches:
        raise ValueError("need one (batch, values, params) triple per specialist")
    total = 0.0
    for batch, est, params in zip(batches, values, specialists):
        if "frozen_mia" not in batch.collected_vs:
            raise ValueError("cam_loss requires batches collected against the frozen baseline")
        lp = _recomputed_log_probs(batch, params)
        total += float(((est.q - est.v) * lp).mean())
    return total / len(batches)


def cam_loss_exact(specialist: PolicyParams, game: MatrixGameSpec, seat: int,
                   opponent_dist: np.ndarray, v_value: float = 0.0,
                   agent_id: int = 0) -> float:
    """Single-agent enumerated variant against a fixed opponent mixture."""
    state = np.zeros(1)
    mask = seat_mask(game, seat, specialist.n_actions)
    dist = forward(specialist, state, agent_id, mask)
    n_self = game.n_actions_row if seat == 0 else game.n_actions_col
    probs = dist.probs[:n_self]
    opponent_dist = np.asarray(opponent_dist, dtype=np.float64)
    payoff = game.payoff if seat == 0 else -game.payoff.T
    q_vals = payoff @ opponent_dist
    total = 0.0
    for a in range(n_self):
        if probs[a] <= 0.0:
            continue
        total += probs[a] * (q_vals[a] - v_value) * math.log(probs[a])
    return total


# ---------------------------------------------------------------------------
# Applied update rule.


def ppo_surrogate(batches, values, params_new: PolicyParams, cfg: ObjectiveConfig,
                  params_old: PolicyParams | None = None) -> tuple[float, GradEstimate]:
    """Clipped-ratio surrogate loss and its exact ascent gradient.

    Old log-probabilities default to the ones recorded at collection time;
    pass ``params_old`` to recompute them instead. The returned gradient is
    for the surrogate objective (the negated loss), ready for ascent steps.
    """
    batches, values = _as_lists(batches, values)
    states = np.concatenate([b.as_arrays()["states"] for b in batches])
    ids = np.concatenate([b.as_arrays()["ids"] for b in batches])
    actions = np.concatenate([b.as_arrays()["actions"] for b in batches])
    masks = np.concatenate([b.as_arrays()["masks"] for b in batches])
    advantage = np.concatenate([est.advantage for est in values])
    if params_old is None:
        old_lp = np.concatenate([b.as_arrays()["log_probs"] for b in batches])
    else:
        old_lp = np.concatenate([_recomputed_log_probs(b, params_old) for b in batches])

    probs = forward_batch(params_new, states, ids, masks)
    picked = probs[np.arange(states.shape[0]), actions]
    if np.any(picked <= 0.0):
        raise ValueError("taken action has zero probability under params_new")
    new_lp = np.log(picked)
    ratio = np.exp(new_lp - old_lp)
    lo, hi = 1.0 - cfg.ppo_clip, 1.0 + cfg.ppo_clip
    unclipped = ratio * advantage
    clipped = np.clip(ratio, lo, hi) * advantage
    per_sample = np.minimum(unclipped, clipped)
    m = per_sample.size
    loss = float(-per_sample.mean())

    # The clipped branch is constant in the params wherever it is strictly
    # smaller, so only unclipped-active samples carry gradient.
    active = unclipped <= clipped
    weights = np.where(active, ratio * advantage, 0.0) / m
    grad = weighted_score_sum(params_new, states, ids, actions, masks, weights)
    diag = {
        "surrogate_objective": -loss,
        "mean_ratio": float(ratio.mean()),
        "clip_fraction": float(1.0 - active.mean()),
    }
    return loss, GradEstimate(grad=grad, n_samples=m, diagnostics=diag)


def value_loss_and_grad(batches, values, params: PolicyParams) -> tuple[float, np.ndarray]:
    """Mean-squared value regression loss and the ascent gradient of its negation."""
    batches, values = _as_lists(batches, values)
    states = np.concatenate([b.as_arrays()["states"] for b in batches])
    ids = np.concatenate([b.as_arrays()["ids"] for b in batches])
    q = np.concatenate([est.q for est in values])
    v = value_batch(params, states, ids)
    err = v - q
    m = err.size
    mse = float((err * err).mean())
    grad = weighted_value_grad_sum(params, states, ids, -2.0 * err / m)
    return mse, grad


def clip_grad_norm(grad: np.ndarray, max_norm: float) -> np.ndarray:
    """Rescale the gradient onto the max_norm ball when it overshoots."""
    if max_norm <= 0.0:
        raise ValueError("max_norm must be positive")
    norm = float(np.linalg.norm(grad))
    if norm > max_norm:
        return grad * (max_norm / norm)
    return np.array(grad, dtype=np.float64)


def sgd_step(params: PolicyParams, grad: np.ndarray, learning_rate: float) -> PolicyParams:
    """Plain ascent step: params plus learning_rate times gradient."""
    grad = np.asarray(grad, dtype=np.float64)
    if grad.shape != params.flat.shape:
        raise ValueError("gradient shape differs from the parameter vector")
    if not np.all(np.isfinite(grad)):
        raise ValueError("non-finite gradient")
    if not (math.isfinite(learning_rate) and learning_rate > 0.0):
        raise ValueError("learning rate must be positive and finite")
    return params.with_flat(params.flat + learning_rate * grad)
