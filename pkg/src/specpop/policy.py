"""Conditional policy over (state, member id) with two parameterizations.

``tabular_softmax`` keeps one logit row and one value cell per
(state index, id). ``mlp`` is a single hidden layer over the observation
concatenated with a one-hot id; policy head, value head, and the shared
trunk all live in one flat float64 vector, and every gradient here is
derived by hand so it can be checked against finite differences.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "PolicyParams",
    "ActionDistribution",
    "init_tabular",
    "init_mlp",
    "masked_softmax",
    "action_logits",
    "forward",
    "forward_batch",
    "sample",
    "log_prob",
    "joint_log_prob",
    "grad_log_prob",
    "logit_jacobian",
    "weighted_score_sum",
    "value",
    "value_batch",
    "grad_value",
    "weighted_value_grad_sum",
    "params_digest",
    "clone_for_specialist",
    "param_count",
]

KINDS = ("tabular_softmax", "mlp")

_PROB_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class PolicyParams:
    """Immutable snapshot of one policy's parameters.

    ``flat`` is the single source of truth; layout depends on ``kind``.
    Updates produce new snapshots (see ``specpop.objectives.sgd_step``).
    """

    kind: str
    flat: np.ndarray
    n_ids: int
    n_actions: int
    n_states: int = 0
    obs_dim: int = 0
    hidden: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown policy kind {self.kind!r}")
        if self.n_ids < 1 or self.n_actions < 1:
            raise ValueError("need at least one id and one action")
        flat = np.asarray(self.flat, dtype=np.float64)
        if flat.ndim != 1:
            raise ValueError("flat parameter vector must be 1-D")
        expected = param_count(
            self.kind, n_ids=self.n_ids, n_actions=self.n_actions,
            n_states=self.n_states, obs_dim=self.obs_dim, hidden=self.hidden,
        )
        if flat.size != expected:
            raise ValueError(f"expected {expected} parameters, got {flat.size}")
        flat = flat.copy()
        flat.setflags(write=False)
        object.__setattr__(self, "flat", flat)

    def with_flat(self, flat: np.ndarray) -> "PolicyParams":
        return replace(self, flat=flat)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "n_ids": self.n_ids,
            "n_actions": self.n_actions,
            "n_states": self.n_states,
            "obs_dim": self.obs_dim,
            "hidden": self.hidden,
        }


def param_count(kind: str, *, n_ids: int, n_actions: int, n_states: int = 0,
                obs_dim: int = 0, hidden: int = 0) -> int:
    if kind == "tabular_softmax":
        if n_states < 1:
            raise ValueError("tabular policies need n_states >= 1")
        return n_states * n_ids * n_actions + n_states * n_ids
    if kind == "mlp":
        if obs_dim < 1 or hidden < 1:
            raise ValueError("mlp policies need obs_dim >= 1 and hidden >= 1")
        d_in = obs_dim + n_ids
        return d_in * hidden + hidden + hidden * n_actions + n_actions + hidden + 1
    raise ValueError(f"unknown policy kind {kind!r}")


def init_tabular(n_states: int, n_ids: int, n_actions: int) -> PolicyParams:
    """Zero logits (uniform play) and a zero value table."""
    size = param_count("tabular_softmax", n_ids=n_ids, n_actions=n_actions, n_states=n_states)
    return PolicyParams(
        kind="tabular_softmax", flat=np.zeros(size), n_ids=n_ids,
        n_actions=n_actions, n_states=n_states,
    )


def init_mlp(obs_dim: int, n_ids: int, n_actions: int, hidden: int,
             rng: np.random.Generator) -> PolicyParams:
    """All weights and biases uniform in [-0.05, 0.05]."""
    size = param_count("mlp", n_ids=n_ids, n_actions=n_actions, obs_dim=obs_dim, hidden=hidden)
    flat = rng.uniform(-0.05, 0.05, size=size)
    return PolicyParams(
        kind="mlp", flat=flat, n_ids=n_ids, n_actions=n_actions,
        obs_dim=obs_dim, hidden=hidden,
    )


def _tab_views(params: PolicyParams) -> tuple[np.ndarray, np.ndarray]:
    s, i, a = params.n_states, params.n_ids, params.n_actions
    cut = s * i * a
    logits = params.flat[:cut].reshape(s, i, a)
    values = params.flat[cut:].reshape(s, i)
    return logits, values


def _mlp_views(params: PolicyParams):
    d_in = params.obs_dim + params.n_ids
    h, a = params.hidden, params.n_actions
    flat = params.flat
    off = 0
    w1 = flat[off:off + d_in * h].reshape(d_in, h); off += d_in * h
    b1 = flat[off:off + h]; off += h
    wp = flat[off:off + h * a].reshape(h, a); off += h * a
    bp = flat[off:off + a]; off += a
    wv = flat[off:off + h]; off += h
    bv = flat[off:off + 1]
    return w1, b1, wp, bp, wv, bv


def _mlp_offsets(params: PolicyParams) -> dict[str, tuple[int, int]]:
    d_in = params.obs_dim + params.n_ids
    h, a = params.hidden, params.n_actions
    sizes = [("w1", d_in * h), ("b1", h), ("wp", h * a), ("bp", a), ("wv", h), ("bv", 1)]
    out, off = {}, 0
    for name, size in sizes:
        out[name] = (off, off + size)
        off += size
    return out


@dataclass(frozen=True, slots=True, eq=False)
class ActionDistribution:
    """Masked categorical distribution; masked actions carry exactly zero mass."""

    probs: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        probs = np.asarray(self.probs, dtype=np.float64)
        mask = np.asarray(self.mask, dtype=bool)
        if probs.shape != mask.shape:
            raise ValueError("probs and mask shapes differ")
        if np.any(probs[~mask] != 0.0):
            raise ValueError("masked actions must have exactly zero probability")
        if abs(probs.sum() - 1.0) > _PROB_TOL:
            raise ValueError("probabilities must sum to 1")
        if np.any(probs < 0.0):
            raise ValueError("negative probability")
        probs.setflags(write=False)
        object.__setattr__(self, "probs", probs)
        object.__setattr__(self, "mask", mask)

    @property
    def n_actions(self) -> int:
        return self.probs.size


def masked_softmax(logits: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Softmax with unavailable logits treated as negative infinity."""
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("degenerate mask: no action available")
    shifted = np.where(mask, logits, -np.inf)
    shifted = shifted - shifted.max()
    expd = np.where(mask, np.exp(shifted), 0.0)
    return expd / expd.sum()


def _state_index(params: PolicyParams, state: np.ndarray) -> int:
    idx = int(round(float(np.asarray(state).reshape(-1)[0])))
    if not (0 <= idx < params.n_states):
        raise ValueError(f"state index {idx} outside [0, {params.n_states})")
    return idx


def _check_id(params: PolicyParams, agent_id: int) -> int:
    if not (0 <= agent_id < params.n_ids):
        raise ValueError(f"agent id {agent_id} outside [0, {params.n_ids})")
    return int(agent_id)


def action_logits(params: PolicyParams, state: np.ndarray, agent_id: int) -> np.ndarray:
    """Raw pre-mask logits for one (state, id) query."""
    if params.kind == "tabular_softmax":
        logits, _ = _tab_views(params)
        return np.array(logits[_state_index(params, state), _check_id(params, agent_id)])
    w1, b1, wp, bp, _, _ = _mlp_views(params)
    x = _mlp_input(params, state, agent_id)
    h = np.tanh(x @ w1 + b1)
    return h @ wp + bp


def _mlp_input(params: PolicyParams, state: np.ndarray, agent_id: int) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64).reshape(-1)
    if state.size != params.obs_dim:
        raise ValueError(f"expected obs of size {params.obs_dim}, got {state.size}")
    onehot = np.zeros(params.n_ids)
    onehot[_check_id(params, agent_id)] = 1.0
    return np.concatenate([state, onehot])


def forward(params: PolicyParams, state: np.ndarray, agent_id: int,
            mask: np.ndarray) -> ActionDistribution:
    """Action distribution for one (state, id) query under the mask."""
    mask = np.asarray(mask, dtype=bool)
    if mask.size != params.n_actions:
        raise ValueError("mask length differs from the action space")
    probs = masked_softmax(action_logits(params, state, agent_id), mask)
    return ActionDistribution(probs=probs, mask=mask)


def forward_batch(params: PolicyParams, states: np.ndarray, ids: np.ndarray,
                  masks: np.ndarray) -> np.ndarray:
    """Row-wise action probabilities for a batch of (state, id, mask)."""
    states = np.asarray(states, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    masks = np.asarray(masks, dtype=bool)
    m = states.shape[0]
    if params.kind == "tabular_softmax":
        logits_tab, _ = _tab_views(params)
        s_idx = np.rint(states[:, 0]).astype(np.int64)
        logits = logits_tab[s_idx, ids]
    else:
        x = _batch_input(params, states, ids)
        w1, b1, wp, bp, _, _ = _mlp_views(params)
        h = np.tanh(x @ w1 + b1)
        logits = h @ wp + bp
    shifted = np.where(masks, logits, -np.inf)
    shifted = shifted - shifted.max(axis=1, keepdims=True)
    expd = np.where(masks, np.exp(shifted), 0.0)
    probs = expd / expd.sum(axis=1, keepdims=True)
    assert probs.shape == (m, params.n_actions)
    return probs


def _batch_input(params: PolicyParams, states: np.ndarray, ids: np.ndarray) -> np.ndarray:
    m = states.shape[0]
    onehot = np.zeros((m, params.n_ids))
    onehot[np.arange(m), ids] = 1.0
    return np.concatenate([states, onehot], axis=1)


def sample(dist: ActionDistribution, rng: np.random.Generator) -> int:
    """Inverse-CDF draw; deterministic given the generator state."""
    u = rng.random()
    cum = np.cumsum(dist.probs)
    action = int(np.searchsorted(cum, u, side="right"))
    return min(action, dist.n_actions - 1)


def log_prob(dist: ActionDistribution, action: int) -> float:
    p = dist.probs[action]
    if p <= 0.0:
        raise ValueError(f"action {action} has zero probability")
    return float(np.log(p))


def joint_log_prob(params: PolicyParams, state: np.ndarray,
                   action_i: int, action_ii: int, id_i: int, id_ii: int,
                   mask_i: np.ndarray, mask_ii: np.ndarray) -> float:
    """Log of the factorized joint: the two conditionals simply add."""
    lp_i = log_prob(forward(params, state, id_i, mask_i), action_i)
    lp_ii = log_prob(forward(params, state, id_ii, mask_ii), action_ii)
    return lp_i + lp_ii


def grad_log_prob(params: PolicyParams, state: np.ndarray, agent_id: int,
                  action: int, mask: np.ndarray) -> np.ndarray:
    """Exact gradient of log pi(action | state, id) in flat layout."""
    dist = forward(params, state, agent_id, mask)
    if not dist.mask[action]:
        raise ValueError("gradient of a masked action is undefined")
    dlogits = -dist.probs.copy()
    dlogits[action] += 1.0
    return _backprop_logits(params, state, agent_id, dlogits)


def _backprop_logits(params: PolicyParams, state: np.ndarray, agent_id: int,
                     dlogits: np.ndarray) -> np.ndarray:
    grad = np.zeros_like(params.flat)
    if params.kind == "tabular_softmax":
        s, i, a = params.n_states, params.n_ids, params.n_actions
        row = (_state_index(params, state) * i + _check_id(params, agent_id)) * a
        grad[row:row + a] = dlogits
        return grad
    offs = _mlp_offsets(params)
    w1, b1, wp, bp, _, _ = _mlp_views(params)
    x = _mlp_input(params, state, agent_id)
    h = np.tanh(x @ w1 + b1)
    dwp = np.outer(h, dlogits)
    dh = wp @ dlogits
    dz = (1.0 - h * h) * dh
    grad[slice(*offs["wp"])] = dwp.reshape(-1)
    grad[slice(*offs["bp"])] = dlogits
    grad[slice(*offs["w1"])] = np.outer(x, dz).reshape(-1)
    grad[slice(*offs["b1"])] = dz
    return grad


def logit_jacobian(params: PolicyParams, state: np.ndarray, agent_id: int) -> np.ndarray:
    """d logits / d params as an (n_actions, n_params) matrix."""
    rows = []
    for a in range(params.n_actions):
        unit = np.zeros(params.n_actions)
        unit[a] = 1.0
        rows.append(_backprop_logits(params, state, agent_id, unit))
    return np.stack(rows)


def weighted_score_sum(params: PolicyParams, states: np.ndarray, ids: np.ndarray,
                       actions: np.ndarray, masks: np.ndarray,
                       weights: np.ndarray) -> np.ndarray:
    """sum_t weights[t] * grad log pi(a_t | s_t, id_t), batched.

    The heavy path for every update rule; matches looping grad_log_prob
    but runs as a handful of matrix products.
    """
    states = np.asarray(states, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    masks = np.asarray(masks, dtype=bool)
    weights = np.asarray(weights, dtype=np.float64)
    m = states.shape[0]
    probs = forward_batch(params, states, ids, masks)
    dlogits = -probs
    dlogits[np.arange(m), actions] += 1.0
    dlogits *= weights[:, None]

    grad = np.zeros_like(params.flat)
    if params.kind == "tabular_softmax":
        s, i, a = params.n_states, params.n_ids, params.n_actions
        s_idx = np.rint(states[:, 0]).astype(np.int64)
        rows = (s_idx * i + ids) * a
        flat_idx = rows[:, None] + np.arange(a)[None, :]
        np.add.at(grad, flat_idx.reshape(-1), dlogits.reshape(-1))
        return grad
    offs = _mlp_offsets(params)
    w1, b1, wp, bp, _, _ = _mlp_views(params)
    x = _batch_input(params, states, ids)
    h = np.tanh(x @ w1 + b1)
    dh = dlogits @ wp.T
    dz = (1.0 - h * h) * dh
    grad[slice(*offs["wp"])] = (h.T @ dlogits).reshape(-1)
    grad[slice(*offs["bp"])] = dlogits.sum(axis=0)
    grad[slice(*offs["w1"])] = (x.T @ dz).reshape(-1)
    grad[slice(*offs["b1"])] = dz.sum(axis=0)
    return grad


def value(params: PolicyParams, state: np.ndarray, agent_id: int) -> float:
    """State value V(state, id) from the value head."""
    if params.kind == "tabular_softmax":
        _, values = _tab_views(params)
        return float(values[_state_index(params, state), _check_id(params, agent_id)])
    w1, b1, _, _, wv, bv = _mlp_views(params)
    x = _mlp_input(params, state, agent_id)
    h = np.tanh(x @ w1 + b1)
    return float(h @ wv + bv[0])


def value_batch(params: PolicyParams, states: np.ndarray, ids: np.ndarray) -> np.ndarray:
    states = np.asarray(states, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    if params.kind == "tabular_softmax":
        _, values = _tab_views(params)
        s_idx = np.rint(states[:, 0]).astype(np.int64)
        return values[s_idx, ids].astype(np.float64)
    w1, b1, _, _, wv, bv = _mlp_views(params)
    x = _batch_input(params, states, ids)
    h = np.tanh(x @ w1 + b1)
    return h @ wv + bv[0]


def grad_value(params: PolicyParams, state: np.ndarray, agent_id: int) -> np.ndarray:
    """Exact gradient of V(state, id); shares the trunk with the policy head."""
    grad = np.zeros_like(params.flat)
    if params.kind == "tabular_softmax":
        s, i, _ = params.n_states, params.n_ids, params.n_actions
        base = s * i * params.n_actions
        grad[base + _state_index(params, state) * i + _check_id(params, agent_id)] = 1.0
        return grad
    offs = _mlp_offsets(params)
    w1, b1, _, _, wv, _ = _mlp_views(params)
    x = _mlp_input(params, state, agent_id)
    h = np.tanh(x @ w1 + b1)
    dz = (1.0 - h * h) * wv
    grad[slice(*offs["wv"])] = h
    grad[slice(*offs["bv"])] = 1.0
    grad[slice(*offs["w1"])] = np.outer(x, dz).reshape(-1)
    grad[slice(*offs["b1"])] = dz
    return grad


def weighted_value_grad_sum(params: PolicyParams, states: np.ndarray, ids: np.ndarray,
                            weights: np.ndarray) -> np.ndarray:
    """sum_t weights[t] * grad V(s_t, id_t), batched."""
    states = np.asarray(states, dtype=np.float64)
    ids = np.asarray(ids, dtype=np.int64)
    weights = np.asarray(weights, dtype=np.float64)
    grad = np.zeros_like(params.flat)
    if params.kind == "tabular_softmax":
        s, i, a = params.n_states, params.n_ids, params.n_actions
        base = s * i * a
        s_idx = np.rint(states[:, 0]).astype(np.int64)
        np.add.at(grad, base + s_idx * i + ids, weights)
        return grad
    offs = _mlp_offsets(params)
    w1, b1, _, _, wv, _ = _mlp_views(params)
    x = _batch_input(params, states, ids)
    h = np.tanh(x @ w1 + b1)
    dz = (1.0 - h * h) * (weights[:, None] * wv[None, :])
    grad[slice(*offs["wv"])] = weights @ h
    grad[slice(*offs["bv"])] = weights.sum()
    grad[slice(*offs["w1"])] = (x.T @ dz).reshape(-1)
    grad[slice(*offs["b1"])] = dz.sum(axis=0)
    return grad


def params_digest(params: PolicyParams) -> str:
    """Hex digest of the parameter vector plus its structural descriptor."""
    h = hashlib.sha256()
    h.update(repr(sorted(params.describe().items())).encode())
    h.update(params.flat.tobytes())
    return h.hexdigest()


def clone_for_specialist(params: PolicyParams, agent_id: int) -> PolicyParams:
    """Independent copy whose outputs are bit-identical until it trains."""
    if not (0 <= agent_id < params.n_ids):
        raise ValueError(f"agent id {agent_id} outside [0, {params.n_ids})")
    return params.with_flat(params.flat.copy())
