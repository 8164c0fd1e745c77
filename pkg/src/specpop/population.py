"""Population training loops: opponent pools, match running, both stages.

Stage 1 trains one id-conditioned policy against a growing pool of its own
frozen past generations, with opponents drawn by prioritized weighting.
Stage 2 clones that policy into per-member specialists and fine-tunes each
against the frozen stage-1 baseline (optionally plus the other specialists).
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .core import Transition, TrajectoryBatch
from .objectives import (
    ObjectiveConfig,
    ValueEstimates,
    augmented_step_gradient,
    cam_loss,
    clip_grad_norm,
    compute_value_estimates,
    estimate_J,
    mia_loss,
    mutual_information_sampled,
    normalize_advantages,
    ppo_surrogate,
    sgd_step,
    value_loss_and_grad,
)
from .policy import (
    PolicyParams,
    clone_for_specialist,
    forward,
    log_prob,
    params_digest,
    sample,
)
from .runtime import parallel_map, rng_stream

_MAX_TICKS = 10_000


# ---------------------------------------------------------------------------
# Pool bookkeeping types.


@dataclass(frozen=True)
class PolicyHandle:
    """One playable entity: parameters plus the member id they are queried with.

    ``agent_id`` of None means "conditional policy, pick a compatible id per
    episode"; recorded sides of a match always need a concrete id.
    """

    params: PolicyParams
    agent_id: int | None
    label: str = ""


@dataclass(frozen=True)
class PayoffMatrix:
    """Empirical win rates between two lists of entities, with game counts."""

    u: np.ndarray
    games: np.ndarray
    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        u = np.asarray(self.u, dtype=np.float64)
        games = np.asarray(self.games, dtype=np.int64)
        if u.ndim != 2 or games.shape != u.shape:
            raise ValueError("u and games must be matching 2-D arrays")
        if not np.all(np.isfinite(u)) or u.min() < 0.0 or u.max() > 1.0:
            raise ValueError("win rates must lie in [0, 1]")
        if len(self.row_labels) != u.shape[0] or len(self.col_labels) != u.shape[1]:
            raise ValueError("label count does not match matrix shape")
        u.flags.writeable = False
        games.flags.writeable = False
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "games", games)

    @property
    def square(self) -> bool:
        return self.u.shape[0] == self.u.shape[1]

    def check_antisymmetric(self, tol: float = 0.0) -> bool:
        """Intra-population invariant: u[x, y] + u[y, x] == 1, diagonal 1/2."""
        if not self.square:
            return False
        return bool(
            np.all(np.abs(self.u + self.u.T - 1.0) <= tol)
            and np.all(np.abs(np.diag(self.u) - 0.5) <= tol)
        )


@dataclass(frozen=True)
class InteractionGraph:
    """Row-stochastic opponent-selection weights over a pool."""

    sigma: np.ndarray

    def __post_init__(self) -> None:
        sigma = np.asarray(self.sigma, dtype=np.float64)
        if sigma.ndim != 2:
            raise ValueError("sigma must be 2-D")
        if sigma.min() < 0.0:
            raise ValueError("negative selection weight")
        if np.abs(sigma.sum(axis=1) - 1.0).max() > 1e-9:
            raise ValueError("rows must sum to 1 within 1e-9")
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class GenerationEntry:
    index: int
    stage: str
    params: PolicyParams
    meta: dict


class GenerationStore:
    """Append-only list of frozen policy snapshots with contiguous indices."""

    def __init__(self) -> None:
        self._entries: list[GenerationEntry] = []

    def append(self, params: PolicyParams, stage: str, meta: dict | None = None) -> int:
        index = len(self._entries)
        self._entries.append(GenerationEntry(index, stage, params, dict(meta or {})))
        return index

    def params_at(self, index: int) -> PolicyParams:
        return self._entries[index].params

    def last(self) -> GenerationEntry:
        if not self._entries:
            raise IndexError("empty store")
        return self._entries[-1]

    def entries(self) -> tuple[GenerationEntry, ...]:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)


# ---------------------------------------------------------------------------
# Prioritized opponent selection.


def pfsp_weights(u_row: np.ndarray, exponent: float = 1.0,
                 exclude: int | None = None) -> np.ndarray:
    """Selection weights proportional to (1 - win_rate) ** exponent.

    Opponents the entity already beats reliably get little weight; if every
    candidate weight vanishes the distribution falls back to uniform over the
    allowed entries.
    """
    u_row = np.asarray(u_row, dtype=np.float64)
    if u_row.ndim != 1 or u_row.size == 0:
        raise ValueError("u_row must be a nonempty vector")
    if not np.all(np.isfinite(u_row)) or u_row.min() < 0.0 or u_row.max() > 1.0:
        raise ValueError("win rates must lie in [0, 1]")
    if exponent < 0.0:
        raise ValueError("exponent must be nonnegative")
    w = (1.0 - u_row) ** exponent
    if exclude is not None:
        w = w.copy()
        w[exclude] = 0.0
    total = w.sum()
    if total <= 0.0:
        w = np.ones_like(u_row)
        if exclude is not None:
            w[exclude] = 0.0
        total = w.sum()
        if total <= 0.0:
            raise ValueError("no candidate opponents left")
    return w / total


def graph_solve(payoff: PayoffMatrix | np.ndarray, exponent: float = 1.0) -> InteractionGraph:
    """Prioritized interaction graph from a square intra-population payoff."""
    u = payoff.u if isinstance(payoff, PayoffMatrix) else np.asarray(payoff, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] != u.shape[1]:
        raise ValueError("need a square payoff matrix")
    if u.shape[0] < 2:
        raise ValueError("need at least two entities")
    rows = [pfsp_weights(u[x], exponent, exclude=x) for x in range(u.shape[0])]
    return InteractionGraph(sigma=np.stack(rows))


def sample_opponent(weights: np.ndarray, rng: np.random.Generator) -> int:
    """Inverse-CDF draw of one pool index from a normalized weight row."""
    weights = np.asarray(weights, dtype=np.float64)
    if weights.min() < 0.0 or abs(weights.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be a normalized distribution")
    cum = np.cumsum(weights)
    cum[-1] = 1.0
    return int(np.searchsorted(cum, rng.random(), side="right"))


def convergence_check(history: list[float], threshold: float = 0.076,
                      patience: int = 2) -> bool:
    """True when the last ``patience`` win rates all sit within the draw band."""
    if patience < 1:
        raise ValueError("patience must be at least 1")
    if len(history) < patience:
        return False
    return all(abs(w - 0.5) <= threshold for w in history[-patience:])


# ---------------------------------------------------------------------------
# Match running and batch collection.


def run_match(factory, handle_0: PolicyHandle, handle_1: PolicyHandle,
              rng: np.random.Generator, n_buckets: int = 16,
              record: tuple[bool, bool] = (True, True)):
    """Play one episode, optionally recording transitions for either side.

    Returns (transitions side 0, transitions side 1, final outcome). Draw
    order is fixed (side 0 acts from the generator first each tick) so runs
    are reproducible from the generator seed alone.
    """
    for side, handle in ((0, handle_0), (1, handle_1)):
        if handle.agent_id is None:
            raise ValueError(f"side {side} handle needs a concrete agent id")
    match = factory.make_match(handle_0.agent_id, handle_1.agent_id)
    state = match.reset(rng)
    trans: tuple[list, list] = ([], [])
    handles = (handle_0, handle_1)
    for _ in range(_MAX_TICKS):
        obs = [match.obs(state, s) for s in (0, 1)]
        masks = [match.mask(state, s) for s in (0, 1)]
        dists = [
            forward(handles[s].params, obs[s], handles[s].agent_id, masks[s])
            for s in (0, 1)
        ]
        acts = [sample(dists[s], rng) for s in (0, 1)]
        buckets = [match.bucket(state, s, n_buckets) for s in (0, 1)]
        next_state, rewards, done = match.step(state, acts[0], acts[1])
        for s in (0, 1):
            if record[s]:
                trans[s].append(Transition(
                    state=obs[s],
                    action_self=acts[s],
                    action_opp=acts[1 - s],
                    reward=rewards[s],
                    next_state=match.obs(next_state, s),
                    done=done,
                    mask_self=masks[s],
                    log_prob_self=log_prob(dists[s], acts[s]),
                    id_self=handles[s].agent_id,
                    id_opp=handles[1 - s].agent_id,
                    bucket=buckets[s],
                ))
        state = next_state
        if done:
            return trans[0], trans[1], match.outcome(state)
    raise RuntimeError("match exceeded the hard tick cap")


def play_series(factory, handle_a: PolicyHandle, handle_b: PolicyHandle,
                games: int, rng: np.random.Generator,
                n_buckets: int = 16) -> float:
    """Win rate of a against b over ``games`` episodes, alternating sides."""
    if games < 1:
        raise ValueError("need at least one game")
    points = 0.0
    for g in range(games):
        if g % 2 == 0:
            _, _, out = run_match(factory, handle_a, handle_b, rng, n_buckets,
                                  record=(False, False))
            points += out.score_i()
        else:
            _, _, out = run_match(factory, handle_b, handle_a, rng, n_buckets,
                                  record=(False, False))
            points += 1.0 - out.score_i()
    return points / games


def cycled_series(factory, handle_a: PolicyHandle, opponents: list[PolicyHandle],
                  games: int, rng: np.random.Generator) -> float:
    """Win rate of one entity over a fixed rotation of opponents."""
    if not opponents:
        raise ValueError("need at least one opponent")
    if games < 1:
        raise ValueError("need at least one game")
    points = 0.0
    for g in range(games):
        opp = opponents[g % len(opponents)]
        if g % 2 == 0:
            _, _, out = run_match(factory, handle_a, opp, rng, record=(False, False))
            points += out.score_i()
        else:
            _, _, out = run_match(factory, opp, handle_a, rng, record=(False, False))
            points += 1.0 - out.score_i()
    return points / games


def conditional_series(factory, params_a: PolicyParams, params_b: PolicyParams,
                       n_ids: int, games: int, rng: np.random.Generator) -> float:
    """Win rate of conditional policy a against b, cycling compatible id pairs.

    The ordered-pair cycle covers both seatings of every id pair, so neither
    policy owes its score to a fixed side.
    """
    pairs = factory.compatible_pairs(n_ids)
    if not pairs:
        raise ValueError("population has no playable id pair")
    points = 0.0
    for g in range(games):
        ka, kb = pairs[g % len(pairs)]
        _, _, out = run_match(factory, PolicyHandle(params_a, ka),
                              PolicyHandle(params_b, kb), rng, record=(False, False))
        points += out.score_i()
    return points / games


def _opponent_ids(factory, learner_id: int, n_ids: int) -> list[int]:
    ids = [j for j in range(n_ids) if j != learner_id and factory.compatible(learner_id, j)]
    if not ids:
        raise ValueError(f"member {learner_id} has no compatible opponent id")
    return ids


def npl_collect(factory, params: PolicyParams, agent_id: int, sigma: np.ndarray,
                sources: list[PolicyHandle], episodes: int, n_buckets: int,
                rng: np.random.Generator, tag: str, n_ids: int) -> TrajectoryBatch:
    """Collect a learner batch against pool opponents drawn from ``sigma``.

    Sources with a concrete id are played as-is; conditional sources get a
    uniformly drawn compatible opponent id per episode.
    """
    sigma = np.asarray(sigma, dtype=np.float64)
    if sigma.shape != (len(sources),):
        raise ValueError("sigma length must match the source pool")
    transitions: list[Transition] = []
    starts: list[int] = []
    learner = PolicyHandle(params, agent_id)
    for _ in range(episodes):
        k = sample_opponent(sigma, rng)
        src = sources[k]
        opp_id = src.agent_id
        if opp_id is None:
            choices = _opponent_ids(factory, agent_id, n_ids)
            opp_id = choices[int(rng.integers(len(choices)))]
        starts.append(len(transitions))
        got, _, _ = run_match(factory, learner, PolicyHandle(src.params, opp_id),
                              rng, n_buckets, record=(True, False))
        transitions.extend(got)
    return TrajectoryBatch(transitions=tuple(transitions), agent=agent_id,
                           episode_starts=tuple(starts), collected_vs=tag)


def collect_paired(factory, params: PolicyParams, id_pair: tuple[int, int],
                   episodes: int, n_buckets: int, rng: np.random.Generator,
                   tag: str) -> tuple[TrajectoryBatch, TrajectoryBatch]:
    """Self-play episodes with both sides recorded under the same parameters."""
    trans: tuple[list, list] = ([], [])
    starts: list[int] = []
    h0 = PolicyHandle(params, id_pair[0])
    h1 = PolicyHandle(params, id_pair[1])
    for _ in range(episodes):
        starts.append(len(trans[0]))
        t0, t1, _ = run_match(factory, h0, h1, rng, n_buckets, record=(True, True))
        trans[0].extend(t0)
        trans[1].extend(t1)
    return (
        TrajectoryBatch(tuple(trans[0]), id_pair[0], tuple(starts), collected_vs=tag),
        TrajectoryBatch(tuple(trans[1]), id_pair[1], tuple(starts), collected_vs=tag),
    )


# ---------------------------------------------------------------------------
# Worker task entry points (module level so they pickle).


def _conditional_series_task(payload):
    factory, params_a, params_b, n_ids, games, master_seed, key = payload
    return conditional_series(factory, params_a, params_b, n_ids, games,
                              rng_stream(master_seed, *key))


def _series_task(payload):
    factory, handle_a, handle_b, games, master_seed, key = payload
    return play_series(factory, handle_a, handle_b, games,
                       rng_stream(master_seed, *key))


def _cycled_series_task(payload):
    factory, handle_a, opponents, games, master_seed, key = payload
    return cycled_series(factory, handle_a, opponents, games,
                         rng_stream(master_seed, *key))


def _collect_task(payload):
    (factory, params, agent_id, sigma, sources, episodes, n_buckets, tag,
     n_ids, master_seed, key) = payload
    return npl_collect(factory, params, agent_id, np.asarray(sigma), sources,
                       episodes, n_buckets, rng_stream(master_seed, *key), tag,
                       n_ids)


# ---------------------------------------------------------------------------
# Gradient updates shared by both stages.


def _normalized_values(batches, params: PolicyParams, cfg: ObjectiveConfig):
    """Raw and (optionally) advantage-normalized value estimates."""
    raw = [compute_value_estimates(b, params, cfg) for b in batches]
    if not cfg.advantage_normalization:
        return raw, raw
    flat = np.concatenate([v.advantage for v in raw])
    normed = normalize_advantages(flat)
    out = []
    offset = 0
    for v in raw:
        k = v.advantage.shape[0]
        out.append(ValueEstimates(q=v.q, v=v.v, advantage=normed[offset:offset + k]))
        offset += k
    return raw, out


def ppo_update(params: PolicyParams, batches, cfg: ObjectiveConfig,
               epochs: int, update_mode: str = "ppo") -> tuple[PolicyParams, dict]:
    """Several ascent epochs of the clipped surrogate plus value regression.

    Policy and value gradients are norm-clipped separately before the summed
    step, so a blown-up value error cannot erase the policy signal.
    """
    if epochs < 1:
        raise ValueError("need at least one epoch")
    if update_mode not in ("ppo", "augmented"):
        raise ValueError(f"unknown update mode {update_mode!r}")
    diag: dict = {}
    for _ in range(epochs):
        raw, normed = _normalized_values(batches, params, cfg)
        if update_mode == "ppo":
            loss, pg = ppo_surrogate(batches, normed, params, cfg)
            diag = {"ppo_loss": float(loss), **pg.diagnostics}
        else:
            pg = augmented_step_gradient(batches, normed, params, cfg)
            diag = {"ppo_loss": float("nan"), **pg.diagnostics}
        mse, vgrad = value_loss_and_grad(batches, raw, params)
        step = clip_grad_norm(pg.grad, cfg.grad_clip) + clip_grad_norm(vgrad, cfg.grad_clip)
        params = sgd_step(params, step, cfg.learning_rate)
        diag["value_mse"] = float(mse)
    return params, diag


# ---------------------------------------------------------------------------
# Stage 1: conditional-policy population training.


@dataclass
class MiaResult:
    store: GenerationStore
    metrics: list[dict]
    history: list[float]
    converged: bool
    generations_run: int

    @property
    def params(self) -> PolicyParams:
        return self.store.last().params


def _paired_diagnostics(factory, params: PolicyParams, n_ids: int, episodes: int,
                        cfg: ObjectiveConfig, master_seed: int, gen: int) -> dict:
    """Cheap self-play probes: literal stage-1 loss, sampled MI, objective."""
    if episodes < 1:
        return {}
    pair = factory.compatible_pairs(n_ids)[0]
    rng = rng_stream(master_seed, "mia_diag", gen)
    b_i, b_ii = collect_paired(factory, params, pair, episodes, cfg.state_buckets,
                               rng, tag=f"paired_diag_gen{gen}")
    v_i = compute_value_estimates(b_i, params, cfg)
    v_ii = compute_value_estimates(b_ii, params, cfg)
    arrs_i, arrs_ii = b_i.as_arrays(), b_ii.as_arrays()
    pairs = np.stack([arrs_i["actions"], arrs_ii["actions"]], axis=1)
    return {
        "mia_loss": float(mia_loss(b_i, b_ii, v_i, v_ii, params)),
        "estimate_j": float(estimate_J([b_i, b_ii], [v_i, v_ii])),
        "mi_sampled": float(mutual_information_sampled(pairs, arrs_i["buckets"])),
    }


def train_mia(cfg, *, workers: int = 1, on_generation=None) -> MiaResult:
    """Stage-1 loop: evaluate vs the frozen pool, reweight, collect, update.

    Per generation: play the current policy against every stored snapshot to
    get a win-rate row, turn it into prioritized opponent weights, collect one
    batch per member id against sampled snapshots, apply the configured
    update, then measure the updated policy against the newest snapshot for
    the convergence history.
    """
    from .config import build_factory, initial_params

    factory = build_factory(cfg)
    ocfg = cfg.objective
    n = cfg.population_size
    eval_games = cfg.eval_games_for(factory)
    params = initial_params(cfg, factory)
    store = GenerationStore()
    store.append(params, stage="mia", meta={"generation": 0})
    history: list[float] = []
    metrics: list[dict] = []
    converged = False
    generations_run = 0

    for gen in range(1, cfg.generations + 1):
        generations_run = gen
        pool = [entry.params for entry in store.entries()]
        payloads = [
            (factory, params, pool[g], n, eval_games, cfg.master_seed,
             ("mia_u", gen, g))
            for g in range(len(pool))
        ]
        u = np.array(parallel_map(_conditional_series_task, payloads, workers))
        sigma = pfsp_weights(u, cfg.solver_exponent)
        sources = [PolicyHandle(p, None, label=f"mia_gen{g}") for g, p in enumerate(pool)]
        tag = f"pfsp_pool_gen{gen}"
        collect_payloads = [
            (factory, params, k, sigma, sources, cfg.episodes_per_generation,
             ocfg.state_buckets, tag, n, cfg.master_seed, ("mia_collect", gen, k))
            for k in range(n)
        ]
        batches = parallel_map(_collect_task, collect_payloads, workers)
        gen_cfg = ocfg
        if cfg.lr_decay > 0.0:
            scale = 1.0 / (1.0 + cfg.lr_decay * (gen - 1))
            gen_cfg = replace(ocfg, learning_rate=ocfg.learning_rate * scale)
        params, diag = ppo_update(params, batches, gen_cfg, cfg.ppo_epochs,
                                  cfg.update_mode)
        w_prev = conditional_series(factory, params, pool[-1], n, eval_games,
                                    rng_stream(cfg.master_seed, "mia_conv", gen))
        history.append(w_prev)
        store.append(params, stage="mia", meta={"generation": gen})
        record = {
            "stage": "mia",
            "generation": gen,
            "payoff_row": [float(x) for x in u],
            "sigma": [float(x) for x in sigma],
            "win_rate_vs_prev": float(w_prev),
            "gap_from_draw": float(abs(w_prev - 0.5)),
            "transitions": int(sum(len(b) for b in batches)),
            **{k: float(v) for k, v in diag.items()},
            **_paired_diagnostics(factory, params, n, cfg.diag_episodes, ocfg,
                                  cfg.master_seed, gen),
        }
        metrics.append(record)
        if on_generation is not None:
            on_generation(record)
        if convergence_check(history, cfg.convergence_threshold,
                             cfg.convergence_patience):
            converged = True
            break

    return MiaResult(store=store, metrics=metrics, history=history,
                     converged=converged, generations_run=generations_run)


# ---------------------------------------------------------------------------
# Stage 2: per-member specialists against the frozen baseline.


@dataclass
class CamResult:
    specialists: dict[int, PolicyParams]
    metrics: list[dict]
    baseline_digest_before: str
    baseline_digest_after: str
    mean_win_rate_vs_baseline: float

    @property
    def baseline_untouched(self) -> bool:
        return self.baseline_digest_before == self.baseline_digest_after


def _cam_pool(baseline: PolicyParams, snapshot: dict[int, PolicyParams],
              member: int, opp_ids: list[int],
              include_specialists: bool) -> list[PolicyHandle]:
    pool = [PolicyHandle(baseline, j, label=f"mia@{j}") for j in opp_ids]
    if include_specialists:
        pool.extend(PolicyHandle(snapshot[j], j, label=f"spec@{j}") for j in opp_ids)
    return pool


def train_specialists(cfg, baseline: PolicyParams, *, workers: int = 1,
                      on_sweep=None) -> CamResult:
    """Stage-2 loop: fine-tune one clone per member against the frozen pool.

    The baseline never updates; its digest is checked after training. Each
    sweep re-evaluates every specialist against its pool (frozen baseline at
    every compatible id, plus last sweep's specialists when enabled), renews
    the prioritized weights, collects, and applies the shared update rule.
    """
    from .config import build_factory

    factory = build_factory(cfg)
    s2 = cfg.stage2
    ocfg = cfg.objective
    if s2.learning_rate is not None or s2.ppo_epochs is not None:
        ocfg = replace(ocfg, learning_rate=s2.learning_rate or ocfg.learning_rate)
    epochs = s2.ppo_epochs if s2.ppo_epochs is not None else cfg.ppo_epochs
    n = cfg.population_size
    eval_games = cfg.stage2_eval_games_for(factory)
    digest_before = params_digest(baseline)
    specialists = {k: clone_for_specialist(baseline, k) for k in range(n)}
    metrics: list[dict] = []
    mean_wr = 0.5

    for sweep in range(1, s2.sweeps + 1):
        snapshot = dict(specialists)
        opp_ids = {k: _opponent_ids(factory, k, n) for k in range(n)}
        pools = {
            k: _cam_pool(baseline, snapshot, k, opp_ids[k], s2.include_specialist_pool)
            for k in range(n)
        }
        eval_payloads = []
        eval_keys = []
        for k in range(n):
            for m, member in enumerate(pools[k]):
                eval_payloads.append((factory, PolicyHandle(specialists[k], k),
                                      member, eval_games, cfg.master_seed,
                                      ("cam_u", sweep, k, m)))
                eval_keys.append((k, m))
        flat_u = parallel_map(_series_task, eval_payloads, workers)
        u_rows = {k: np.zeros(len(pools[k])) for k in range(n)}
        for (k, m), val in zip(eval_keys, flat_u):
            u_rows[k][m] = val
        collect_payloads = []
        for k in range(n):
            sigma = pfsp_weights(u_rows[k], cfg.solver_exponent)
            tag = ("frozen_mia" if not s2.include_specialist_pool
                   else f"mixed_pool_sweep{sweep}")
            collect_payloads.append(
                (factory, specialists[k], k, sigma, pools[k], s2.episodes_per_sweep,
                 ocfg.state_buckets, tag, n, cfg.master_seed, ("cam_collect", sweep, k)))
        batches = parallel_map(_collect_task, collect_payloads, workers)
        diags = {}
        for k in range(n):
            specialists[k], diags[k] = ppo_update(specialists[k], [batches[k]],
                                                  ocfg, epochs, cfg.update_mode)

        wr_payloads = [
            (factory, PolicyHandle(specialists[k], k),
             [PolicyHandle(baseline, j, label=f"mia@{j}") for j in opp_ids[k]],
             eval_games, cfg.master_seed, ("cam_wr", sweep, k))
            for k in range(n)
        ]
        wr = parallel_map(_cycled_series_task, wr_payloads, workers)
        mean_wr = float(np.mean(wr))

        diag_loss = _cam_diag_loss(factory, specialists, baseline, opp_ids, s2,
                                   ocfg, cfg.master_seed, sweep, workers)
        record = {
            "stage": "cam",
            "sweep": sweep,
            "win_rate_vs_mia": {str(k): float(w) for k, w in enumerate(wr)},
            "mean_win_rate_vs_mia": mean_wr,
            "cam_loss": diag_loss,
            "ppo_loss_mean": float(np.mean([diags[k].get("ppo_loss", np.nan)
                                            for k in range(n)])),
            "value_mse_mean": float(np.mean([diags[k]["value_mse"] for k in range(n)])),
            "pool_size": len(pools[0]),
        }
        metrics.append(record)
        if on_sweep is not None:
            on_sweep(record)

    digest_after = params_digest(baseline)
    return CamResult(specialists=specialists, metrics=metrics,
                     baseline_digest_before=digest_before,
                     baseline_digest_after=digest_after,
                     mean_win_rate_vs_baseline=mean_wr)


def _cam_diag_loss(factory, specialists: dict[int, PolicyParams],
                   baseline: PolicyParams, opp_ids: dict[int, list[int]],
                   s2, ocfg: ObjectiveConfig, master_seed: int, sweep: int,
                   workers: int) -> float:
    """Literal stage-2 loss on fresh small batches against the baseline only."""
    if s2.diag_episodes < 1:
        return float("nan")
    n = len(specialists)
    payloads = []
    for k in range(n):
        pool = [PolicyHandle(baseline, j, label=f"mia@{j}") for j in opp_ids[k]]
        sigma = np.full(len(pool), 1.0 / len(pool))
        payloads.append((factory, specialists[k], k, sigma, pool, s2.diag_episodes,
                         ocfg.state_buckets, "frozen_mia", n, master_seed,
                         ("cam_diag", sweep, k)))
    batches = parallel_map(_collect_task, payloads, workers)
    values = [compute_value_estimates(batches[k], specialists[k], ocfg)
              for k in range(n)]
    return float(cam_loss(batches, values, [specialists[k] for k in range(n)]))
