"""Built-in verification battery: finite differences and closed-form oracles.

Every analytic gradient in the package is compared against a central
finite-difference probe of its scalar objective, and every quantity with a
known closed form is compared against that form. The CLI exposes these so a
run can be preceded by a fast self-check on any machine.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import discounted_return, n_step_return
from .envs.matrix import (
    MatrixGameSpec,
    biased_rock_paper_scissors,
    matching_pennies,
    rock_paper_scissors,
)
from .envs.factory import MatrixFactory
from .evaluation import epsilon_ne, exploitability, format_relative_change
from .objectives import (
    ObjectiveConfig,
    augmented_gradient_exact,
    augmented_objective_exact,
    compute_value_estimates,
    exact_objective,
    exact_policy_gradient,
    mi_gradient_exact,
    mi_objective_exact,
    mutual_information_exact,
    mutual_information_of_joint,
    ppo_surrogate,
    value_loss_and_grad,
)
from .policy import (
    PolicyParams,
    forward,
    grad_log_prob,
    grad_value,
    init_tabular,
    value,
    weighted_score_sum,
)
from .population import collect_paired, pfsp_weights
from .runtime import rng_stream

FD_STEP = 1e-5
FD_THRESHOLD = 1e-4
EXACT_THRESHOLD = 1e-12


@dataclass(frozen=True)
class CheckResult:
    name: str
    error: float
    threshold: float
    passed: bool
    detail: str = ""


def central_difference(fn, x: np.ndarray, step: float = FD_STEP) -> np.ndarray:
    """Two-sided finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    for i in range(x.size):
        hi = x.copy()
        lo = x.copy()
        hi[i] += step
        lo[i] -= step
        grad[i] = (fn(hi) - fn(lo)) / (2.0 * step)
    return grad


def gradient_error(approx: np.ndarray, exact: np.ndarray) -> float:
    """Norm of the difference relative to the exact norm, absolute when tiny."""
    diff = float(np.linalg.norm(np.asarray(approx) - np.asarray(exact)))
    scale = max(float(np.linalg.norm(exact)), 1e-6)
    return diff / scale


def fixed_check_games() -> dict[str, MatrixGameSpec]:
    """Five small zero-sum games spanning 2x2 through 4x4, fixed for life."""
    return {
        "matching_pennies": matching_pennies(),
        "rps": rock_paper_scissors(),
        "biased_rps": biased_rock_paper_scissors(),
        "asym_2x3": MatrixGameSpec(np.array([
            [1.0, -0.5, 0.25],
            [-1.0, 0.75, -0.25],
        ])),
        "dense_4x4": MatrixGameSpec(np.array([
            [0.31, -0.82, 1.03, -0.44],
            [-0.57, 0.66, -0.29, 0.91],
            [1.12, -0.08, -0.73, 0.25],
            [-0.36, 0.49, 0.58, -1.01],
        ])),
    }


def _tabular_for(game: MatrixGameSpec, seed_label: str) -> PolicyParams:
    params = init_tabular(n_states=1, n_ids=2,
                          n_actions=max(game.n_actions_row, game.n_actions_col))
    rng = rng_stream(7, "check_params", seed_label)
    return params.with_flat(rng.normal(scale=0.3, size=params.flat.size))


def _fixed_coupling(n: int, seed_label: str) -> np.ndarray:
    rng = rng_stream(11, "check_coupling", seed_label)
    return rng.normal(scale=0.8, size=(n, n))


def _check(name: str, error: float, threshold: float, detail: str = "") -> CheckResult:
    return CheckResult(name=name, error=float(error), threshold=threshold,
                       passed=bool(error <= threshold), detail=detail)


# ---------------------------------------------------------------------------
# Gradient checks.


def _single_grad_checks(grad_log_prob_fn, grad_value_fn) -> list[CheckResult]:
    out = []
    rng = rng_stream(3, "check_single")
    cases = {
        "tabular": init_tabular(n_states=4, n_ids=3, n_actions=5).with_flat(
            rng.normal(scale=0.4, size=4 * 3 * 5 + 4 * 3)),
        "mlp": None,
    }
    from .policy import init_mlp
    cases["mlp"] = init_mlp(obs_dim=3, n_ids=2, n_actions=4, hidden=5,
                            rng=rng_stream(3, "check_mlp_init"))
    cases["mlp"] = cases["mlp"].with_flat(
        rng.normal(scale=0.4, size=cases["mlp"].flat.size))
    for kind, params in cases.items():
        if kind == "tabular":
            state = np.array([2.0])
        else:
            state = rng.normal(size=params.obs_dim)
        agent_id = 1
        mask = np.ones(params.n_actions, dtype=bool)
        mask[-1] = False
        dist = forward(params, state, agent_id, mask)
        action = int(np.argmax(dist.probs))

        analytic = grad_log_prob_fn(params, state, agent_id, action, mask)
        fd = central_difference(
            lambda flat: np.log(forward(params.with_flat(flat), state, agent_id,
                                        mask).probs[action]),
            params.flat)
        out.append(_check(f"grad_log_prob/{kind}", gradient_error(analytic, fd),
                          FD_THRESHOLD))

        analytic_v = grad_value_fn(params, state, agent_id)
        fd_v = central_difference(
            lambda flat: value(params.with_flat(flat), state, agent_id),
            params.flat)
        out.append(_check(f"grad_value/{kind}", gradient_error(analytic_v, fd_v),
                          FD_THRESHOLD))

        weights = rng.normal(size=3)
        states = np.stack([state, state, state])
        ids = np.array([agent_id, 0, agent_id])
        actions = np.array([action, 0, 0])
        masks = np.stack([mask, mask, mask])
        batched = weighted_score_sum(params, states, ids, actions, masks, weights)
        direct = sum(w * grad_log_prob_fn(params, states[t], int(ids[t]),
                                          int(actions[t]), masks[t])
                     for t, w in enumerate(weights))
        out.append(_check(f"score_sum_consistency/{kind}",
                          gradient_error(batched, direct), 1e-9))
    return out


def _fixed_q_tables(game: MatrixGameSpec, seed_label: str):
    """Non-degenerate per-seat value tables; the oracle tables (payoff and its
    negation) cancel in the centralized objective and would make any
    finite-difference probe vacuously zero."""
    rng = rng_stream(17, "check_q", seed_label)
    return (rng.normal(scale=1.0, size=game.payoff.shape),
            rng.normal(scale=1.0, size=game.payoff.shape))


def _exact_gradient_checks() -> list[CheckResult]:
    out = []
    cfg = ObjectiveConfig(lambda_mi=0.1)
    for name, game in fixed_check_games().items():
        params = _tabular_for(game, name)
        q_row, q_col = _fixed_q_tables(game, name)
        analytic = exact_policy_gradient(params, game, q_row, q_col)
        fd = central_difference(
            lambda flat: exact_objective(params.with_flat(flat), game, q_row, q_col),
            params.flat)
        out.append(_check(f"policy_gradient_exact/{name}",
                          gradient_error(fd, analytic), FD_THRESHOLD))

        coupling = _fixed_coupling(params.n_actions, name)
        analytic_mi = mi_gradient_exact(params, game, (0, 1), coupling)
        fd_mi = central_difference(
            lambda flat: mi_objective_exact(params.with_flat(flat), game, (0, 1),
                                            coupling),
            params.flat)
        out.append(_check(f"mi_gradient_exact/{name}",
                          gradient_error(fd_mi, analytic_mi), FD_THRESHOLD))

        analytic_aug = augmented_gradient_exact(params, game, cfg, q_row, q_col,
                                                ids=(0, 1), coupling=coupling)
        fd_aug = central_difference(
            lambda flat: augmented_objective_exact(params.with_flat(flat), game,
                                                   cfg, q_row, q_col, ids=(0, 1),
                                                   coupling=coupling),
            params.flat)
        out.append(_check(f"augmented_gradient_exact/{name}",
                          gradient_error(fd_aug, analytic_aug), FD_THRESHOLD))

        zero = mi_gradient_exact(params, game, (0, 1), coupling=None)
        out.append(_check(f"mi_gradient_factorized_zero/{name}",
                          float(np.abs(zero).max()), EXACT_THRESHOLD,
                          detail="factorized joint carries no MI anywhere"))
    return out


def _surrogate_checks() -> list[CheckResult]:
    out = []
    game = biased_rock_paper_scissors()
    factory = MatrixFactory(game)
    params = _tabular_for(game, "surrogate")
    cfg = ObjectiveConfig(ppo_clip=0.2)
    b_i, b_ii = collect_paired(factory, params, (0, 1), episodes=12,
                               n_buckets=cfg.state_buckets,
                               rng=rng_stream(5, "check_ppo"), tag="check")
    batches = [b_i, b_ii]
    values = [compute_value_estimates(b, params, cfg) for b in batches]

    # Drift the parameters so the ratios leave 1 and the clip branch engages.
    drift = rng_stream(5, "check_ppo_drift").normal(scale=0.6,
                                                    size=params.flat.size)
    params_new = params.with_flat(params.flat + drift)
    _, est = ppo_surrogate(batches, values, params_new, cfg)

    def objective(flat: np.ndarray) -> float:
        loss, _ = ppo_surrogate(batches, values, params_new.with_flat(flat), cfg)
        return -loss

    fd = central_difference(objective, params_new.flat)
    out.append(_check("ppo_surrogate", gradient_error(fd, est.grad), FD_THRESHOLD,
                      detail=f"clip_fraction={est.diagnostics['clip_fraction']:.3f}"))

    mse, vgrad = value_loss_and_grad(batches, values, params_new)

    def value_objective(flat: np.ndarray) -> float:
        m, _ = value_loss_and_grad(batches, values, params_new.with_flat(flat))
        return -m

    fd_v = central_difference(value_objective, params_new.flat)
    out.append(_check("value_loss", gradient_error(fd_v, vgrad), FD_THRESHOLD,
                      detail=f"mse={mse:.4f}"))
    return out


def run_gradient_checks(grad_log_prob_fn=None, grad_value_fn=None) -> list[CheckResult]:
    """Full analytic-vs-finite-difference battery.

    The gradient callables are injectable so a deliberately broken gradient
    can be shown to trip the battery; defaults are the real implementations.
    """
    out = _single_grad_checks(grad_log_prob_fn or grad_log_prob,
                              grad_value_fn or grad_value)
    out.extend(_exact_gradient_checks())
    out.extend(_surrogate_checks())
    return out


# ---------------------------------------------------------------------------
# Closed-form oracle checks.


def run_oracle_checks() -> list[CheckResult]:
    out = []
    out.append(_check("discounted_return",
                      abs(discounted_return([1.0, 1.0, 1.0], 0.5) - 1.75),
                      EXACT_THRESHOLD))
    out.append(_check("n_step_bootstrap",
                      abs(n_step_return([1.0, 2.0], 0.5, bootstrap_value=10.0) - 4.5),
                      EXACT_THRESHOLD))

    independent = np.outer([0.3, 0.7], [0.6, 0.4])
    out.append(_check("mi_independent_zero",
                      abs(mutual_information_of_joint(independent)),
                      EXACT_THRESHOLD))
    correlated = np.array([[0.5, 0.0], [0.0, 0.5]])
    out.append(_check("mi_correlated_ln2",
                      abs(mutual_information_of_joint(correlated) - np.log(2.0)),
                      EXACT_THRESHOLD))
    out.append(_check("mi_exact_factorized_zero",
                      abs(mutual_information_exact(
                          joint=np.outer([0.25, 0.75], [0.5, 0.5]))),
                      EXACT_THRESHOLD))

    # In a zero-sum game the oracle value tables cancel seat against seat, so
    # the enumerated centralized objective and its gradient vanish identically.
    for name, game in fixed_check_games().items():
        params = _tabular_for(game, name)
        out.append(_check(f"centralized_objective_zero/{name}",
                          abs(exact_objective(params, game)), EXACT_THRESHOLD))
        out.append(_check(f"centralized_gradient_zero/{name}",
                          float(np.abs(exact_policy_gradient(params, game)).max()),
                          EXACT_THRESHOLD))

    rps = rock_paper_scissors()
    uniform = np.full(3, 1.0 / 3.0)
    out.append(_check("exploitability_rps_uniform",
                      abs(exploitability(rps, dist_row=uniform, dist_col=uniform)),
                      EXACT_THRESHOLD))
    rock = np.array([1.0, 0.0, 0.0])
    out.append(_check("exploitability_rps_rock",
                      abs(exploitability(rps, dist_row=rock, dist_col=rock) - 1.0),
                      EXACT_THRESHOLD))
    pennies = matching_pennies()
    half = np.array([0.5, 0.5])
    out.append(_check("exploitability_pennies_ne",
                      abs(exploitability(pennies, dist_row=half, dist_col=half)),
                      EXACT_THRESHOLD))
    biased = biased_rock_paper_scissors()
    ne = np.array([0.25, 0.5, 0.25])
    out.append(_check("exploitability_biased_rps_ne",
                      abs(exploitability(biased, dist_row=ne, dist_col=ne)),
                      EXACT_THRESHOLD))

    weights = pfsp_weights(np.array([1.0, 0.5, 0.0]), exponent=1.0)
    out.append(_check("pfsp_example",
                      float(np.abs(weights - np.array([0.0, 1.0 / 3.0, 2.0 / 3.0])).max()),
                      EXACT_THRESHOLD))
    out.append(_check("epsilon_ne_example", abs(epsilon_ne(0.576) - 0.076), 1e-12))

    rel = 100.0 * (1.0585 - 0.9210) / 0.9210
    out.append(_check("diversity_arithmetic", abs(rel - 14.93), 0.005,
                      detail=format_relative_change(0.9210, 1.0585)))

    # Antisymmetric fill is exact in floating point: w + (1 - w) == 1 always.
    probe = rng_stream(13, "check_antisym").random(4096)
    probe = np.concatenate([probe, np.array([0.0, 0.5, 1.0, np.nextafter(1.0, 0.0)])])
    out.append(_check("antisymmetric_fill_exact",
                      float(np.abs((probe + (1.0 - probe)) - 1.0).max()), 0.0))
    return out


def run_all_checks(**kwargs) -> list[CheckResult]:
    return run_gradient_checks(**kwargs) + run_oracle_checks()
