"""Two-stage population self-play on desk-scale zero-sum games.

Stage 1 trains a single id-conditioned policy against its own frozen past
generations with prioritized opponent sampling; stage 2 clones it into
per-member specialists and fine-tunes each against the frozen stage-1
baseline. Everything is pure numpy with analytic gradients, built so every
training signal can be checked against finite differences and closed forms.
"""

from .checkpoint import FORMAT_VERSION, load_checkpoint, save_checkpoint
from .config import (
    ConfigError,
    EnvConfig,
    PolicyConfig,
    RunConfig,
    Stage2Config,
    build_factory,
    config_from_dict,
    config_hash,
    initial_params,
    load_config,
    save_config,
)
from .core import (
    CharacterSpec,
    SKILL_CATEGORIES,
    SkillSpec,
    Transition,
    TrajectoryBatch,
    discounted_return,
    n_step_return,
    zero_sum_reward,
)
from .evaluation import (
    ActionFrequencyVector,
    DiversityReport,
    WinRateMatrix,
    action_frequency_vector,
    best_response,
    diversity_score,
    epsilon_ne,
    exploitability,
    format_relative_change,
    mi_report,
    radial_export,
    win_rate_matrix,
)
from .objectives import (
    GradEstimate,
    ObjectiveConfig,
    ValueEstimates,
    augmented_gradient,
    augmented_gradient_exact,
    augmented_objective_exact,
    augmented_step_gradient,
    cam_loss,
    cam_loss_exact,
    clip_grad_norm,
    compute_value_estimates,
    coupled_joint,
    estimate_J,
    exact_objective,
    exact_policy_gradient,
    mi_gradient_exact,
    mi_gradient_sampled,
    mi_objective_exact,
    mia_loss,
    mia_loss_exact,
    mutual_information_exact,
    mutual_information_of_joint,
    mutual_information_sampled,
    normalize_advantages,
    policy_gradient,
    ppo_surrogate,
    sgd_step,
    value_loss_and_grad,
)
from .policy import (
    ActionDistribution,
    PolicyParams,
    clone_for_specialist,
    forward,
    forward_batch,
    grad_log_prob,
    grad_value,
    init_mlp,
    init_tabular,
    joint_log_prob,
    log_prob,
    masked_softmax,
    param_count,
    params_digest,
    sample,
    value,
    value_batch,
    weighted_score_sum,
)
from .population import (
    CamResult,
    GenerationStore,
    InteractionGraph,
    MiaResult,
    PayoffMatrix,
    PolicyHandle,
    collect_paired,
    conditional_series,
    convergence_check,
    cycled_series,
    graph_solve,
    npl_collect,
    pfsp_weights,
    play_series,
    ppo_update,
    run_match,
    sample_opponent,
    train_mia,
    train_specialists,
)
from .runtime import parallel_map, rng_stream

__version__ = "0.1.0"
