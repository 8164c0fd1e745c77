"""Pool bookkeeping, opponent selection, match running, and both training loops."""
import numpy as np
import pytest

from conftest import random_tabular

from specpop.config import EnvConfig, PolicyConfig, RunConfig, Stage2Config
from specpop.objectives import ObjectiveConfig, compute_value_estimates
from specpop.policy import init_tabular, params_digest
from specpop.population import (
    GenerationStore,
    InteractionGraph,
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
from specpop.runtime import rng_stream


def tiny_cfg(**overrides):
    base = dict(
        env=EnvConfig(type="matrix", game="matching_pennies"),
        policy=PolicyConfig(kind="tabular_softmax"),
        objective=ObjectiveConfig(learning_rate=0.2),
        population_size=2,
        generations=2,
        episodes_per_generation=8,
        ppo_epochs=2,
        eval_games=8,
        diag_episodes=4,
        convergence_threshold=0.01,
        convergence_patience=5,
        master_seed=7,
    )
    base.update(overrides)
    return RunConfig(**base)


class TestPayoffMatrix:
    def test_antisymmetry_check(self):
        u = np.array([[0.5, 0.3], [0.7, 0.5]])
        m = PayoffMatrix(u, np.full((2, 2), 10), ("a", "b"), ("a", "b"))
        assert m.check_antisymmetric()
        bad = PayoffMatrix(np.array([[0.5, 0.3], [0.6, 0.5]]),
                           np.full((2, 2), 10), ("a", "b"), ("a", "b"))
        assert not bad.check_antisymmetric()

    def test_rectangular_never_antisymmetric(self):
        m = PayoffMatrix(np.full((2, 3), 0.5), np.ones((2, 3), dtype=int),
                         ("a", "b"), ("x", "y", "z"))
        assert not m.square
        assert not m.check_antisymmetric()

    def test_validation(self):
        with pytest.raises(ValueError):
            PayoffMatrix(np.array([[1.5]]), np.array([[1]]), ("a",), ("a",))
        with pytest.raises(ValueError):
            PayoffMatrix(np.full((2, 2), 0.5), np.full((2, 2), 1),
                         ("a",), ("a", "b"))

    def test_read_only(self):
        m = PayoffMatrix(np.full((2, 2), 0.5), np.full((2, 2), 4),
                         ("a", "b"), ("a", "b"))
        with pytest.raises(ValueError):
            m.u[0, 0] = 0.9


class TestPfspWeights:
    def test_hand_case(self):
        w = pfsp_weights(np.array([1.0, 0.5, 0.0]), exponent=1.0)
        assert np.allclose(w, [0.0, 1.0 / 3.0, 2.0 / 3.0], atol=1e-15)

    def test_all_draws_give_uniform(self):
        w = pfsp_weights(np.full(4, 0.5), exponent=1.0)
        assert np.allclose(w, 0.25, atol=1e-15)

    def test_all_wins_fall_back_to_uniform(self):
        w = pfsp_weights(np.ones(3), exponent=1.0)
        assert np.allclose(w, 1.0 / 3.0, atol=1e-15)

    def test_exponent_zero_is_uniform(self):
        w = pfsp_weights(np.array([0.9, 0.1, 0.4]), exponent=0.0)
        assert np.allclose(w, 1.0 / 3.0, atol=1e-15)

    def test_larger_exponent_concentrates_on_hardest(self):
        u = np.array([0.9, 0.4, 0.1])
        soft = pfsp_weights(u, exponent=1.0)
        hard = pfsp_weights(u, exponent=6.0)
        assert hard[2] > soft[2]
        assert hard.argmax() == 2

    def test_exclusion(self):
        w = pfsp_weights(np.array([0.5, 0.5, 0.5]), exponent=1.0, exclude=1)
        assert w[1] == 0.0
        assert np.allclose(w.sum(), 1.0)

    def test_validation(self):
        with pytest.raises(ValueError):
            pfsp_weights(np.array([1.2, 0.5]))
        with pytest.raises(ValueError):
            pfsp_weights(np.array([0.5, 0.5]), exponent=-1.0)
        with pytest.raises(ValueError):
            pfsp_weights(np.array([]))


class TestGraphSolve:
    def test_rows_stochastic_and_self_excluded(self):
        u = np.array([[0.5, 0.8, 0.2],
                      [0.2, 0.5, 0.6],
                      [0.8, 0.4, 0.5]])
        graph = graph_solve(u, exponent=1.0)
        sigma = graph.sigma
        assert np.allclose(sigma.sum(axis=1), 1.0, atol=1e-12)
        assert np.all(np.diag(sigma) == 0.0)
        # row 0 weights (1-0.8, 1-0.2) = (0.2, 0.8) over opponents 1 and 2
        assert np.allclose(sigma[0], [0.0, 0.2, 0.8], atol=1e-12)

    def test_small_pools_rejected(self):
        with pytest.raises(ValueError):
            graph_solve(np.array([[0.5]]))
        with pytest.raises(ValueError):
            graph_solve(np.full((2, 3), 0.5))

    def test_accepts_payoff_matrix_wrapper(self):
        m = PayoffMatrix(np.full((3, 3), 0.5), np.full((3, 3), 2),
                         ("a", "b", "c"), ("a", "b", "c"))
        graph = graph_solve(m, exponent=2.0)
        assert isinstance(graph, InteractionGraph)
        assert np.allclose(graph.sigma[1], [0.5, 0.0, 0.5], atol=1e-12)


class TestInteractionGraph:
    def test_validation(self):
        with pytest.raises(ValueError):
            InteractionGraph(np.array([[0.5, 0.6]]))
        with pytest.raises(ValueError):
            InteractionGraph(np.array([[-0.1, 1.1]]))
        with pytest.raises(ValueError):
            InteractionGraph(np.array([0.5, 0.5]))


class TestSampleOpponent:
    def test_deterministic_given_seed(self):
        w = np.array([0.3, 0.3, 0.4])
        a = [sample_opponent(w, rng_stream(3, "s")) for _ in range(1)]
        b = [sample_opponent(w, rng_stream(3, "s")) for _ in range(1)]
        assert a == b

    def test_degenerate_weight_always_selected(self, rng):
        w = np.array([0.0, 1.0, 0.0])
        assert all(sample_opponent(w, rng) == 1 for _ in range(20))

    def test_frequencies_track_weights(self):
        w = np.array([0.2, 0.8])
        rng = rng_stream(11, "freq")
        draws = np.array([sample_opponent(w, rng) for _ in range(4000)])
        assert abs(draws.mean() - 0.8) < 0.03

    def test_validation(self, rng):
        with pytest.raises(ValueError):
            sample_opponent(np.array([0.5, 0.2]), rng)
        with pytest.raises(ValueError):
            sample_opponent(np.array([-0.5, 1.5]), rng)


class TestConvergenceCheck:
    def test_draw_band_example(self):
        assert convergence_check([0.9, 0.576], threshold=0.076, patience=1)
        assert not convergence_check([0.9, 0.577], threshold=0.076, patience=1)

    def test_patience_window(self):
        history = [0.9, 0.52, 0.48, 0.51]
        assert convergence_check(history, threshold=0.05, patience=3)
        assert not convergence_check(history, threshold=0.05, patience=4)

    def test_short_history_not_converged(self):
        assert not convergence_check([0.5], threshold=0.1, patience=2)

    def test_patience_validated(self):
        with pytest.raises(ValueError):
            convergence_check([0.5], threshold=0.1, patience=0)


class TestMatchRunning:
    def test_conditional_handle_rejected(self, pennies_factory, rng):
        params = init_tabular(1, 2, 2)
        with pytest.raises(ValueError, match="concrete"):
            run_match(pennies_factory, PolicyHandle(params, None),
                      PolicyHandle(params, 1), rng)

    def test_recorded_rewards_are_zero_sum(self, brps_factory, rng):
        params = random_tabular(1, 2, 3, seed=40)
        t0, t1, outcome = run_match(brps_factory, PolicyHandle(params, 0),
                                    PolicyHandle(params, 1), rng)
        assert len(t0) == len(t1) == 1
        assert t0[0].reward + t1[0].reward == 0.0
        assert outcome is not None

    def test_series_results_deterministic_and_bounded(self, pennies_factory):
        params_a = random_tabular(1, 2, 2, seed=41)
        params_b = random_tabular(1, 2, 2, seed=42)
        h_a, h_b = PolicyHandle(params_a, 0), PolicyHandle(params_b, 1)
        w1 = play_series(pennies_factory, h_a, h_b, 16, rng_stream(1, "w"))
        w2 = play_series(pennies_factory, h_a, h_b, 16, rng_stream(1, "w"))
        assert w1 == w2
        assert 0.0 <= w1 <= 1.0

    def test_cycled_series_needs_opponents(self, pennies_factory, rng):
        params = random_tabular(1, 2, 2, seed=43)
        with pytest.raises(ValueError):
            cycled_series(pennies_factory, PolicyHandle(params, 0), [], 4, rng)

    def test_conditional_series_deterministic(self, pennies_factory):
        a = random_tabular(1, 2, 2, seed=44)
        b = random_tabular(1, 2, 2, seed=45)
        w1 = conditional_series(pennies_factory, a, b, 2, 12, rng_stream(2, "c"))
        w2 = conditional_series(pennies_factory, a, b, 2, 12, rng_stream(2, "c"))
        assert w1 == w2

    def test_self_play_conditional_series_near_half(self, pennies_factory):
        # both seatings of every id pair are cycled, so an identical policy
        # cannot owe its score to a side
        params = random_tabular(1, 2, 2, seed=46)
        w = conditional_series(pennies_factory, params, params, 2, 400,
                               rng_stream(3, "c"))
        assert abs(w - 0.5) < 0.1


class TestCollection:
    def test_npl_collect_structure(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=47)
        pool = [PolicyHandle(random_tabular(1, 2, 3, seed=s), None) for s in (48, 49)]
        sigma = np.array([0.5, 0.5])
        batch = npl_collect(brps_factory, params, 0, sigma, pool, episodes=6,
                            n_buckets=4, rng=rng_stream(4, "np"), tag="pool_gen3",
                            n_ids=2)
        assert batch.agent == 0
        assert batch.n_episodes == 6
        assert batch.collected_vs == "pool_gen3"
        arrs = batch.as_arrays()
        assert np.all(arrs["ids"] == 0)
        # matrix seats are parity-keyed, so opponents must carry the other parity
        assert np.all(arrs["ids_opp"] % 2 == 1)

    def test_npl_collect_sigma_mismatch(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=50)
        pool = [PolicyHandle(params, None)]
        with pytest.raises(ValueError):
            npl_collect(brps_factory, params, 0, np.array([0.5, 0.5]), pool,
                        episodes=2, n_buckets=4, rng=rng_stream(5, "np"),
                        tag="t", n_ids=2)

    def test_collect_paired_alignment(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=51)
        b_i, b_ii = collect_paired(brps_factory, params, (0, 1), episodes=10,
                                   n_buckets=4, rng=rng_stream(6, "cp"), tag="t")
        assert len(b_i) == len(b_ii)
        assert b_i.episode_starts == b_ii.episode_starts
        r_i = b_i.as_arrays()["rewards"]
        r_ii = b_ii.as_arrays()["rewards"]
        assert np.all(r_i + r_ii == 0.0)


class TestPpoUpdate:
    def make_batch(self, factory, params, seed):
        b_i, b_ii = collect_paired(factory, params, (0, 1), episodes=16,
                                   n_buckets=4, rng=rng_stream(seed, "up"), tag="t")
        return [b_i, b_ii]

    def test_updates_parameters(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=52)
        cfg = ObjectiveConfig(learning_rate=0.1)
        batches = self.make_batch(brps_factory, params, 1)
        out, diag = ppo_update(params, batches, cfg, epochs=2)
        assert not np.array_equal(out.flat, params.flat)
        assert {"ppo_loss", "clip_fraction", "value_mse"} <= set(diag)

    def test_augmented_mode_runs(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=53)
        cfg = ObjectiveConfig(learning_rate=0.1, lambda_mi=0.2)
        batches = self.make_batch(brps_factory, params, 2)
        out, diag = ppo_update(params, batches, cfg, epochs=1,
                               update_mode="augmented")
        assert not np.array_equal(out.flat, params.flat)
        assert "mi_term_share" in diag

    def test_normalization_switch_changes_step(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=54)
        batches = self.make_batch(brps_factory, params, 3)
        on, _ = ppo_update(params, batches,
                           ObjectiveConfig(learning_rate=0.1), epochs=1)
        off, _ = ppo_update(params, batches,
                            ObjectiveConfig(learning_rate=0.1,
                                            advantage_normalization=False),
                            epochs=1)
        assert not np.array_equal(on.flat, off.flat)

    def test_validation(self, brps_factory):
        params = random_tabular(1, 2, 3, seed=55)
        batches = self.make_batch(brps_factory, params, 4)
        with pytest.raises(ValueError):
            ppo_update(params, batches, ObjectiveConfig(), epochs=0)
        with pytest.raises(ValueError):
            ppo_update(params, batches, ObjectiveConfig(), epochs=1,
                       update_mode="trust_region")


class TestGenerationStore:
    def test_append_and_lookup(self):
        store = GenerationStore()
        p = init_tabular(1, 2, 2)
        idx = store.append(p, stage="mia", meta={"generation": 0})
        assert idx == 0
        assert store.params_at(0) is p
        assert store.last().stage == "mia"
        assert len(store) == 1

    def test_empty_store_last_raises(self):
        with pytest.raises(IndexError):
            GenerationStore().last()


class TestTrainMia:
    def test_single_generation_store_contents(self):
        res = train_mia(tiny_cfg(generations=1))
        assert len(res.store) == 2
        assert [e.meta["generation"] for e in res.store.entries()] == [0, 1]
        assert res.generations_run == 1
        assert len(res.history) == 1

    def test_metrics_record_shape(self):
        res = train_mia(tiny_cfg())
        rec = res.metrics[0]
        for key in ("stage", "generation", "payoff_row", "sigma",
                    "win_rate_vs_prev", "gap_from_draw", "transitions",
                    "ppo_loss", "value_mse", "mia_loss", "estimate_j",
                    "mi_sampled"):
            assert key in rec, key
        assert rec["stage"] == "mia"
        # generation g plays against the g stored snapshots before it
        assert len(res.metrics[0]["payoff_row"]) == 1
        assert len(res.metrics[1]["payoff_row"]) == 2

    def test_bit_determinism(self):
        a = train_mia(tiny_cfg())
        b = train_mia(tiny_cfg())
        assert params_digest(a.params) == params_digest(b.params)
        assert a.history == b.history
        assert a.metrics == b.metrics

    def test_workers_do_not_change_results(self):
        a = train_mia(tiny_cfg())
        b = train_mia(tiny_cfg(), workers=2)
        assert params_digest(a.params) == params_digest(b.params)
        assert a.history == b.history

    def test_seed_changes_results(self):
        a = train_mia(tiny_cfg())
        b = train_mia(tiny_cfg(master_seed=8))
        assert params_digest(a.params) != params_digest(b.params)

    def test_convergence_stops_early(self):
        res = train_mia(tiny_cfg(generations=10, convergence_threshold=0.49,
                                 convergence_patience=1))
        assert res.converged
        assert res.generations_run < 10

    def test_callback_sees_each_generation(self):
        seen = []
        train_mia(tiny_cfg(), on_generation=lambda rec: seen.append(rec["generation"]))
        assert seen == [1, 2]

    def test_augmented_update_mode_runs(self):
        res = train_mia(tiny_cfg(update_mode="augmented"))
        assert res.generations_run == 2

    def test_lr_decay_changes_trajectory(self):
        a = train_mia(tiny_cfg())
        b = train_mia(tiny_cfg(lr_decay=5.0))
        assert params_digest(a.params) != params_digest(b.params)


class TestTrainSpecialists:
    def make(self, include_pool=True, sweeps=2, seed=9):
        cfg = tiny_cfg(
            stage2=Stage2Config(sweeps=sweeps, episodes_per_sweep=8,
                                eval_games=8, diag_episodes=4,
                                include_specialist_pool=include_pool),
            master_seed=seed,
        )
        baseline = random_tabular(1, 2, 2, seed=60)
        return cfg, baseline

    def test_baseline_frozen_and_specialists_move(self):
        cfg, baseline = self.make()
        res = train_specialists(cfg, baseline)
        assert res.baseline_untouched
        assert set(res.specialists) == {0, 1}
        for k, spec in res.specialists.items():
            assert params_digest(spec) != params_digest(baseline)

    def test_metrics_shape(self):
        cfg, baseline = self.make()
        res = train_specialists(cfg, baseline)
        assert len(res.metrics) == 2
        rec = res.metrics[0]
        for key in ("stage", "sweep", "win_rate_vs_mia", "mean_win_rate_vs_mia",
                    "cam_loss", "value_mse_mean", "pool_size"):
            assert key in rec, key
        assert rec["stage"] == "cam"
        assert 0.0 <= res.mean_win_rate_vs_baseline <= 1.0
        assert np.isfinite(rec["cam_loss"])

    def test_pool_composition_switch(self):
        cfg_on, baseline = self.make(include_pool=True)
        cfg_off, _ = self.make(include_pool=False)
        with_pool = train_specialists(cfg_on, baseline)
        without = train_specialists(cfg_off, baseline)
        assert with_pool.metrics[0]["pool_size"] == 2
        assert without.metrics[0]["pool_size"] == 1

    def test_bit_determinism(self):
        cfg, baseline = self.make()
        a = train_specialists(cfg, baseline)
        b = train_specialists(cfg, baseline)
        for k in a.specialists:
            assert params_digest(a.specialists[k]) == params_digest(b.specialists[k])
        assert a.metrics == b.metrics

    def test_workers_do_not_change_results(self):
        cfg, baseline = self.make()
        a = train_specialists(cfg, baseline)
        b = train_specialists(cfg, baseline, workers=2)
        for k in a.specialists:
            assert params_digest(a.specialists[k]) == params_digest(b.specialists[k])
