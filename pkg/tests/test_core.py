import numpy as np
import pytest

from specpop.core import (
    CharacterSpec,
    SkillSpec,
    Transition,
    TrajectoryBatch,
    discounted_return,
    n_step_return,
    zero_sum_reward,
)

from oracles import discounted_return_ref, n_step_return_ref


def make_transition(**overrides):
    base = dict(
        state=np.zeros(3),
        action_self=1,
        action_opp=0,
        reward=0.5,
        next_state=np.ones(3),
        done=False,
        mask_self=np.array([True, True, False]),
        log_prob_self=-0.7,
        id_self=0,
        id_opp=1,
        bucket=2,
    )
    base.update(overrides)
    return Transition(**base)


class TestSkillSpecs:
    def test_substitute_rules(self):
        with pytest.raises(ValueError):
            SkillSpec("substitute", cooldown=3, damage=5, range=0, mana_cost=2,
                      effect_duration=2)
        with pytest.raises(ValueError):
            SkillSpec("substitute", cooldown=3, damage=0, range=0, mana_cost=2,
                      effect_duration=0)
        ok = SkillSpec("substitute", cooldown=3, damage=0, range=0, mana_cost=2,
                       effect_duration=2)
        assert ok.effect_duration == 2

    def test_unknown_category_rejected(self):
        with pytest.raises(ValueError):
            SkillSpec("ultimate", cooldown=1, damage=1, range=1, mana_cost=1)

    def test_character_needs_all_categories(self):
        skills = (
            SkillSpec("forcing_move", 2, 10, 3, 2),
            SkillSpec("counter_move", 3, 12, 1, 3),
        )
        with pytest.raises(ValueError):
            CharacterSpec("halfbaked", 1, 1, 5, 100, 10, skills)


class TestReturns:
    def test_discounted_example(self):
        assert discounted_return([1.0, 1.0, 1.0], 0.5) == pytest.approx(1.75, abs=1e-12)

    def test_nstep_example(self):
        got = n_step_return([1.0, 2.0], 0.5, bootstrap_value=10.0)
        assert got == pytest.approx(4.5, abs=1e-12)

    def test_matches_reference_on_random_sequences(self, rng):
        for _ in range(25):
            n = int(rng.integers(1, 12))
            rewards = rng.normal(size=n)
            gamma = float(rng.uniform(0.0, 0.999))
            boot = float(rng.normal())
            assert discounted_return(rewards, gamma) == pytest.approx(
                discounted_return_ref(rewards, gamma), rel=1e-12, abs=1e-12)
            assert n_step_return(rewards, gamma, boot) == pytest.approx(
                n_step_return_ref(rewards, gamma, boot), rel=1e-12, abs=1e-12)

    def test_gamma_domain(self):
        with pytest.raises(ValueError):
            discounted_return([1.0], 1.0)
        with pytest.raises(ValueError):
            discounted_return([1.0], -0.1)

    def test_zero_sum_reward(self):
        assert zero_sum_reward(3.0, 1.0) == 2.0
        assert zero_sum_reward(1.0, 3.0) == -2.0
        with pytest.raises(ValueError):
            zero_sum_reward(float("nan"), 0.0)


class TestTransitionValidation:
    def test_accepts_valid(self):
        t = make_transition()
        assert t.reward == 0.5

    def test_rejects_masked_action(self):
        with pytest.raises(ValueError):
            make_transition(action_self=2)

    def test_rejects_positive_log_prob(self):
        with pytest.raises(ValueError):
            make_transition(log_prob_self=0.3)

    def test_rejects_nonfinite_reward(self):
        with pytest.raises(ValueError):
            make_transition(reward=float("inf"))


class TestTrajectoryBatch:
    def batch(self):
        ts = tuple(make_transition(reward=float(t), done=(t in (2, 5)))
                   for t in range(6))
        return TrajectoryBatch(ts, agent=0, episode_starts=(0, 3), collected_vs="x")

    def test_episode_starts_must_begin_at_zero(self):
        ts = (make_transition(),)
        with pytest.raises(ValueError):
            TrajectoryBatch(ts, agent=0, episode_starts=(1,), collected_vs="x")

    def test_episode_starts_strictly_increasing(self):
        ts = tuple(make_transition() for _ in range(3))
        with pytest.raises(ValueError):
            TrajectoryBatch(ts, agent=0, episode_starts=(0, 2, 2), collected_vs="x")

    def test_as_arrays_shapes_and_cache(self):
        b = self.batch()
        arrs = b.as_arrays()
        assert arrs["states"].shape == (6, 3)
        assert arrs["rewards"].tolist() == [0.0, 1.0, 2.0, 3.0, 4.0, 5.0]
        assert arrs["masks"].dtype == bool
        assert b.as_arrays() is arrs

    def test_episode_slices(self):
        b = self.batch()
        slices = list(b.episode_slices())
        assert [(s.start, s.stop) for s in slices] == [(0, 3), (3, 6)]
