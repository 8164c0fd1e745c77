import numpy as np
import pytest

from specpop.checks import fixed_check_games
from specpop.envs import DuelFactory, MatrixFactory, default_roster
from specpop.envs.matrix import biased_rock_paper_scissors, matching_pennies
from specpop.policy import init_mlp, init_tabular
from specpop.runtime import rng_stream


@pytest.fixture(scope="session")
def check_games():
    """Five fixed zero-sum games, 2x2 through 4x4."""
    return fixed_check_games()


@pytest.fixture
def pennies_factory():
    return MatrixFactory(matching_pennies())


@pytest.fixture
def brps_factory():
    return MatrixFactory(biased_rock_paper_scissors())


@pytest.fixture(scope="session")
def duel_factory():
    return DuelFactory(default_roster())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_tabular(n_states, n_ids, n_actions, seed=0, scale=0.5):
    params = init_tabular(n_states, n_ids, n_actions)
    flat = rng_stream(seed, "test_tabular").normal(scale=scale, size=params.flat.size)
    return params.with_flat(flat)


def random_mlp(obs_dim, n_ids, n_actions, hidden=6, seed=0, scale=0.4):
    params = init_mlp(obs_dim, n_ids, n_actions, hidden, rng_stream(seed, "test_mlp"))
    flat = rng_stream(seed, "test_mlp_flat").normal(scale=scale, size=params.flat.size)
    return params.with_flat(flat)


# ---------------------------------------------------------------------------
# Acceptance reporting: one line per criterion, echoed in the final summary.

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, name: str, passed: bool, detail: str) -> bool:
    line = f"CRITERION {number} {name}: {'PASS' if passed else 'FAIL'} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
