import pytest

from onlinepi.model import StationaryPolicy, build_counterexample, build_self_loop, generate_random, named_policy

MUBAR_COST = (1 / 0.19, 0.9 / 0.19, 100.0)


@pytest.fixture
def counterexample():
    return build_counterexample()


@pytest.fixture
def mubar(counterexample) -> StationaryPolicy:
    return named_policy(counterexample, "mubar")


@pytest.fixture
def mustar(counterexample) -> StationaryPolicy:
    return named_policy(counterexample, "mustar")


@pytest.fixture
def self_loop():
    return build_self_loop(cost=1.0, discount=0.9)


@pytest.fixture
def small_random():
    """n=4, up to 3 actions, seed 23."""
    return generate_random(4, 3, 2, seed=23)


def random_instances(count: int, n_max: int, max_actions: int, first_seed: int = 0):
    """Seeded sweep of random instances with 2..n_max states."""
    for seed in range(first_seed, first_seed + count):
        n = 2 + seed % (n_max - 1)
        yield seed, generate_random(n, max_actions, min(3, n), seed=seed)
