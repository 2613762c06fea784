import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onlinepi.model import GeneratorError, build_self_loop, generate_random, save_instance, validate


def test_single_self_loop_shape():
    instance = generate_random(1, 1, 1, cost_range=(0.0, 0.0), discount=0.9, seed=7)
    assert instance.n == 1
    action = instance.states[0].actions[0]
    assert action.transitions == ((1, 1.0),)
    assert action.costs == ((1, 0.0),)


def test_same_arguments_same_instance():
    a = generate_random(5, 3, 2, cost_range=(0.0, 1.0), discount=0.9, seed=42)
    b = generate_random(5, 3, 2, cost_range=(0.0, 1.0), discount=0.9, seed=42)
    assert save_instance(a) == save_instance(b)


def test_other_seed_other_instance():
    a = generate_random(5, 3, 2, seed=42)
    b = generate_random(5, 3, 2, seed=43)
    assert save_instance(a) != save_instance(b)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(n=0, max_actions=1, branching=1),
        dict(n=5, max_actions=0, branching=1),
        dict(n=5, max_actions=3, branching=9),
        dict(n=5, max_actions=3, branching=0),
        dict(n=5, max_actions=3, branching=2, discount=1.0),
        dict(n=5, max_actions=3, branching=2, cost_range=(1.0, 0.0)),
        dict(n=5, max_actions=3, branching=2, seed=-1),
        dict(n=5, max_actions=3, branching=2, seed=2**64),
    ],
)
def test_rejected_arguments(kwargs):
    with pytest.raises(GeneratorError):
        generate_random(**kwargs)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=8),
    max_actions=st.integers(min_value=1, max_value=4),
    data=st.data(),
    seed=st.integers(min_value=0, max_value=2**64 - 1),
)
def test_generated_instances_are_valid(n, max_actions, data, seed):
    branching = data.draw(st.integers(min_value=1, max_value=n))
    instance = generate_random(n, max_actions, branching, cost_range=(-2.0, 3.0), seed=seed)
    assert validate(instance).ok
    for s in instance.states:
        assert 1 <= len(s.actions) <= max_actions
        for a in s.actions:
            assert len(a.successors()) == branching
            assert all(-2.0 <= g <= 3.0 for _, g in a.costs)


def test_self_loop():
    instance = build_self_loop(cost=2.0, discount=0.5)
    assert validate(instance).ok
    assert instance.actions(1) == ("stay",)
    assert instance.action(1, "stay").cost(1) == 2.0
