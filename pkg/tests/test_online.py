import dataclasses

import numpy as np
import pytest

from conftest import random_instances
from onlinepi.model import Action, MdpInstance, State, StationaryPolicy, generate_random, named_policy
from onlinepi.algorithms import (
    IMPROVEMENT_RULE,
    DimensionMismatch,
    ONLINE_MODE,
    TERMINATION,
    InvalidConfig,
    InvalidStart,
    OnlineConfig,
    check_global_optimality,
    check_invariant_set,
    check_local_optimality,
    evaluate_policy_exact,
    greedy_policy,
    improvement_step,
    run_online_pi,
    verify_run,
)
from onlinepi.harness import enumerate_optimal


def _three_self_loops() -> MdpInstance:
    actions = tuple(Action(label=u, transitions=((1, 1.0),), costs=((1, g),)) for u, g in (("a", 10.0), ("b", 5.0), ("c", 1.0)))
    return MdpInstance(n=1, discount=0.9, states=(State(id=1, actions=actions),))


# #############################################
# CONFIGURATION
#
def test_config_defaults():
    config = OnlineConfig()
    assert config.mode == ONLINE_MODE.PLAIN
    assert config.improvement_rule == IMPROVEMENT_RULE.ARGMIN
    assert config.epsilon_improve == 1e-9
    assert config.window(7) == 70
    assert config.replace(stable_window=3).window(7) == 3


def test_config_from_plain_values():
    config = OnlineConfig.new(mode="exploration", improvement_rule="first_improving", epsilon_improve="1e-6", seed=12, stable_window=None, colour="red")
    assert config.mode == ONLINE_MODE.EXPLORATION
    assert config.improvement_rule == IMPROVEMENT_RULE.FIRST_IMPROVING
    assert config.epsilon_improve == 1e-6
    assert config.stable_window is None
    assert OnlineConfig.new(**config.info()) == config


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(mode="bogus"),
        dict(improvement_rule="best"),
        dict(epsilon_improve=-1.0),
        dict(max_steps=-1),
        dict(stable_window=0),
        dict(seed=-1),
        dict(seed=2**64),
    ],
)
def test_invalid_config(kwargs):
    with pytest.raises(InvalidConfig):
        OnlineConfig(**kwargs)


# #############################################
# IMPROVEMENT STEP
#
def test_improvement_step_on_counterexample(counterexample, mubar):
    J = evaluate_policy_exact(counterexample, mubar)
    assert improvement_step(counterexample, mubar, J, 1) == ("to2", False)
    assert improvement_step(counterexample, mubar, J, 2) == ("to1", False)
    assert improvement_step(counterexample, mubar, J, 3) == ("to2", True)


def test_improvement_step_single_action(self_loop):
    policy = StationaryPolicy(("stay",))
    J = evaluate_policy_exact(self_loop, policy)
    assert improvement_step(self_loop, policy, J, 1) == ("stay", False)


def test_improvement_step_checks_its_arguments(counterexample, mubar):
    J = evaluate_policy_exact(counterexample, mubar)
    assert improvement_step(counterexample, mubar, [float(v) for v in J], 3) == ("to2", True)
    with pytest.raises(DimensionMismatch):
        improvement_step(counterexample, mubar, J[:2], 1)
    with pytest.raises(ValueError):
        improvement_step(counterexample, mubar, J, 4)


def test_improvement_rules():
    instance = _three_self_loops()
    policy = StationaryPolicy(("a",))
    J = evaluate_policy_exact(instance, policy)
    assert improvement_step(instance, policy, J, 1, OnlineConfig()) == ("c", True)
    assert improvement_step(instance, policy, J, 1, OnlineConfig(improvement_rule="first_improving")) == ("b", True)
    # a margin larger than every improvement blocks the edit
    assert improvement_step(instance, policy, J, 1, OnlineConfig(epsilon_improve=50.0)) == ("a", False)


# #############################################
# PLAIN MODE
#
@pytest.mark.parametrize("seed", [0, 1, 5, 2**63])
def test_counterexample_stagnation(counterexample, mubar, seed):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(max_steps=1000, stable_window=2000, seed=seed))
    assert log.steps == 1000
    assert log.policy_changes == 0
    assert log.final_policy == mubar
    assert log.trajectory()[:4] == [1, 2, 1, 2]
    assert set(log.trajectory()) == {1, 2}
    assert check_local_optimality(counterexample, log.final_policy, {1, 2}, tol=1e-8)
    assert check_invariant_set(counterexample, log.final_policy, {1, 2})
    assert sum(log.visit_counts.values()) == 1000


def test_counterexample_plain_convergence(counterexample, mubar):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(seed=5))
    assert log.termination == TERMINATION.CONVERGED
    assert log.steps == 30
    assert log.recurrent_estimate == [1, 2]
    assert not check_global_optimality(counterexample, log.final_policy)
    report = verify_run(counterexample, log)
    assert report.ok, report.describe()
    assert report.finding("local-optimality").passed
    assert report.finding("invariance").passed


def test_zero_steps(counterexample, mubar):
    log = run_online_pi(counterexample, 2, mubar, OnlineConfig(max_steps=0))
    assert log.steps == 0
    assert log.final_policy == mubar
    assert log.termination == TERMINATION.MAX_STEPS
    assert log.recurrent_estimate == []


def test_plain_improves_state_3(counterexample, mubar):
    log = run_online_pi(counterexample, 3, mubar, OnlineConfig(seed=1))
    first = log.records[0]
    assert first.state == 3 and first.changed and first.action == "to2"
    assert first.next_state == 2
    assert first.cost is not None and first.cost[2] < 100.0
    assert verify_run(counterexample, log).ok


def test_invalid_start(counterexample, mubar):
    with pytest.raises(InvalidStart):
        run_online_pi(counterexample, 0, mubar)
    with pytest.raises(InvalidStart):
        run_online_pi(counterexample, 4, mubar)
    with pytest.raises(InvalidStart):
        run_online_pi(counterexample, 1, StationaryPolicy(("to2", "to1", "to1")))


def test_runs_are_deterministic(small_random):
    mu0 = named_policy(small_random, "first")
    config = OnlineConfig(mode="exploration", seed=99, max_steps=300)
    a = run_online_pi(small_random, 1, mu0, config)
    b = run_online_pi(small_random, 1, mu0, config)
    assert [r.info() for r in a.records] == [r.info() for r in b.records]
    assert a.info() == b.info()


def test_monotone_improvement_sweep():
    violations = 0
    converged = 0
    for seed, instance in random_instances(100, 10, 4):
        mu0 = named_policy(instance, "first")
        log = run_online_pi(instance, 1 + seed % instance.n, mu0, OnlineConfig(max_steps=500, seed=seed))
        report = verify_run(instance, log)
        violations += len(report.failures())
        assert report.finding("monotone").passed, report.describe()
        assert report.finding("strict-decrease").passed, report.describe()
        assert report.finding("edits").passed, report.describe()
        assert log.policy_changes < instance.policy_count
        assert np.all(log.final_cost <= log.initial_cost + 1e-8)
        if log.converged:
            converged += 1
            X = log.recurrent_estimate
            assert check_local_optimality(instance, log.final_policy, X, tol=1e-8)
            assert check_invariant_set(instance, log.final_policy, X)
            assert report.finding("local-optimality").passed
            assert report.finding("invariance").passed
    assert violations == 0
    assert converged > 0


def test_irreducible_instances_reach_global_optimum():
    for seed in range(20):
        n = 2 + seed % 4
        # every action reaches every state: no policy has a proper invariant subset
        instance = generate_random(n, 3, n, seed=seed)
        assert enumerate_optimal(instance, irreducibility=True).all_irreducible
        log = run_online_pi(instance, 1, named_policy(instance, "first"), OnlineConfig(max_steps=2000, seed=seed))
        if log.converged:
            assert log.recurrent_estimate == list(range(1, n + 1))
            assert check_global_optimality(instance, log.final_policy)


# #############################################
# EXPLORATION MODE
#
def test_exploration_recovers_global_optimum(counterexample, mubar):
    for seed in range(1, 21):
        log = run_online_pi(counterexample, 1, mubar, OnlineConfig(mode="exploration", max_steps=500, seed=seed))
        assert log.converged, f"seed {seed}"
        assert log.steps <= 500
        assert check_global_optimality(counterexample, log.final_policy, tol=1e-8)
        np.testing.assert_allclose(log.final_cost, np.zeros(3), atol=1e-8)
        report = verify_run(counterexample, log)
        assert report.ok, report.describe()
        assert report.finding("global-optimality").passed


def test_exploration_states_differ_from_current(small_random):
    log = run_online_pi(small_random, 2, named_policy(small_random, "first"), OnlineConfig(mode="exploration", seed=3, max_steps=200))
    for r in log.records:
        assert r.explore_state is not None and r.explore_state != r.state
        assert len(r.edited_states()) <= 2


def test_exploration_single_state(self_loop):
    log = run_online_pi(self_loop, 1, StationaryPolicy(("stay",)), OnlineConfig(mode="exploration", seed=0))
    assert log.converged
    assert all(r.explore_state is None for r in log.records)


def test_exploration_lands_in_oracle_set():
    for seed, instance in random_instances(50, 5, 3, first_seed=1000):
        oracle = enumerate_optimal(instance)
        log = run_online_pi(instance, 1, named_policy(instance, "first"), OnlineConfig(mode="exploration", max_steps=5000, seed=seed))
        assert log.converged, f"seed {seed}"
        assert oracle.contains(log.final_policy), f"seed {seed}: {log.final_policy}"


# #############################################
# ROLLOUT MODE
#
def test_rollout_never_edits(counterexample, mubar):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(mode="rollout", seed=4))
    assert log.policy_changes == 0
    assert log.final_policy == mubar
    rollout = greedy_policy(counterexample, evaluate_policy_exact(counterexample, mubar))
    assert log.rollout_policy == rollout
    assert log.acting_policy == rollout
    assert all(r.action == rollout(r.state) for r in log.records)
    report = verify_run(counterexample, log)
    assert report.ok, report.describe()
    assert report.finding("rollout-unchanged").passed


def test_rollout_is_no_worse_than_base():
    for seed, instance in random_instances(30, 8, 4):
        mu0 = named_policy(instance, "first")
        log = run_online_pi(instance, 1, mu0, OnlineConfig(mode="rollout", max_steps=200, seed=seed))
        assert np.all(evaluate_policy_exact(instance, log.acting_policy) <= evaluate_policy_exact(instance, mu0) + 1e-8)
        assert verify_run(instance, log).ok


# #############################################
# VERIFICATION OF TAMPERED LOGS
#
def _changing_log(counterexample, mubar):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(mode="exploration", seed=1))
    assert log.policy_changes > 0
    return log


def test_verify_flags_raised_snapshot(counterexample, mubar):
    log = _changing_log(counterexample, mubar)
    i = next(i for i, r in enumerate(log.records) if r.cost is not None)
    r = log.records[i]
    log.records[i] = dataclasses.replace(r, cost=r.cost + 1000.0)
    report = verify_run(counterexample, log)
    assert not report.ok
    failures = {f.name: f for f in report.failures()}
    assert failures["monotone"].step == r.k
    assert "snapshot" in failures


def test_verify_flags_broken_trajectory(counterexample, mubar):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(seed=2))
    r = log.records[3]
    log.records[3] = dataclasses.replace(r, next_state=3)
    report = verify_run(counterexample, log)
    assert any(f.name == "trajectory" and f.step == 3 for f in report.failures())


def test_verify_flags_wrong_final_policy(counterexample, mubar, mustar):
    log = run_online_pi(counterexample, 1, mubar, OnlineConfig(seed=2))
    log.final_policy = mustar
    assert not verify_run(counterexample, log).finding("final-policy").passed
