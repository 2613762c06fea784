import numpy as np

from conftest import random_instances
from onlinepi.model import generate_random, named_policy
from onlinepi.algorithms import TERMINATION, check_global_optimality, evaluate_policy_exact, improve_policy, run_classical_pi
from onlinepi.harness import enumerate_optimal


def test_from_mubar_reaches_zero_cost(counterexample, mubar):
    trace = run_classical_pi(counterexample, mubar)
    assert trace.converged
    np.testing.assert_allclose(trace.final_cost, np.zeros(3), atol=1e-6)
    assert check_global_optimality(counterexample, trace.final_policy)
    assert trace.is_monotone()
    assert trace.iterates[0][0] == mubar


def test_optimal_policy_is_a_fixed_point(counterexample, mustar):
    trace = run_classical_pi(counterexample, mustar)
    assert trace.termination == TERMINATION.CONVERGED
    assert len(trace.iterates) == 1
    assert trace.final_policy == mustar


def test_improvement_keeps_tied_incumbent(counterexample, mustar):
    # at state 2 both controls have Q = 0 under J* = 0
    J = evaluate_policy_exact(counterexample, mustar)
    assert improve_policy(counterexample, mustar, J) == mustar
    other = named_policy(counterexample, "to3,to1,to2")
    assert improve_policy(counterexample, other, J) == other


def test_random_instance_matches_oracle(small_random):
    trace = run_classical_pi(small_random, named_policy(small_random, "first"))
    assert trace.converged
    np.testing.assert_allclose(trace.final_cost, enumerate_optimal(small_random).optimal_cost, atol=1e-6)


def test_max_iterations_is_flagged():
    instance = generate_random(8, 4, 3, seed=3)
    first = named_policy(instance, "first")
    full = run_classical_pi(instance, first)
    assert full.converged
    if len(full.iterates) > 1:
        trace = run_classical_pi(instance, first, max_iters=1)
        assert trace.termination == TERMINATION.MAX_ITERATIONS
        assert len(trace.iterates) == 1


def test_iterates_are_monotone_and_bounded():
    for _, instance in random_instances(30, 6, 3):
        trace = run_classical_pi(instance, named_policy(instance, "first"))
        assert trace.converged
        assert trace.is_monotone(slack=1e-8)
        assert len(trace.iterates) <= instance.policy_count
        assert check_global_optimality(instance, trace.final_policy, tol=1e-8)


def test_trace_info(counterexample, mubar):
    info = run_classical_pi(counterexample, mubar).info()
    assert info["termination"] == "converged"
    assert info["iterates"][0] == {"iteration": 0, "policy": ["to2", "to1", "stay"], "cost": [float(v) for v in evaluate_policy_exact(counterexample, mubar)]}
