# Bellman operators T_μ and T, Q-factors, policy evaluation, value iteration,
# greedy policies and the optimality checkers.
#
# Every operator goes through q_values() so that min_u Q(x,u,J) and (TJ)(x),
# or Q(x,μ(x),J) and (T_μ J)(x), are computed by the same arithmetic and agree exactly.
#
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from onlinepi import OPTIMALITY_TOLERANCE
from onlinepi.model.mdp import CostVector, InvalidAction, InvalidPolicy, MdpInstance, StationaryPolicy

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


class DimensionMismatch(ValueError):
    """Cost vector length does not match the number of states."""


# #############################################
# Q-FACTORS
#
@dataclass(frozen=True)
class QFactorRow:
    """Q_μ(x,u) for every u in U(x), in declaration order."""

    state: int
    labels: tuple[str, ...]
    values: tuple[float, ...]

    def value(self, label: str) -> float:
        try:
            return self.values[self.labels.index(label)]
        except ValueError:
            raise InvalidAction(self.state, label) from None

    def min(self) -> float:
        return min(self.values)

    def argmin(self) -> str:
        """Minimizing label, smallest declaration index on ties."""
        return self.labels[int(np.argmin(self.values))]

    def info(self) -> dict:
        return {"state": self.state, "q": {u: q for u, q in zip(self.labels, self.values)}}


def _vector(instance: MdpInstance, J) -> np.ndarray:
    J = np.asarray(J, dtype=np.float64)
    if J.shape != (instance.n,):
        raise DimensionMismatch(f"cost vector of shape {J.shape} for an instance with {instance.n} states")
    return J


def _indices(instance: MdpInstance, policy: StationaryPolicy) -> tuple[int, ...]:
    if len(policy) != instance.n:
        raise InvalidPolicy(f"policy has {len(policy)} entries, instance has {instance.n} states")
    try:
        return policy.indices(instance)
    except InvalidAction as e:
        raise InvalidPolicy(str(e)) from None


def _check_state(instance: MdpInstance, x: int):
    if not 1 <= x <= instance.n:
        raise ValueError(f"state {x} not in 1..{instance.n}")


def q_values(instance: MdpInstance, x: int, J) -> np.ndarray:
    """Σ_y p_xy(u) (g(x,u,y) + α J(y)) for every u in U(x), as an array in declaration order."""
    P = instance.probabilities(x)
    G = instance.costs(x)
    return (P * (G + instance.discount * J)).sum(axis=1)


def q_factor_row(instance: MdpInstance, x: int, J) -> QFactorRow:
    _check_state(instance, x)
    q = q_values(instance, x, _vector(instance, J))
    return QFactorRow(state=x, labels=instance.actions(x), values=tuple(float(v) for v in q))


def q_factor(instance: MdpInstance, x: int, u: str, J) -> float:
    _check_state(instance, x)
    i = instance.action_index(x, u)
    return float(q_values(instance, x, _vector(instance, J))[i])


# #############################################
# OPERATORS
#
def apply_tmu(instance: MdpInstance, policy: StationaryPolicy, J) -> CostVector:
    """(T_μ J)(x) = Σ_y p_xy(μ(x)) (g(x,μ(x),y) + α J(y))."""
    J = _vector(instance, J)
    indices = _indices(instance, policy)
    return np.array([q_values(instance, x, J)[indices[x - 1]] for x in range(1, instance.n + 1)], dtype=np.float64)


def apply_t(instance: MdpInstance, J) -> CostVector:
    """(T J)(x) = min over u in U(x) of Σ_y p_xy(u) (g(x,u,y) + α J(y))."""
    J = _vector(instance, J)
    return np.array([q_values(instance, x, J).min() for x in range(1, instance.n + 1)], dtype=np.float64)


def greedy_policy(instance: MdpInstance, J) -> StationaryPolicy:
    """Policy attaining (TJ)(x) at every x, smallest declaration index on ties."""
    J = _vector(instance, J)
    return StationaryPolicy.from_indices(instance, [int(np.argmin(q_values(instance, x, J))) for x in range(1, instance.n + 1)])


# #############################################
# POLICY EVALUATION
#
@dataclass(frozen=True)
class IterationResult:
    values: CostVector
    iterations: int
    converged: bool


def policy_matrix(instance: MdpInstance, policy: StationaryPolicy) -> tuple[np.ndarray, np.ndarray]:
    """Transition matrix P_μ and expected stage cost ḡ_μ under the policy."""
    indices = _indices(instance, policy)
    P = np.empty((instance.n, instance.n), dtype=np.float64)
    g = np.empty(instance.n, dtype=np.float64)
    for x in range(1, instance.n + 1):
        a = indices[x - 1]
        row = instance.probabilities(x)[a]
        P[x - 1] = row
        g[x - 1] = (row * instance.costs(x)[a]).sum()
    return P, g


def evaluate_policy_exact(instance: MdpInstance, policy: StationaryPolicy) -> CostVector:
    """J_μ, the unique solution of J = T_μ J, by dense solve of (I - α P_μ) J = ḡ_μ."""
    P, g = policy_matrix(instance, policy)
    J = np.linalg.solve(np.eye(instance.n) - instance.discount * P, g)
    residual = float(np.max(np.abs(J - apply_tmu(instance, policy, J))))
    bound = 1e-8 * (1.0 + float(np.max(np.abs(J))))
    if residual > bound:
        logger.warning(f"policy evaluation residual {residual:.3e} exceeds {bound:.3e}")
    return J


def evaluate_policy_iterative(instance: MdpInstance, policy: StationaryPolicy, tol: float = 1e-10, max_iters: int = 100_000) -> IterationResult:
    """Repeats J ← T_μ J from J = 0 until the sup-norm change is at most tol."""
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    J = np.zeros(instance.n, dtype=np.float64)
    for k in range(1, max_iters + 1):
        J_new = apply_tmu(instance, policy, J)
        delta = float(np.max(np.abs(J_new - J)))
        J = J_new
        if delta <= tol:
            logger.debug(f"policy evaluation converged after {k} iterations")
            return IterationResult(values=J, iterations=k, converged=True)
    logger.warning(f"policy evaluation did not converge within {max_iters} iterations (tol={tol})")
    return IterationResult(values=J, iterations=max_iters, converged=False)


def value_iteration(instance: MdpInstance, J0=None, tol: float = 1e-9, max_iters: int = 100_000) -> IterationResult:
    """Repeats J ← T J until the sup-norm change is at most tol.

    The returned J satisfies ‖J - TJ‖∞ ≤ α tol ≤ tol on convergence.
    """
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    J = np.zeros(instance.n, dtype=np.float64) if J0 is None else _vector(instance, J0).copy()
    for k in range(1, max_iters + 1):
        J_new = apply_t(instance, J)
        delta = float(np.max(np.abs(J_new - J)))
        J = J_new
        if delta <= tol:
            logger.debug(f"value iteration converged after {k} iterations")
            return IterationResult(values=J, iterations=k, converged=True)
    logger.warning(f"value iteration did not converge within {max_iters} iterations (tol={tol})")
    return IterationResult(values=J, iterations=max_iters, converged=False)


# #############################################
# OPTIMALITY CHECKERS
#
def _states(instance: MdpInstance, X) -> list[int]:
    states = sorted(set(int(x) for x in X))
    for x in states:
        _check_state(instance, x)
    return states


def bellman_gap(instance: MdpInstance, policy: StationaryPolicy, J=None) -> CostVector:
    """(T_μ J_μ)(x) - (T J_μ)(x) for every x; nonnegative up to rounding."""
    if J is None:
        J = evaluate_policy_exact(instance, policy)
    return apply_tmu(instance, policy, J) - apply_t(instance, J)


def check_global_optimality(instance: MdpInstance, policy: StationaryPolicy, tol: float = OPTIMALITY_TOLERANCE, J=None) -> bool:
    """True iff ‖T_μ J_μ - T J_μ‖∞ ≤ tol."""
    return bool(np.max(np.abs(bellman_gap(instance, policy, J))) <= tol)


def check_local_optimality(instance: MdpInstance, policy: StationaryPolicy, X, tol: float = OPTIMALITY_TOLERANCE, J=None) -> bool:
    """True iff |(T_μ J_μ)(x) - (T J_μ)(x)| ≤ tol for every x in X."""
    states = _states(instance, X)
    if not states:
        return True
    gap = bellman_gap(instance, policy, J)
    return bool(all(abs(gap[x - 1]) <= tol for x in states))


def check_invariant_set(instance: MdpInstance, policy: StationaryPolicy, X) -> bool:
    """True iff p_xy(μ(x)) = 0 for every x in X and y outside X."""
    states = _states(instance, X)
    inside = np.zeros(instance.n, dtype=bool)
    inside[[x - 1 for x in states]] = True
    indices = _indices(instance, policy)
    for x in states:
        row = instance.probabilities(x)[indices[x - 1]]
        if np.any(row[~inside] > 0):
            logger.debug(f"state {x} leaves the set under {policy(x)}")
            return False
    return True


def reachable_states(instance: MdpInstance, policy: StationaryPolicy, x: int) -> set[int]:
    """States reachable from x with positive probability under the policy, x included."""
    _check_state(instance, x)
    indices = _indices(instance, policy)
    seen = {x}
    frontier = [x]
    while frontier:
        s = frontier.pop()
        for y in np.flatnonzero(instance.probabilities(s)[indices[s - 1]] > 0) + 1:
            if int(y) not in seen:
                seen.add(int(y))
                frontier.append(int(y))
    return seen


def is_irreducible(instance: MdpInstance, policy: StationaryPolicy) -> bool:
    """True iff no proper nonempty subset of states is invariant under the policy.

    When this holds for every policy, local optimality over the recurrent set of an
    on-line run is global optimality.
    """
    everything = set(range(1, instance.n + 1))
    return all(reachable_states(instance, policy, x) == everything for x in everything)
