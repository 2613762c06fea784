# Classical (off-line, all-states) policy iteration.
#
# Evaluation by exact solve, improvement at every state. Stops when the
# improved policy repeats the current one.
#
from __future__ import annotations

import io
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from tabulate import tabulate

from onlinepi import INCUMBENT_SLACK, SIGNIFICANT_DIGITS
from onlinepi.model.mdp import CostVector, MdpInstance, StationaryPolicy
from .bellman import _indices, _vector, evaluate_policy_exact, q_values

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


class TERMINATION(Enum):
    # Why a run stopped, shared by every iterative algorithm
    #
    CONVERGED = "converged"
    MAX_ITERATIONS = "max-iterations"
    MAX_STEPS = "max-steps"


@dataclass
class PiTrace:
    """(μ^k, J_{μ^k}) for every iteration, and why it stopped."""

    iterates: list[tuple[StationaryPolicy, CostVector]] = field(default_factory=list)
    termination: TERMINATION = TERMINATION.MAX_ITERATIONS

    @property
    def converged(self) -> bool:
        return self.termination == TERMINATION.CONVERGED

    @property
    def final_policy(self) -> StationaryPolicy:
        return self.iterates[-1][0]

    @property
    def final_cost(self) -> CostVector:
        return self.iterates[-1][1]

    def is_monotone(self, slack: float = 1e-8) -> bool:
        return all(np.all(b <= a + slack) for (_, a), (_, b) in zip(self.iterates, self.iterates[1:]))

    def info(self) -> dict:
        return {
            "termination": self.termination.value,
            "iterates": [{"iteration": k, "policy": mu.info(), "cost": [float(v) for v in J]} for k, (mu, J) in enumerate(self.iterates)],
        }

    def print(self, level=logging.INFO):
        output = io.StringIO()
        print("\n", file=output)
        table = [(k, str(mu), " ".join(f"{v:.{SIGNIFICANT_DIGITS}g}" for v in J)) for k, (mu, J) in enumerate(self.iterates)]
        print(tabulate(table, headers=["ITERATION", "POLICY", "COST"]), file=output)
        print(f"termination: {self.termination.value}", file=output)
        contents = output.getvalue()
        output.close()
        logger.log(level, f"{contents}")


def improve_policy(instance: MdpInstance, policy: StationaryPolicy, J, slack: float = INCUMBENT_SLACK) -> StationaryPolicy:
    """Policy improvement at every state.

    Keeps μ(x) when its Q-factor is within slack of the minimum, otherwise takes the
    minimizer with the smallest declaration index.
    """
    J = _vector(instance, J)
    current = _indices(instance, policy)
    chosen = []
    for x in range(1, instance.n + 1):
        q = q_values(instance, x, J)
        best = int(np.argmin(q))
        chosen.append(current[x - 1] if q[current[x - 1]] <= q[best] + slack else best)
    return StationaryPolicy.from_indices(instance, chosen)


def run_classical_pi(instance: MdpInstance, initial: StationaryPolicy, max_iters: int = 1000) -> PiTrace:
    """Alternates exact evaluation and improvement until the policy repeats.

    Hitting max_iters is flagged in the trace termination, not raised.
    """
    initial.check(instance)
    trace = PiTrace()
    policy = initial
    for k in range(max_iters):
        J = evaluate_policy_exact(instance, policy)
        trace.iterates.append((policy, J))
        improved = improve_policy(instance, policy, J)
        changed = policy.differences(improved)
        logger.debug(f"iteration {k}: {len(changed)} state(s) improved")
        if not changed:
            trace.termination = TERMINATION.CONVERGED
            logger.info(f"policy iteration converged after {k + 1} evaluation(s)")
            return trace
        policy = improved
    trace.termination = TERMINATION.MAX_ITERATIONS
    logger.warning(f"policy iteration stopped at max_iters={max_iters}")
    return trace
