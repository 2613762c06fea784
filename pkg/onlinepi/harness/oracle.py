# Brute-force ground truth for tiny instances.
#
# Every stationary policy is evaluated exactly; policies are walked with a
# mixed-radix counter over action indices (itertools.product).
#
from __future__ import annotations

import io
import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from tabulate import tabulate

from onlinepi import ENUMERATION_LIMIT, ORACLE_TOLERANCE, SIGNIFICANT_DIGITS
from onlinepi.model.mdp import CostVector, MdpInstance, StationaryPolicy
from onlinepi.algorithms.bellman import apply_t, evaluate_policy_exact, is_irreducible

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


class EnumerationTooLarge(Exception):
    """Instance has more stationary policies than the enumeration guard allows."""


class OracleInconsistency(Exception):
    """Enumerated optimum is not a fixed point of T."""


@dataclass
class OracleReport:
    optimal_cost: CostVector  # J*
    optimal_policies: list[StationaryPolicy] = field(default_factory=list)
    enumerated: int = 0
    tol: float = ORACLE_TOLERANCE
    all_irreducible: bool | None = None  # None when not computed

    def contains(self, policy: StationaryPolicy) -> bool:
        return policy in self.optimal_policies

    def gap(self, J) -> float:
        """‖J - J*‖∞"""
        return float(np.max(np.abs(np.asarray(J, dtype=np.float64) - self.optimal_cost)))

    def info(self) -> dict:
        return {
            "optimal_cost": [float(v) for v in self.optimal_cost],
            "optimal_policies": [p.info() for p in self.optimal_policies],
            "enumerated": self.enumerated,
            "tol": self.tol,
            "all_irreducible": self.all_irreducible,
        }

    def print(self, level=logging.INFO):
        output = io.StringIO()
        print("\n", file=output)
        table = [(x, f"{v:.{SIGNIFICANT_DIGITS}g}") for x, v in enumerate(self.optimal_cost, start=1)]
        print(tabulate(table, headers=["STATE", "J*"]), file=output)
        print(f"{len(self.optimal_policies)} optimal of {self.enumerated} policies:", file=output)
        for p in self.optimal_policies:
            print(f"  {p}", file=output)
        contents = output.getvalue()
        output.close()
        logger.log(level, f"{contents}")


def enumerate_optimal(instance: MdpInstance, tol: float = ORACLE_TOLERANCE, limit: int = ENUMERATION_LIMIT, irreducibility: bool = False) -> OracleReport:
    """Evaluates every stationary policy and returns J* with all policies within tol of it.

    With irreducibility=True the report also tells whether every policy leaves no proper
    invariant subset of states.
    """
    count = instance.policy_count
    if count > limit:
        raise EnumerationTooLarge(f"{count} policies exceed the enumeration limit {limit}")
    logger.debug(f"evaluating {count} policies..")

    best = np.full(instance.n, np.inf)
    candidates: list[tuple[StationaryPolicy, CostVector]] = []
    all_irreducible = True if irreducibility else None
    for indices in itertools.product(*(range(len(s.actions)) for s in instance.states)):
        policy = StationaryPolicy.from_indices(instance, indices)
        J = evaluate_policy_exact(instance, policy)
        best = np.minimum(best, J)
        # best only decreases: a policy already beyond best + tol can never come back
        candidates = [(p, c) for p, c in candidates if np.all(c <= best + tol)]
        if np.all(J <= best + tol):
            candidates.append((policy, J))
        if irreducibility and all_irreducible and not is_irreducible(instance, policy):
            all_irreducible = False
    logger.debug("..done")

    residual = float(np.max(np.abs(best - apply_t(instance, best))))
    if residual > 10 * tol:
        raise OracleInconsistency(f"‖J* - TJ*‖∞ = {residual:.3e} exceeds {10 * tol:.3e}")

    optimal = [p for p, J in candidates if float(np.max(np.abs(J - best))) <= tol]
    logger.info(f"oracle: {len(optimal)} optimal policies among {count}")
    return OracleReport(optimal_cost=best, optimal_policies=optimal, enumerated=count, tol=tol, all_irreducible=all_irreducible)
