# ###########################
# Built-in instances and seeded random instances.
#
# Random instances use numpy's PCG64 generator (numpy.random.default_rng).
# The generator is a pure function of its arguments: same arguments, same
# canonical serialization, on every platform numpy supports.
#
from __future__ import annotations

import logging

import numpy as np

from .mdp import Action, InvalidPolicy, MdpInstance, State, StationaryPolicy, validate

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

MAX_SEED = 2**64 - 1
MIN_WEIGHT = 0.05  # smallest unnormalized transition weight, keeps every listed successor reachable


class GeneratorError(ValueError):
    """Invalid arguments for the random instance generator."""


def _deterministic(label: str, to: int, cost: float) -> Action:
    return Action(label=label, transitions=((to, 1.0),), costs=((to, cost),))


# #############################################
# COUNTEREXAMPLE
#
# Three states. From 1: go to 2 at cost 1, or to 3 at cost 0. From 2: go to 1 or 3
# at cost 0. From 3: go to 2 at cost 0, or stay at cost 10. Discount 0.9.
#
COUNTEREXAMPLE_NAME = "counterexample"

COUNTEREXAMPLE_POLICIES = {
    "mubar": ("to2", "to1", "stay"),  # locally optimal over {1, 2}, strictly suboptimal
    "mustar": ("to3", "to3", "to2"),  # optimal, J* = 0
}


def build_counterexample() -> MdpInstance:
    """Deterministic 3-state instance where on-line PI from state 1 and mubar never improves."""
    return MdpInstance(
        n=3,
        discount=0.9,
        states=(
            State(id=1, actions=(_deterministic("to2", 2, 1.0), _deterministic("to3", 3, 0.0))),
            State(id=2, actions=(_deterministic("to1", 1, 0.0), _deterministic("to3", 3, 0.0))),
            State(id=3, actions=(_deterministic("to2", 2, 0.0), _deterministic("stay", 3, 10.0))),
        ),
    )


def build_self_loop(cost: float = 1.0, discount: float = 0.9) -> MdpInstance:
    """Single state, single action, returns to itself at the given cost."""
    return MdpInstance(n=1, discount=discount, states=(State(id=1, actions=(_deterministic("stay", 1, cost),)),))


BUILTIN_INSTANCES = {
    COUNTEREXAMPLE_NAME: build_counterexample,
}


def named_policy(instance: MdpInstance, name: str) -> StationaryPolicy:
    """Resolves a policy name.

    Accepted: "mubar" and "mustar" (counterexample only), "first" (first declared action
    everywhere), or comma-separated labels such as "to2,to1,stay".
    """
    key = name.strip().lower()
    if key in COUNTEREXAMPLE_POLICIES:
        if instance != build_counterexample():
            raise InvalidPolicy(f"policy {name!r} is only defined for the {COUNTEREXAMPLE_NAME} instance")
        return StationaryPolicy(COUNTEREXAMPLE_POLICIES[key])
    if key == "first":
        return StationaryPolicy(tuple(s.actions[0].label for s in instance.states))
    policy = StationaryPolicy(tuple(label.strip() for label in name.split(",")))
    policy.check(instance)
    return policy


# #############################################
# RANDOM INSTANCES
#
def generate_random(
    n: int,
    max_actions: int,
    branching: int,
    cost_range: tuple[float, float] = (0.0, 1.0),
    discount: float = 0.9,
    seed: int = 0,
) -> MdpInstance:
    """Seeded random instance.

    Each state gets 1..max_actions actions labelled a1, a2, ...; each action gets `branching`
    distinct successors with weights drawn uniformly in [0.05, 1) then normalized; costs are
    uniform in cost_range.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise GeneratorError(f"n must be a positive integer, got {n!r}")
    if isinstance(max_actions, bool) or not isinstance(max_actions, int) or max_actions < 1:
        raise GeneratorError(f"max_actions must be a positive integer, got {max_actions!r}")
    if isinstance(branching, bool) or not isinstance(branching, int) or branching < 1:
        raise GeneratorError(f"branching must be a positive integer, got {branching!r}")
    if branching > n:
        raise GeneratorError(f"branching {branching} exceeds number of states {n}")
    lo, hi = float(cost_range[0]), float(cost_range[1])
    if not lo <= hi:
        raise GeneratorError(f"empty cost range [{lo}, {hi}]")
    if not 0.0 < discount < 1.0:
        raise GeneratorError(f"discount must lie strictly between 0 and 1, got {discount}")
    if isinstance(seed, bool) or not isinstance(seed, int) or not 0 <= seed <= MAX_SEED:
        raise GeneratorError(f"seed must be an unsigned 64-bit integer, got {seed!r}")

    rng = np.random.default_rng(seed)
    states = []
    for x in range(1, n + 1):
        m = int(rng.integers(1, max_actions + 1))
        actions = []
        for i in range(m):
            successors = np.sort(rng.choice(n, size=branching, replace=False)) + 1
            weights = rng.uniform(MIN_WEIGHT, 1.0, size=branching)
            probabilities = weights / weights.sum()
            costs = rng.uniform(lo, hi, size=branching)
            actions.append(
                Action(
                    label=f"a{i + 1}",
                    transitions=tuple((int(y), float(p)) for y, p in zip(successors, probabilities)),
                    costs=tuple((int(y), float(g)) for y, g in zip(successors, costs)),
                )
            )
        states.append(State(id=x, actions=tuple(actions)))

    instance = MdpInstance(n=n, discount=float(discount), states=tuple(states))
    validate(instance).raise_if_invalid()
    logger.debug(f"generated instance seed={seed}: {instance.describe()}")
    return instance
