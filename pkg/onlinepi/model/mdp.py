# Finite-state discounted MDP data model.
#
# States are numbered 1..n on every interface. Arrays are 0-based internally:
# state x lives at position x - 1.
#
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from onlinepi import PROBABILITY_TOLERANCE

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)


# A cost vector is a plain float64 array of length n, J(x) at position x - 1.
CostVector = np.ndarray


class InstanceError(Exception):
    """Base class for instance related errors."""


class InstanceValidationError(InstanceError):
    """Instance does not satisfy the model invariants."""

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        InstanceError.__init__(self, f"{len(self.violations)} violation(s): " + "; ".join(self.violations))


class InvalidAction(InstanceError, ValueError):
    """Action label is not in U(x)."""

    def __init__(self, x: int, label: str):
        self.x = x
        self.label = label
        InstanceError.__init__(self, f"action {label!r} not in U({x})")


class InvalidPolicy(InstanceError, ValueError):
    """Policy does not fit the instance."""


# #############################################
# INSTANCE
#
@dataclass(frozen=True)
class Action:
    """One control u at a state: its successors p_xy(u) and stage costs g(x,u,y)."""

    label: str
    transitions: tuple[tuple[int, float], ...]  # (y, p)
    costs: tuple[tuple[int, float], ...]  # (y, g)

    def successors(self) -> list[int]:
        return [y for y, p in self.transitions if p > 0]

    def probability(self, y: int) -> float:
        return sum(p for to, p in self.transitions if to == y)

    def cost(self, y: int) -> float | None:
        for to, g in self.costs:
            if to == y:
                return g
        return None


@dataclass(frozen=True)
class State:
    id: int
    actions: tuple[Action, ...] = field(default_factory=tuple)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(a.label for a in self.actions)


@dataclass(frozen=True)
class MdpInstance:
    """States 1..n, per-state action sets U(x), transition probabilities, stage costs, discount α.

    Immutable after construction. Dense per-state tables are built on first use and
    require a valid instance (see validate).
    """

    n: int
    discount: float
    states: tuple[State, ...]

    def state(self, x: int) -> State:
        if not isinstance(x, (int, np.integer)) or not 1 <= x <= self.n:
            raise InstanceError(f"state {x} not in 1..{self.n}")
        return self.states[x - 1]

    def actions(self, x: int) -> tuple[str, ...]:
        """U(x) as labels, in declaration order."""
        return self.state(x).labels

    def action(self, x: int, label: str) -> Action:
        return self.state(x).actions[self.action_index(x, label)]

    def action_index(self, x: int, label: str) -> int:
        try:
            return self._indexes[x - 1][label]
        except KeyError:
            raise InvalidAction(x, label) from None

    @cached_property
    def _indexes(self) -> list[dict[str, int]]:
        # first declaration wins on duplicate labels, validate reports them
        indexes = []
        for s in self.states:
            idx = {}
            for i, a in enumerate(s.actions):
                idx.setdefault(a.label, i)
            indexes.append(idx)
        return indexes

    @property
    def max_actions(self) -> int:
        return max((len(s.actions) for s in self.states), default=0)

    @property
    def policy_count(self) -> int:
        return math.prod(len(s.actions) for s in self.states)

    # ##############
    # Dense tables
    #
    @cached_property
    def _tables(self) -> tuple[list[np.ndarray], list[np.ndarray]]:
        probabilities = []
        costs = []
        for s in self.states:
            m = len(s.actions)
            p = np.zeros((m, self.n), dtype=np.float64)
            g = np.zeros((m, self.n), dtype=np.float64)
            for i, a in enumerate(s.actions):
                for y, prob in a.transitions:
                    p[i, y - 1] += prob
                for y, cost in a.costs:
                    g[i, y - 1] = cost
            p.setflags(write=False)
            g.setflags(write=False)
            probabilities.append(p)
            costs.append(g)
        logger.debug(f"built dense tables for {self.n} states")
        return probabilities, costs

    def probabilities(self, x: int) -> np.ndarray:
        """Matrix of p_xy(u), one row per u in U(x), one column per y."""
        return self._tables[0][x - 1]

    def costs(self, x: int) -> np.ndarray:
        """Matrix of g(x,u,y), same shape as probabilities(x), zero where no transition."""
        return self._tables[1][x - 1]

    def describe(self) -> str:
        return f"{self.n} states, {sum(len(s.actions) for s in self.states)} state-action pairs, discount {self.discount}"


# #############################################
# POLICY
#
@dataclass(frozen=True)
class StationaryPolicy:
    """μ: one action label per state, μ(x) = choice[x - 1]."""

    choice: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "choice", tuple(self.choice))

    def __call__(self, x: int) -> str:
        return self.choice[x - 1]

    def __len__(self) -> int:
        return len(self.choice)

    def __str__(self) -> str:
        return "{" + ", ".join(f"{x}→{u}" for x, u in enumerate(self.choice, start=1)) + "}"

    def with_choice(self, x: int, label: str) -> StationaryPolicy:
        choice = list(self.choice)
        choice[x - 1] = label
        return StationaryPolicy(tuple(choice))

    def differences(self, other: StationaryPolicy) -> list[int]:
        """States where the two policies choose differently."""
        return [x for x, (a, b) in enumerate(zip(self.choice, other.choice), start=1) if a != b]

    def indices(self, instance: MdpInstance) -> tuple[int, ...]:
        return tuple(instance.action_index(x, u) for x, u in enumerate(self.choice, start=1))

    @classmethod
    def from_indices(cls, instance: MdpInstance, indices) -> StationaryPolicy:
        return cls(tuple(instance.states[i].actions[a].label for i, a in enumerate(indices)))

    def violations(self, instance: MdpInstance) -> list[str]:
        if len(self.choice) != instance.n:
            return [f"policy has {len(self.choice)} entries, instance has {instance.n} states"]
        return [f"action {u!r} not in U({x})" for x, u in enumerate(self.choice, start=1) if u not in instance.actions(x)]

    def check(self, instance: MdpInstance):
        problems = self.violations(instance)
        if problems:
            raise InvalidPolicy("; ".join(problems))

    def info(self) -> list[str]:
        return list(self.choice)


# #############################################
# COST VECTOR
#
def cost_vector(values, n: int | None = None) -> CostVector:
    """Returns values as a float64 cost vector, checking length and finiteness."""
    J = np.array(values, dtype=np.float64).reshape(-1)
    if n is not None and J.shape[0] != n:
        raise ValueError(f"cost vector has {J.shape[0]} entries, expected {n}")
    if not np.all(np.isfinite(J)):
        raise ValueError("cost vector has non finite entries")
    return J


# #############################################
# VALIDATION
#
@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return len(self.violations) == 0

    def add(self, message: str):
        logger.debug(f"violation: {message}")
        self.violations.append(message)

    def raise_if_invalid(self):
        if not self.ok:
            raise InstanceValidationError(self.violations)


def validate(instance: MdpInstance) -> ValidationReport:
    """Checks every model invariant and reports each violation by (x, u) or field. Never raises."""
    report = ValidationReport()

    n = instance.n
    if not isinstance(n, (int, np.integer)) or isinstance(n, bool) or n < 1:
        report.add(f"n must be a positive integer, got {n!r}")
        return report

    alpha = instance.discount
    if not isinstance(alpha, (int, float)) or isinstance(alpha, bool) or not 0.0 < alpha < 1.0:
        report.add(f"discount must lie strictly between 0 and 1, got {alpha!r}")

    if len(instance.states) != n:
        report.add(f"{len(instance.states)} states declared, n is {n}")

    for position, s in enumerate(instance.states, start=1):
        x = s.id
        if x != position:
            report.add(f"state at position {position} has id {x}")
        if len(s.actions) == 0:
            report.add(f"empty action set at state {x}")
            continue
        labels = s.labels
        for label in sorted(set(labels)):
            if labels.count(label) > 1:
                report.add(f"duplicate action label {label!r} at state {x}")
        for a in s.actions:
            where = f"(x={x}, u={a.label})"
            if len(a.transitions) == 0:
                report.add(f"no transitions for {where}")
                continue
            total = 0.0
            seen = set()
            for y, p in a.transitions:
                if not 1 <= y <= n:
                    report.add(f"successor {y} of {where} not in 1..{n}")
                if y in seen:
                    report.add(f"successor {y} listed twice for {where}")
                seen.add(y)
                if not math.isfinite(p) or p < 0:
                    report.add(f"negative or non finite probability {p!r} to {y} for {where}")
                total += p
            if not abs(total - 1.0) <= PROBABILITY_TOLERANCE:
                report.add(f"probabilities of {where} sum to {total!r}, not 1")
            costed = set()
            for y, g in a.costs:
                if not 1 <= y <= n:
                    report.add(f"cost entry to {y} of {where} not in 1..{n}")
                if not math.isfinite(g):
                    report.add(f"non finite cost {g!r} to {y} for {where}")
                if y in costed:
                    report.add(f"cost entry to {y} listed twice for {where}")
                costed.add(y)
            for y in sorted(seen - costed):
                report.add(f"no cost entry for transition {where} to {y}")

    if report.ok:
        logger.debug(f"instance valid: {instance.describe()}")
    return report
