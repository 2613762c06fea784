# On-line policy iteration.
#
# Generates state-policy pairs (x_k, μ^k) along a single trajectory. At each step
# the policy may only be improved at the current state x_k (plain mode), at x_k
# and one extra uniformly drawn state (exploration mode), or not at all while
# following the one-step lookahead control of the base policy (rollout mode).
#
# Random draws per step, in order: the exploration state (exploration mode only,
# redrawn until it differs from x_k), then the next state. Both come from one
# numpy PCG64 generator seeded with config.seed.
#
from __future__ import annotations

import dataclasses
import io
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from tabulate import tabulate

from onlinepi import EPSILON_IMPROVE, MONOTONE_SLACK, OPTIMALITY_TOLERANCE, SIGNIFICANT_DIGITS, SPAM_LEVEL, STABLE_WINDOW_FACTOR
from onlinepi.model.mdp import CostVector, InvalidPolicy, MdpInstance, StationaryPolicy, cost_vector
from .bellman import (
    QFactorRow,
    _check_state,
    _vector,
    check_global_optimality,
    check_invariant_set,
    check_local_optimality,
    evaluate_policy_exact,
    greedy_policy,
    q_factor_row,
    q_values,
)
from .classical import TERMINATION

logger = logging.getLogger(__name__)
# logger.setLevel(SPAM_LEVEL)  # to see every step
# logger.setLevel(logging.DEBUG)

MAX_SEED = 2**64 - 1


class ONLINE_MODE(Enum):
    PLAIN = "plain"
    EXPLORATION = "exploration"
    ROLLOUT = "rollout"


class IMPROVEMENT_RULE(Enum):
    # How u_k is picked among controls that strictly improve on J(x_k)
    #
    ARGMIN = "argmin"
    FIRST_IMPROVING = "first_improving"


class InvalidConfig(ValueError):
    """On-line run configuration is not acceptable."""


class InvalidStart(ValueError):
    """Initial state or initial policy does not fit the instance."""


# #############################################
# CONFIGURATION
#
@dataclass(frozen=True)
class OnlineConfig:
    """Parameters of an on-line run. Together with instance, x0 and mu0 they determine the run."""

    mode: ONLINE_MODE = ONLINE_MODE.PLAIN
    improvement_rule: IMPROVEMENT_RULE = IMPROVEMENT_RULE.ARGMIN
    epsilon_improve: float = EPSILON_IMPROVE
    max_steps: int = 1000
    stable_window: int | None = None  # None: STABLE_WINDOW_FACTOR × n
    seed: int = 0

    PARAMETERS = {
        "mode": {"type": "string", "prompt": "plain, exploration or rollout"},
        "improvement_rule": {"type": "string", "prompt": "argmin or first_improving"},
        "epsilon_improve": {"type": "float", "prompt": "Strictness margin for improvement"},
        "max_steps": {"type": "integer", "prompt": "Maximum number of steps"},
        "stable_window": {"type": "integer", "prompt": "Unchanged steps before convergence (default 10 n)"},
        "seed": {"type": "integer", "prompt": "Random seed (unsigned 64 bits)"},
    }

    def __post_init__(self):
        try:
            object.__setattr__(self, "mode", ONLINE_MODE(self.mode))
            object.__setattr__(self, "improvement_rule", IMPROVEMENT_RULE(self.improvement_rule))
        except ValueError as e:
            raise InvalidConfig(str(e)) from None
        if not self.epsilon_improve >= 0:
            raise InvalidConfig(f"epsilon_improve must be nonnegative, got {self.epsilon_improve}")
        if isinstance(self.max_steps, bool) or not isinstance(self.max_steps, int) or self.max_steps < 0:
            raise InvalidConfig(f"max_steps must be a nonnegative integer, got {self.max_steps!r}")
        if self.stable_window is not None and (isinstance(self.stable_window, bool) or not isinstance(self.stable_window, int) or self.stable_window < 1):
            raise InvalidConfig(f"stable_window must be a positive integer, got {self.stable_window!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed <= MAX_SEED:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")

    @classmethod
    def new(cls, **kwargs) -> OnlineConfig:
        """Builds a config from plain values (strings for enums), ignoring None and unknown keys."""
        values = {}
        for k, v in kwargs.items():
            if v is None:
                continue
            if k not in cls.PARAMETERS:
                logger.warning(f"ignoring unknown parameter {k}")
                continue
            values[k] = v
        if "epsilon_improve" in values:
            values["epsilon_improve"] = float(values["epsilon_improve"])
        return cls(**values)

    def replace(self, **changes) -> OnlineConfig:
        return dataclasses.replace(self, **changes)

    def window(self, n: int) -> int:
        return self.stable_window if self.stable_window is not None else STABLE_WINDOW_FACTOR * n

    def info(self) -> dict:
        return {
            "mode": self.mode.value,
            "improvement_rule": self.improvement_rule.value,
            "epsilon_improve": self.epsilon_improve,
            "max_steps": self.max_steps,
            "stable_window": self.stable_window,
            "seed": self.seed,
        }

    def describe(self) -> str:
        return f"{self.mode.value} mode, {self.improvement_rule.value} rule, ε={self.epsilon_improve}, seed {self.seed}"


# #############################################
# RUN LOG
#
@dataclass(frozen=True)
class StepRecord:
    """What happened at step k."""

    k: int
    state: int  # x_k
    q: QFactorRow  # Q_{μ^k}(x_k, ·)
    action: str  # μ^{k+1}(x_k), or the rollout control
    changed: bool
    next_state: int  # x_{k+1}
    explore_state: int | None = None  # x̄_k
    explore_action: str | None = None  # μ^{k+1}(x̄_k)
    explore_changed: bool = False
    cost: CostVector | None = None  # J_{μ^{k+1}}, only when the policy changed

    @property
    def policy_changed(self) -> bool:
        return self.changed or self.explore_changed

    def edited_states(self) -> list[int]:
        states = [self.state] if self.changed else []
        if self.explore_changed:
            states.append(self.explore_state)
        return states

    def info(self) -> dict:
        return {
            "k": self.k,
            "x": self.state,
            "q": list(self.q.values),
            "u": self.action,
            "changed": self.changed,
            "next": self.next_state,
            "explore": self.explore_state,
            "explore_u": self.explore_action,
            "explore_changed": self.explore_changed,
            "cost": None if self.cost is None else [float(v) for v in self.cost],
        }

    @classmethod
    def from_info(cls, instance: MdpInstance, data: dict) -> StepRecord:
        x = int(data["x"])
        return cls(
            k=int(data["k"]),
            state=x,
            q=QFactorRow(state=x, labels=instance.actions(x), values=tuple(float(v) for v in data["q"])),
            action=data["u"],
            changed=bool(data["changed"]),
            next_state=int(data["next"]),
            explore_state=None if data.get("explore") is None else int(data["explore"]),
            explore_action=data.get("explore_u"),
            explore_changed=bool(data.get("explore_changed", False)),
            cost=None if data.get("cost") is None else cost_vector(data["cost"], instance.n),
        )


@dataclass
class OnlineRunLog:
    config: OnlineConfig
    x0: int
    initial_policy: StationaryPolicy
    initial_cost: CostVector
    records: list[StepRecord] = field(default_factory=list)
    final_policy: StationaryPolicy | None = None
    visit_counts: dict[int, int] = field(default_factory=dict)
    recurrent_estimate: list[int] = field(default_factory=list)  # X̂
    termination: TERMINATION = TERMINATION.MAX_STEPS
    last_change: int | None = None
    rollout_policy: StationaryPolicy | None = None

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def steps(self) -> int:
        return len(self.records)

    @property
    def converged(self) -> bool:
        return self.termination == TERMINATION.CONVERGED

    @property
    def policy_changes(self) -> int:
        return sum(1 for r in self.records if r.policy_changed)

    @property
    def stabilized_at(self) -> int:
        """First step from which the policy never changed again."""
        return 0 if self.last_change is None else self.last_change + 1

    @property
    def final_cost(self) -> CostVector:
        for r in reversed(self.records):
            if r.cost is not None:
                return r.cost
        return self.initial_cost

    @property
    def acting_policy(self) -> StationaryPolicy:
        """Policy whose controls were followed at the end of the run."""
        return self.rollout_policy if self.rollout_policy is not None else self.final_policy

    def trajectory(self) -> list[int]:
        return [r.state for r in self.records]

    def snapshots(self) -> list[tuple[int, CostVector]]:
        """(k, J_{μ^{k+1}}) on every change, preceded by (-1, J_{μ^0})."""
        return [(-1, self.initial_cost)] + [(r.k, r.cost) for r in self.records if r.cost is not None]

    def info(self) -> dict:
        return {
            "x0": self.x0,
            "config": self.config.info(),
            "initial_policy": self.initial_policy.info(),
            "initial_cost": [float(v) for v in self.initial_cost],
            "final_policy": self.final_policy.info(),
            "final_cost": [float(v) for v in self.final_cost],
            "rollout_policy": None if self.rollout_policy is None else self.rollout_policy.info(),
            "visit_counts": {str(x): c for x, c in sorted(self.visit_counts.items())},
            "recurrent_estimate": list(self.recurrent_estimate),
            "termination": self.termination.value,
            "last_change": self.last_change,
            "policy_changes": self.policy_changes,
        }

    def print(self, level=logging.INFO, last: int | None = 20):
        width = 70
        output = io.StringIO()
        print("\n", file=output)
        print("=" * width, file=output)
        print(f"on-line run: {self.config.describe()}, x0={self.x0}", file=output)
        records = self.records if last is None else self.records[-last:]
        table = []
        for r in records:
            q = " ".join(f"{u}:{v:.{SIGNIFICANT_DIGITS}g}" for u, v in zip(r.q.labels, r.q.values))
            explore = "" if r.explore_state is None else f"{r.explore_state}→{r.explore_action}{'*' if r.explore_changed else ''}"
            table.append((r.k, r.state, q, r.action + ("*" if r.changed else ""), explore, r.next_state))
        print(tabulate(table, headers=["K", "X", "Q", "U", "EXPLORE", "NEXT"]), file=output)
        print("-" * width, file=output)
        print(f"steps: {self.steps}, policy changes: {self.policy_changes}, termination: {self.termination.value}", file=output)
        print(f"final policy: {self.final_policy}", file=output)
        print(f"recurrent set estimate: {{{', '.join(str(x) for x in self.recurrent_estimate)}}}", file=output)
        print("=" * width, file=output)
        contents = output.getvalue()
        output.close()
        logger.log(level, f"{contents}")


# #############################################
# ALGORITHM
#
def improvement_step(instance: MdpInstance, policy: StationaryPolicy, J, x: int, config: OnlineConfig | None = None) -> tuple[str, bool]:
    """Picks μ^{k+1}(x) from the Q-factors of the current policy.

    J must be J_μ. If some control beats J(x) by more than epsilon_improve, returns such a
    control (the minimizer, or the first in declaration order under first_improving) and
    whether it differs from μ(x). Otherwise returns (μ(x), False).
    """
    config = config if config is not None else OnlineConfig()
    _check_state(instance, x)
    J = _vector(instance, J)
    q = q_values(instance, x, J)
    improving = np.flatnonzero(q < J[x - 1] - config.epsilon_improve)
    if improving.size == 0:
        return policy(x), False
    if config.improvement_rule == IMPROVEMENT_RULE.ARGMIN:
        i = int(np.argmin(q))
    else:
        i = int(improving[0])
    label = instance.actions(x)[i]
    return label, label != policy(x)


def sample_next_state(instance: MdpInstance, x: int, label: str, rng: np.random.Generator) -> int:
    """Draws y with probability p_xy(u) by inverting the cumulative distribution of the listed successors."""
    transitions = instance.action(x, label).transitions
    cdf = np.cumsum([p for _, p in transitions])
    i = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return transitions[min(i, len(transitions) - 1)][0]


def run_online_pi(instance: MdpInstance, x0: int, mu0: StationaryPolicy, config: OnlineConfig | None = None) -> OnlineRunLog:
    """On-line policy iteration from (x0, mu0).

    Stops at config.max_steps, or once the policy has been left unchanged for the stable
    window, the states visited since the last change are closed under the acting policy,
    and (exploration mode) every state has been an improvement site since that change.
    """
    config = config if config is not None else OnlineConfig()
    if isinstance(x0, bool) or not isinstance(x0, (int, np.integer)) or not 1 <= x0 <= instance.n:
        raise InvalidStart(f"initial state {x0!r} not in 1..{instance.n}")
    try:
        mu0.check(instance)
    except InvalidPolicy as e:
        raise InvalidStart(f"initial policy: {e}") from None

    n = instance.n
    mode = config.mode
    window = config.window(n)
    rng = np.random.default_rng(config.seed)
    logger.debug(f"starting on-line run: {config.describe()}, x0={x0}, window={window}..")

    policy = mu0
    J = evaluate_policy_exact(instance, policy)
    log = OnlineRunLog(config=config, x0=int(x0), initial_policy=mu0, initial_cost=J)
    if mode == ONLINE_MODE.ROLLOUT:
        log.rollout_policy = greedy_policy(instance, J)

    everything = set(range(1, n + 1))
    visited = set()  # X̂: improvement sites along the trajectory since the last change
    checked = set()  # every improvement site since the last change
    x = int(x0)
    for k in range(config.max_steps):
        row = q_factor_row(instance, x, J)
        explore_state = explore_action = None
        explore_changed = False
        if mode == ONLINE_MODE.ROLLOUT:
            action, changed = row.argmin(), False
            new_policy = policy
        else:
            action, changed = improvement_step(instance, policy, J, x, config)
            new_policy = policy.with_choice(x, action) if changed else policy
            if mode == ONLINE_MODE.EXPLORATION and n > 1:
                explore_state = x
                while explore_state == x:
                    explore_state = int(rng.integers(1, n + 1))
                explore_action, explore_changed = improvement_step(instance, policy, J, explore_state, config)
                if explore_changed:
                    new_policy = new_policy.with_choice(explore_state, explore_action)

        cost = None
        log.visit_counts[x] = log.visit_counts.get(x, 0) + 1
        if changed or explore_changed:
            policy = new_policy
            J = evaluate_policy_exact(instance, policy)
            cost = J
            log.last_change = k
            visited = set()
            checked = set()
            logger.debug(f"step {k}: policy changed at {[s for s, c in ((x, changed), (explore_state, explore_changed)) if c]}, now {policy}")
        else:
            visited.add(x)
            checked.add(x)
            if explore_state is not None:
                checked.add(explore_state)

        next_state = sample_next_state(instance, x, action, rng)
        log.records.append(
            StepRecord(
                k=k,
                state=x,
                q=row,
                action=action,
                changed=changed,
                next_state=next_state,
                explore_state=explore_state,
                explore_action=explore_action,
                explore_changed=explore_changed,
                cost=cost,
            )
        )
        logger.log(SPAM_LEVEL, f"step {k}: x={x} u={action} changed={changed} explore={explore_state} next={next_state}")
        x = next_state

        unchanged = k - (log.last_change if log.last_change is not None else -1)
        if cost is None and unchanged >= window:
            acting = log.rollout_policy if mode == ONLINE_MODE.ROLLOUT else policy
            if check_invariant_set(instance, acting, visited) and (mode != ONLINE_MODE.EXPLORATION or checked == everything or n == 1):
                log.termination = TERMINATION.CONVERGED
                break

    log.final_policy = policy
    log.recurrent_estimate = sorted(visited)
    logger.info(f"on-line run {log.termination.value} after {log.steps} steps, {log.policy_changes} policy change(s)")
    return log


# #############################################
# VERIFICATION
#
@dataclass
class Finding:
    name: str
    passed: bool
    detail: str = ""
    step: int | None = None

    def __str__(self) -> str:
        where = "" if self.step is None else f" at step {self.step}"
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}{where}: {self.detail}"


@dataclass
class VerificationReport:
    findings: list[Finding] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(f.passed for f in self.findings)

    def failures(self) -> list[Finding]:
        return [f for f in self.findings if not f.passed]

    def finding(self, name: str) -> Finding | None:
        for f in self.findings:
            if f.name == name:
                return f
        return None

    def check(self, name: str, failures: list[Finding], success: str):
        """Adds the failures of one check, or a single passing finding."""
        if failures:
            self.findings.extend(failures)
        else:
            self.findings.append(Finding(name=name, passed=True, detail=success))

    def describe(self) -> str:
        return "\n".join(str(f) for f in self.findings)

    def print(self, level=logging.INFO):
        output = io.StringIO()
        print("\n", file=output)
        table = [("PASS" if f.passed else "FAIL", f.name, "" if f.step is None else f.step, f.detail) for f in self.findings]
        print(tabulate(table, headers=["RESULT", "CHECK", "STEP", "DETAIL"]), file=output)
        contents = output.getvalue()
        output.close()
        logger.log(level, f"{contents}")


def _close(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.max(np.abs(a - b)) <= 1e-8 * (1.0 + float(np.max(np.abs(b)))))


def verify_run(instance: MdpInstance, log: OnlineRunLog) -> VerificationReport:
    """Replays the policy sequence recorded in the log and checks the on-line PI guarantees.

    Findings: cost improvement (monotone snapshots, strict decrease at edited states),
    snapshot consistency with exact evaluation, trajectory consistency, edit bound, and for
    converged runs local optimality and invariance over X̂ (plain) or global optimality
    (exploration). Violations are reported, never raised.
    """
    report = VerificationReport()
    mode = log.config.mode
    eps = log.config.epsilon_improve
    edit_bound = {ONLINE_MODE.PLAIN: 1, ONLINE_MODE.EXPLORATION: 2, ONLINE_MODE.ROLLOUT: 0}[mode]

    if not 1 <= log.x0 <= instance.n or log.initial_policy.violations(instance):
        report.findings.append(Finding(name="start", passed=False, detail="initial state or policy does not fit the instance"))
        return report
    start = evaluate_policy_exact(instance, log.initial_policy)
    report.findings.append(
        Finding(name="start", passed=_close(log.initial_cost, start), detail="initial cost vector matches exact evaluation of the initial policy")
    )

    monotone, strict, snapshot, trajectory, edits = [], [], [], [], []
    lookahead = greedy_policy(instance, start) if mode == ONLINE_MODE.ROLLOUT else None
    policy = log.initial_policy
    previous = log.initial_cost
    expected_state = log.x0
    for r in log.records:
        if r.state != expected_state:
            trajectory.append(Finding(name="trajectory", passed=False, step=r.k, detail=f"state {r.state} recorded, {expected_state} expected"))
        new_policy = policy
        if r.changed:
            new_policy = new_policy.with_choice(r.state, r.action)
        if r.explore_changed and r.explore_state is not None:
            new_policy = new_policy.with_choice(r.explore_state, r.explore_action)
        if new_policy.violations(instance):
            edits.append(Finding(name="edits", passed=False, step=r.k, detail="recorded controls are not in the action sets"))
            break
        differences = policy.differences(new_policy)
        if len(differences) > edit_bound:
            edits.append(Finding(name="edits", passed=False, step=r.k, detail=f"{len(differences)} states edited in {mode.value} mode"))
        if r.explore_state is not None and r.explore_state == r.state:
            edits.append(Finding(name="edits", passed=False, step=r.k, detail="exploration state equals the current state"))

        if differences:
            if r.cost is None:
                snapshot.append(Finding(name="snapshot", passed=False, step=r.k, detail="policy changed without a cost snapshot"))
            else:
                if not _close(r.cost, evaluate_policy_exact(instance, new_policy)):
                    snapshot.append(Finding(name="snapshot", passed=False, step=r.k, detail="snapshot differs from exact evaluation of the policy"))
                worse = np.flatnonzero(r.cost > previous + MONOTONE_SLACK) + 1
                if worse.size > 0:
                    monotone.append(Finding(name="monotone", passed=False, step=r.k, detail=f"cost increased at state(s) {[int(s) for s in worse]}"))
                for s in r.edited_states():
                    if not r.cost[s - 1] < previous[s - 1] - eps / 2:
                        strict.append(
                            Finding(
                                name="strict-decrease",
                                passed=False,
                                step=r.k,
                                detail=f"J({s}) went from {previous[s - 1]:.{SIGNIFICANT_DIGITS}g} to {r.cost[s - 1]:.{SIGNIFICANT_DIGITS}g}",
                            )
                        )
                previous = r.cost
        elif r.cost is not None:
            snapshot.append(Finding(name="snapshot", passed=False, step=r.k, detail="cost snapshot recorded on a step without policy change"))

        acting = lookahead(r.state) if mode == ONLINE_MODE.ROLLOUT else new_policy(r.state)
        if acting != r.action:
            trajectory.append(Finding(name="trajectory", passed=False, step=r.k, detail=f"recorded control {r.action}, expected {acting}"))
        if not 1 <= r.next_state <= instance.n or not instance.action(r.state, acting).probability(r.next_state) > 0:
            trajectory.append(Finding(name="trajectory", passed=False, step=r.k, detail=f"{r.next_state} is not a successor of {r.state} under {acting}"))
        expected_state = r.next_state
        policy = new_policy

    pairs = len(log.snapshots()) - 1
    report.check("monotone", monotone, f"{pairs} consecutive snapshot pair(s) componentwise non-increasing")
    report.check("strict-decrease", strict, "every edited state strictly improved")
    report.check("snapshot", snapshot, "every snapshot matches exact evaluation")
    report.check("trajectory", trajectory, f"{log.steps} transition(s) consistent with the recorded controls")
    report.check("edits", edits, f"at most {edit_bound} state(s) edited per step")

    if log.final_policy != policy:
        report.findings.append(Finding(name="final-policy", passed=False, detail=f"log ends with {log.final_policy}, records lead to {policy}"))
    else:
        report.findings.append(Finding(name="final-policy", passed=True, detail=f"{policy}"))

    if mode == ONLINE_MODE.ROLLOUT:
        unchanged = log.final_policy == log.initial_policy
        report.findings.append(Finding(name="rollout-unchanged", passed=unchanged, detail="base policy identical at start and end"))
    elif log.converged:
        X = log.recurrent_estimate
        J = evaluate_policy_exact(instance, policy)
        if mode == ONLINE_MODE.PLAIN:
            local = check_local_optimality(instance, policy, X, tol=OPTIMALITY_TOLERANCE, J=J)
            report.findings.append(Finding(name="local-optimality", passed=local, detail=f"over X̂={{{', '.join(str(x) for x in X)}}}"))
            invariant = check_invariant_set(instance, policy, X)
            report.findings.append(Finding(name="invariance", passed=invariant, detail=f"X̂={{{', '.join(str(x) for x in X)}}} under the final policy"))
        else:
            optimal = check_global_optimality(instance, policy, tol=OPTIMALITY_TOLERANCE, J=J)
            report.findings.append(Finding(name="global-optimality", passed=optimal, detail=f"final policy {policy}"))

    logger.debug(f"verification: {len(report.failures())} failure(s) in {len(report.findings)} finding(s)")
    return report
