# ###########################
# Cross-algorithm comparison sweeps.
#
# For each seed: plain, exploration and rollout on-line runs; classical PI once.
# Rows are sorted (classical first, then by mode and seed) so the table does not
# depend on the order in which parallel runs finish.
#
from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from tabulate import tabulate

from onlinepi import ORACLE_TOLERANCE, SIGNIFICANT_DIGITS
from onlinepi.model.mdp import CostVector, MdpInstance, StationaryPolicy
from onlinepi.algorithms.bellman import check_global_optimality, check_local_optimality, evaluate_policy_exact, value_iteration
from onlinepi.algorithms.classical import run_classical_pi
from onlinepi.algorithms.online import ONLINE_MODE, OnlineConfig, OnlineRunLog, run_online_pi
from .oracle import EnumerationTooLarge, OracleReport, enumerate_optimal

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

CSV_HEADER = ["seed", "mode", "steps", "policy_changes", "max_J_gap_vs_oracle", "local_opt", "global_opt"]
CLASSICAL = "classical"
MODE_ORDER = [CLASSICAL] + [m.value for m in ONLINE_MODE]


def _number(v: float) -> str:
    return f"{v:.{SIGNIFICANT_DIGITS}g}"


@dataclass(frozen=True)
class ComparisonRow:
    seed: int | None
    mode: str
    steps: int
    policy_changes: int
    stabilized_at: int
    converged: bool
    max_gap: float
    local_opt: bool
    global_opt: bool
    final_policy: StationaryPolicy
    final_cost: tuple[float, ...]
    recurrent_estimate: tuple[int, ...] = ()

    def sort_key(self) -> tuple:
        return (MODE_ORDER.index(self.mode), -1 if self.seed is None else self.seed)

    def csv_row(self) -> list[str]:
        return [
            "" if self.seed is None else str(self.seed),
            self.mode,
            str(self.steps),
            str(self.policy_changes),
            _number(self.max_gap),
            "true" if self.local_opt else "false",
            "true" if self.global_opt else "false",
        ]

    def info(self) -> dict:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "steps": self.steps,
            "policy_changes": self.policy_changes,
            "stabilized_at": self.stabilized_at,
            "converged": self.converged,
            "max_J_gap_vs_oracle": self.max_gap,
            "local_opt": self.local_opt,
            "global_opt": self.global_opt,
            "final_policy": self.final_policy.info(),
            "final_cost": list(self.final_cost),
            "recurrent_estimate": list(self.recurrent_estimate),
        }


@dataclass
class ComparisonTable:
    reference: CostVector  # J* used for the gap column
    reference_source: str  # "oracle" or "value-iteration"
    rows: list[ComparisonRow] = field(default_factory=list)
    oracle: OracleReport | None = None

    def rows_for(self, mode: str) -> list[ComparisonRow]:
        return [r for r in self.rows if r.mode == mode]

    def to_csv(self) -> str:
        output = io.StringIO()
        writer = csv.writer(output, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for r in self.rows:
            writer.writerow(r.csv_row())
        return output.getvalue()

    def write_csv(self, path):
        with open(path, "w", encoding="utf-8", newline="") as fp:
            fp.write(self.to_csv())
        logger.info(f"comparison table written to {path}")

    def info(self) -> dict:
        return {
            "reference": [float(v) for v in self.reference],
            "reference_source": self.reference_source,
            "oracle": None if self.oracle is None else self.oracle.info(),
            "rows": [r.info() for r in self.rows],
        }

    def print(self, level=logging.INFO):
        output = io.StringIO()
        print("\n", file=output)
        table = [
            ("" if r.seed is None else r.seed, r.mode, r.steps, r.policy_changes, r.stabilized_at, r.converged, _number(r.max_gap), r.local_opt, r.global_opt)
            for r in self.rows
        ]
        print(tabulate(table, headers=["SEED", "MODE", "STEPS", "CHANGES", "STABLE AT", "CONVERGED", "GAP", "LOCAL", "GLOBAL"]), file=output)
        print(f"reference J* from {self.reference_source}", file=output)
        contents = output.getvalue()
        output.close()
        logger.log(level, f"{contents}")


def reference_cost(instance: MdpInstance, tol: float = ORACLE_TOLERANCE) -> tuple[CostVector, str, OracleReport | None]:
    """J* from enumeration when the instance is small enough, from value iteration otherwise."""
    try:
        oracle = enumerate_optimal(instance, tol=tol)
        return oracle.optimal_cost, "oracle", oracle
    except EnumerationTooLarge:
        logger.info("instance too large for enumeration, using value iteration as reference")
        result = value_iteration(instance, tol=1e-10)
        return result.values, "value-iteration", None


def _online_row(instance: MdpInstance, log: OnlineRunLog, reference: CostVector) -> ComparisonRow:
    policy = log.acting_policy
    J = evaluate_policy_exact(instance, policy)
    return ComparisonRow(
        seed=log.seed,
        mode=log.config.mode.value,
        steps=log.steps,
        policy_changes=log.policy_changes,
        stabilized_at=log.stabilized_at,
        converged=log.converged,
        max_gap=float(np.max(np.abs(J - reference))),
        local_opt=check_local_optimality(instance, policy, log.recurrent_estimate, J=J),
        global_opt=check_global_optimality(instance, policy, J=J),
        final_policy=policy,
        final_cost=tuple(float(v) for v in J),
        recurrent_estimate=tuple(log.recurrent_estimate),
    )


def run_comparison(
    instance: MdpInstance,
    x0: int,
    mu0: StationaryPolicy,
    seeds: list[int],
    template: OnlineConfig | None = None,
    workers: int = 1,
    tol: float = ORACLE_TOLERANCE,
) -> ComparisonTable:
    """Runs every on-line mode for each seed and classical PI once, against a reference J*."""
    template = template if template is not None else OnlineConfig()
    reference, source, oracle = reference_cost(instance, tol=tol)
    table = ComparisonTable(reference=reference, reference_source=source, oracle=oracle)

    trace = run_classical_pi(instance, mu0)
    J = trace.final_cost
    table.rows.append(
        ComparisonRow(
            seed=None,
            mode=CLASSICAL,
            steps=len(trace.iterates),
            policy_changes=len(trace.iterates) - 1,
            stabilized_at=len(trace.iterates) - 1,
            converged=trace.converged,
            max_gap=float(np.max(np.abs(J - reference))),
            local_opt=check_local_optimality(instance, trace.final_policy, range(1, instance.n + 1), J=J),
            global_opt=check_global_optimality(instance, trace.final_policy, J=J),
            final_policy=trace.final_policy,
            final_cost=tuple(float(v) for v in J),
            recurrent_estimate=tuple(range(1, instance.n + 1)),
        )
    )

    def one(task: tuple[int, ONLINE_MODE]) -> ComparisonRow:
        seed, mode = task
        log = run_online_pi(instance, x0, mu0, template.replace(mode=mode, seed=seed))
        return _online_row(instance, log, reference)

    tasks = [(seed, mode) for seed in seeds for mode in ONLINE_MODE]
    logger.debug(f"running {len(tasks)} on-line runs on {workers} worker(s)..")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            table.rows.extend(executor.map(one, tasks))
    else:
        table.rows.extend(one(t) for t in tasks)
    table.rows.sort(key=ComparisonRow.sort_key)
    logger.debug("..done")
    return table
