# Run-log files
#
# JSON Lines: one {"header": ...} line, one line per body record ({"step": ...} for
# on-line runs, {"iteration": ...} for classical PI), one {"footer": ...} line.
# Floats keep full round-trip precision so a replay can be compared bit for bit.
#
from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np

from onlinepi import __NAME__, __version__, MONOTONE_SLACK
from onlinepi.model.mdp import InstanceError, MdpInstance, StationaryPolicy, cost_vector
from onlinepi.model.serial import instance_digest
from onlinepi.algorithms.bellman import IterationResult, check_global_optimality, check_local_optimality, greedy_policy, value_iteration
from onlinepi.algorithms.classical import TERMINATION, PiTrace, run_classical_pi
from onlinepi.algorithms.online import ONLINE_MODE, Finding, OnlineConfig, OnlineRunLog, StepRecord, VerificationReport, run_online_pi, verify_run

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

HEADER = "header"
FOOTER = "footer"
STEP = "step"
ITERATION = "iteration"

ALGORITHMS = ["vi", "pi", "online", "rollout"]


class RunLogError(Exception):
    """Run-log file is malformed."""


class DigestMismatch(RunLogError):
    """Run log was produced on another instance."""


@dataclass
class RunLogFile:
    header: dict
    body: list[dict] = field(default_factory=list)
    footer: dict = field(default_factory=dict)

    @property
    def algorithm(self) -> str:
        return self.header.get("algorithm")

    def dumps(self) -> str:
        kind = ITERATION if self.algorithm in ("pi", "vi") else STEP
        lines = [json.dumps({HEADER: self.header}, ensure_ascii=False)]
        lines.extend(json.dumps({kind: record}, ensure_ascii=False) for record in self.body)
        lines.append(json.dumps({FOOTER: self.footer}, ensure_ascii=False))
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> RunLogFile:
        lines = [line for line in text.splitlines() if line.strip() != ""]
        if len(lines) < 2:
            raise RunLogError("run log needs at least a header and a footer line")
        documents = []
        for i, line in enumerate(lines, start=1):
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as e:
                raise RunLogError(f"line {i}: {e.msg}") from None
            if not isinstance(doc, dict) or len(doc) != 1:
                raise RunLogError(f"line {i}: expected an object with a single key")
            documents.append((i, doc))
        first, last = documents[0][1], documents[-1][1]
        if HEADER not in first:
            raise RunLogError("line 1: missing header")
        if FOOTER not in last:
            raise RunLogError(f"line {len(lines)}: missing footer")
        header = first[HEADER]
        for key in ("tool", "version", "instance_digest", "algorithm"):
            if key not in header:
                raise RunLogError(f"header has no {key!r}")
        if header["algorithm"] not in ALGORITHMS:
            raise RunLogError(f"unknown algorithm {header['algorithm']!r}")
        kind = ITERATION if header["algorithm"] in ("pi", "vi") else STEP
        body = []
        for i, doc in documents[1:-1]:
            if kind not in doc:
                raise RunLogError(f"line {i}: expected a {kind!r} record")
            body.append(doc[kind])
        return cls(header=header, body=body, footer=last[FOOTER])

    def write(self, path: str | os.PathLike):
        with open(path, "w", encoding="utf-8", newline="\n") as fp:
            fp.write(self.dumps())
        logger.info(f"run log written to {path}")

    @classmethod
    def read(cls, path: str | os.PathLike) -> RunLogFile:
        with open(path, encoding="utf-8") as fp:
            return cls.loads(fp.read())


def _header(instance: MdpInstance, algorithm: str, **kwargs) -> dict:
    return {"tool": __NAME__, "version": __version__, "instance_digest": instance_digest(instance), "algorithm": algorithm} | kwargs


# #############################################
# BUILDERS
#
def online_run_file(instance: MdpInstance, log: OnlineRunLog) -> RunLogFile:
    algorithm = "rollout" if log.config.mode == ONLINE_MODE.ROLLOUT else "online"
    header = _header(instance, algorithm, config=log.config.info(), seed=log.seed, x0=log.x0, initial_policy=log.initial_policy.info())
    J = log.final_cost
    footer = log.info() | {
        "converged": log.converged,
        "local_opt": check_local_optimality(instance, log.acting_policy, log.recurrent_estimate),
        "global_opt": check_global_optimality(instance, log.acting_policy),
        "final_cost": [float(v) for v in J],
    }
    return RunLogFile(header=header, body=[r.info() for r in log.records], footer=footer)


def classical_run_file(instance: MdpInstance, trace: PiTrace, max_iters: int) -> RunLogFile:
    initial = trace.iterates[0][0]
    header = _header(instance, "pi", initial_policy=initial.info(), max_iters=max_iters)
    body = trace.info()["iterates"]
    footer = {
        "termination": trace.termination.value,
        "converged": trace.converged,
        "final_policy": trace.final_policy.info(),
        "final_cost": [float(v) for v in trace.final_cost],
        "global_opt": check_global_optimality(instance, trace.final_policy, J=trace.final_cost),
    }
    return RunLogFile(header=header, body=body, footer=footer)


def vi_run_file(instance: MdpInstance, result: IterationResult, tol: float, max_iters: int) -> RunLogFile:
    header = _header(instance, "vi", tol=tol, max_iters=max_iters)
    policy = greedy_policy(instance, result.values)
    footer = {
        "termination": (TERMINATION.CONVERGED if result.converged else TERMINATION.MAX_ITERATIONS).value,
        "converged": result.converged,
        "iterations": result.iterations,
        "final_policy": policy.info(),
        "final_cost": [float(v) for v in result.values],
    }
    return RunLogFile(header=header, body=[], footer=footer)


# #############################################
# READERS
#
def check_digest(instance: MdpInstance, runlog: RunLogFile):
    digest = instance_digest(instance)
    if runlog.header.get("instance_digest") != digest:
        raise DigestMismatch(f"run log digest {runlog.header.get('instance_digest')} does not match instance digest {digest}")


def online_log_from_file(instance: MdpInstance, runlog: RunLogFile) -> OnlineRunLog:
    """Rebuilds the on-line run log recorded in a file."""
    check_digest(instance, runlog)
    if runlog.algorithm not in ("online", "rollout"):
        raise RunLogError(f"not an on-line run log ({runlog.algorithm})")
    try:
        h, f = runlog.header, runlog.footer
        config = OnlineConfig.new(**h["config"])
        log = OnlineRunLog(
            config=config,
            x0=int(h["x0"]),
            initial_policy=StationaryPolicy(tuple(h["initial_policy"])),
            initial_cost=cost_vector(f["initial_cost"], instance.n),
            records=[StepRecord.from_info(instance, r) for r in runlog.body],
            final_policy=StationaryPolicy(tuple(f["final_policy"])),
            visit_counts={int(x): int(c) for x, c in f["visit_counts"].items()},
            recurrent_estimate=[int(x) for x in f["recurrent_estimate"]],
            termination=TERMINATION(f["termination"]),
            last_change=f["last_change"],
            rollout_policy=None if f.get("rollout_policy") is None else StationaryPolicy(tuple(f["rollout_policy"])),
        )
    except (InstanceError, KeyError, TypeError, ValueError) as e:
        raise RunLogError(f"malformed on-line run log: {e}") from None
    return log


def replay(instance: MdpInstance, runlog: RunLogFile) -> RunLogFile:
    """Runs again what the header describes."""
    check_digest(instance, runlog)
    h = runlog.header
    try:
        if runlog.algorithm in ("online", "rollout"):
            log = run_online_pi(instance, int(h["x0"]), StationaryPolicy(tuple(h["initial_policy"])), OnlineConfig.new(**h["config"]))
            return online_run_file(instance, log)
        if runlog.algorithm == "pi":
            max_iters = int(h["max_iters"])
            trace = run_classical_pi(instance, StationaryPolicy(tuple(h["initial_policy"])), max_iters=max_iters)
            return classical_run_file(instance, trace, max_iters)
        tol, max_iters = float(h["tol"]), int(h["max_iters"])
        return vi_run_file(instance, value_iteration(instance, tol=tol, max_iters=max_iters), tol, max_iters)
    except (InstanceError, KeyError, TypeError, ValueError) as e:
        raise RunLogError(f"header cannot be replayed: {e}") from None


def verify_file(instance: MdpInstance, runlog: RunLogFile) -> VerificationReport:
    """Verification findings for any run log, plus a bit-exact replay check."""
    check_digest(instance, runlog)
    if runlog.algorithm in ("online", "rollout"):
        log = online_log_from_file(instance, runlog)
        try:
            report = verify_run(instance, log)
        except (InstanceError, IndexError, ValueError) as e:
            raise RunLogError(f"malformed on-line run log: {e}") from None
    else:
        report = VerificationReport()
        if runlog.algorithm == "pi":
            try:
                costs = [cost_vector(r["cost"], instance.n) for r in runlog.body]
            except (KeyError, TypeError, ValueError) as e:
                raise RunLogError(f"malformed iteration record: {e}") from None
            worse = [k for k, (a, b) in enumerate(zip(costs, costs[1:]), start=1) if np.any(b > a + MONOTONE_SLACK)]
            report.check("monotone", [Finding(name="monotone", passed=False, step=k, detail="cost increased") for k in worse], "iterates non-increasing")
        if runlog.footer.get("converged"):
            try:
                policy = StationaryPolicy(tuple(runlog.footer["final_policy"]))
                optimal = not policy.violations(instance) and check_global_optimality(instance, policy)
            except (InstanceError, KeyError, TypeError, ValueError) as e:
                raise RunLogError(f"malformed footer: {e}") from None
            report.findings.append(Finding(name="global-optimality", passed=optimal, detail=f"final policy {policy}"))
    again = replay(instance, runlog)
    same = again.body == runlog.body and (runlog.algorithm != "vi" or again.footer.get("final_cost") == runlog.footer.get("final_cost"))
    detail = "body reproduced bit-exactly from the header" if same else "replay differs from the recorded body"
    report.findings.append(Finding(name="replay", passed=same, detail=detail))
    return report
