# Command-line entry point.
#
# Exit status: 0 success, 1 failed verification findings, 2 parse/validation/usage
# or malformed file, 3 no convergence within the limits.
#
import json
import logging
import sys

import click

from onlinepi import __NAME__, __version__, ORACLE_TOLERANCE, SIGNIFICANT_DIGITS
from onlinepi.model import (
    BUILTIN_INSTANCES,
    GeneratorError,
    InstanceError,
    MdpInstance,
    generate_random,
    named_policy,
    read_instance,
    save_instance,
    write_instance,
)
from onlinepi.algorithms import (
    IMPROVEMENT_RULE,
    ONLINE_MODE,
    InvalidConfig,
    InvalidStart,
    OnlineConfig,
    check_global_optimality,
    check_local_optimality,
    greedy_policy,
    run_classical_pi,
    run_online_pi,
    value_iteration,
)
from onlinepi.harness import (
    EnumerationTooLarge,
    RunLogError,
    RunLogFile,
    classical_run_file,
    enumerate_optimal,
    online_run_file,
    run_comparison,
    verify_file,
    vi_run_file,
)

logger = logging.getLogger(__name__)
# logger.setLevel(logging.DEBUG)

LOG_LEVELS = [logging.WARNING, logging.INFO, logging.DEBUG]


class InputError(click.ClickException):
    """Unreadable, unparsable or invalid input."""

    exit_code = 2


class NotConverged(click.ClickException):
    exit_code = 3


def _numbers(J) -> str:
    return "(" + ", ".join(f"{v:.{SIGNIFICANT_DIGITS}g}" for v in J) + ")"


def _states(X) -> str:
    return "{" + ",".join(str(x) for x in X) + "}"


def _instance(name: str) -> MdpInstance:
    if name in BUILTIN_INSTANCES:
        return BUILTIN_INSTANCES[name]()
    try:
        return read_instance(name)
    except (InstanceError, OSError) as e:
        raise InputError(f"{name}: {e}") from None


def _policy(instance: MdpInstance, name: str):
    try:
        return named_policy(instance, name)
    except InstanceError as e:
        raise InputError(f"initial policy {name!r}: {e}") from None


def _config(**kwargs) -> OnlineConfig:
    try:
        return OnlineConfig.new(**kwargs)
    except InvalidConfig as e:
        raise InputError(str(e)) from None


@click.group()
@click.option("-v", "--verbose", count=True, help="More log output (repeat for debug)")
@click.version_option(__version__, prog_name=__NAME__)
def main(verbose: int):
    """On-line policy iteration for finite-state discounted dynamic programming."""
    logging.basicConfig(level=LOG_LEVELS[min(verbose, len(LOG_LEVELS) - 1)], format="%(levelname)s %(name)s: %(message)s")


@main.command()
@click.option("--instance", "instance_name", required=True, help="Instance file, or 'counterexample'")
@click.option("--algorithm", type=click.Choice(["vi", "pi", "online", "rollout"]), required=True)
@click.option("--mode", type=click.Choice([ONLINE_MODE.PLAIN.value, ONLINE_MODE.EXPLORATION.value]), default=None, help="On-line mode (default plain)")
@click.option("--x0", type=int, default=1, show_default=True, help="Initial state of on-line runs")
@click.option("--initial", default="first", show_default=True, help="mubar, mustar, first or comma-separated labels")
@click.option("--seed", type=int, default=None, help="Random seed, required for online and rollout")
@click.option("--max-steps", type=int, default=1000, show_default=True)
@click.option("--stable-window", type=int, default=None, help="Unchanged steps before convergence (default 10 n)")
@click.option("--epsilon", type=float, default=None, help="Strictness margin for on-line improvement")
@click.option("--rule", type=click.Choice([r.value for r in IMPROVEMENT_RULE]), default=None)
@click.option("--tol", type=float, default=1e-9, show_default=True, help="Value iteration tolerance")
@click.option("--max-iters", type=int, default=None, help="Iteration limit of vi and pi")
@click.option("--output", type=click.Path(dir_okay=False, writable=True), default=None, help="Run-log file")
def solve(instance_name, algorithm, mode, x0, initial, seed, max_steps, stable_window, epsilon, rule, tol, max_iters, output):
    """Runs one algorithm and prints the final cost vector and policy."""
    if algorithm in ("online", "rollout") and seed is None:
        raise click.UsageError(f"--seed is required for --algorithm {algorithm}")
    instance = _instance(instance_name)
    logger.info(f"solving {instance.describe()} with {algorithm}")

    if algorithm == "vi":
        max_iters = max_iters if max_iters is not None else 100_000
        result = value_iteration(instance, tol=tol, max_iters=max_iters)
        runlog = vi_run_file(instance, result, tol, max_iters)
        J, policy, converged = result.values, greedy_policy(instance, result.values), result.converged
        click.echo(f"J = {_numbers(J)}")
        click.echo(f"policy = {policy}")
        click.echo(f"{result.iterations} iteration(s)")
    elif algorithm == "pi":
        max_iters = max_iters if max_iters is not None else 1000
        trace = run_classical_pi(instance, _policy(instance, initial), max_iters=max_iters)
        trace.print()
        runlog = classical_run_file(instance, trace, max_iters)
        converged = trace.converged
        click.echo(f"J = {_numbers(trace.final_cost)}")
        click.echo(f"policy = {trace.final_policy}")
        click.echo(f"{len(trace.iterates)} evaluation(s)")
    else:
        mode = ONLINE_MODE.ROLLOUT.value if algorithm == "rollout" else mode
        config = _config(mode=mode, improvement_rule=rule, epsilon_improve=epsilon, max_steps=max_steps, stable_window=stable_window, seed=seed)
        try:
            log = run_online_pi(instance, x0, _policy(instance, initial), config)
        except InvalidStart as e:
            raise InputError(str(e)) from None
        log.print()
        runlog = online_run_file(instance, log)
        converged = log.converged
        X = log.recurrent_estimate
        click.echo(f"J = {_numbers(log.final_cost)}")
        click.echo(f"policy = {log.final_policy}")
        if log.rollout_policy is not None:
            click.echo(f"rollout policy = {log.rollout_policy}")
        changes = "policy unchanged" if log.policy_changes == 0 else f"policy changed at {log.policy_changes} step(s)"
        if check_local_optimality(instance, log.acting_policy, X):
            click.echo(f"{changes}; locally optimal over {_states(X)}")
        else:
            click.echo(f"{changes}; not locally optimal over {_states(X)}")
        click.echo(f"globally optimal: {'yes' if check_global_optimality(instance, log.acting_policy) else 'no'}")
        click.echo(f"{log.steps} step(s), {log.termination.value}")

    if output is not None:
        runlog.write(output)
    if not converged:
        raise NotConverged(f"{algorithm} did not converge within the limits")


@main.command()
@click.option("--instance", "instance_name", required=True, help="Instance file, or 'counterexample'")
@click.option("--log", "log_path", required=True, type=click.Path(dir_okay=False), help="Run-log file")
def verify(instance_name, log_path):
    """Checks a run log against the instance and replays it."""
    instance = _instance(instance_name)
    try:
        runlog = RunLogFile.read(log_path)
        report = verify_file(instance, runlog)
    except (RunLogError, InstanceError, OSError) as e:
        raise InputError(f"{log_path}: {e}") from None
    report.print(level=logging.DEBUG)
    click.echo(report.describe())
    if not report.ok:
        click.echo(f"{len(report.failures())} failed finding(s)")
        sys.exit(1)
    click.echo("all findings pass")


@main.command()
@click.option("--n", type=int, required=True, help="Number of states")
@click.option("--max-actions", type=int, default=3, show_default=True)
@click.option("--branching", type=int, default=2, show_default=True, help="Successors per action")
@click.option("--cost-min", type=float, default=0.0, show_default=True)
@click.option("--cost-max", type=float, default=1.0, show_default=True)
@click.option("--discount", type=float, default=0.9, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output", type=click.Path(dir_okay=False, writable=True, allow_dash=True), default="-", show_default=True)
def gen(n, max_actions, branching, cost_min, cost_max, discount, seed, output):
    """Writes a seeded random instance in canonical form."""
    try:
        instance = generate_random(n, max_actions, branching, cost_range=(cost_min, cost_max), discount=discount, seed=seed)
    except (GeneratorError, InstanceError) as e:
        raise InputError(str(e)) from None
    if output == "-":
        click.echo(save_instance(instance), nl=False)
        return
    write_instance(instance, output)


@main.command()
@click.option("--instance", "instance_name", required=True, help="Instance file, or 'counterexample'")
@click.option("--x0", type=int, default=1, show_default=True)
@click.option("--initial", default="first", show_default=True, help="mubar, mustar, first or comma-separated labels")
@click.option("--runs", type=int, default=20, show_default=True, help="Number of seeds")
@click.option("--first-seed", type=int, default=0, show_default=True)
@click.option("--max-steps", type=int, default=1000, show_default=True)
@click.option("--stable-window", type=int, default=None)
@click.option("--epsilon", type=float, default=None)
@click.option("--rule", type=click.Choice([r.value for r in IMPROVEMENT_RULE]), default=None)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--tol", type=float, default=ORACLE_TOLERANCE, show_default=True, help="Oracle optimal-set tolerance")
@click.option("--csv", "csv_path", type=click.Path(dir_okay=False, writable=True), default=None, help="CSV output (default stdout)")
@click.option("--json", "json_path", type=click.Path(dir_okay=False, writable=True), default=None, help="Structured output")
def compare(instance_name, x0, initial, runs, first_seed, max_steps, stable_window, epsilon, rule, workers, tol, csv_path, json_path):
    """Runs every on-line mode over a range of seeds and classical PI once."""
    if runs < 0 or workers < 1:
        raise click.UsageError("--runs must be nonnegative and --workers positive")
    instance = _instance(instance_name)
    template = _config(improvement_rule=rule, epsilon_improve=epsilon, max_steps=max_steps, stable_window=stable_window)
    seeds = list(range(first_seed, first_seed + runs))
    try:
        table = run_comparison(instance, x0, _policy(instance, initial), seeds, template=template, workers=workers, tol=tol)
    except (InvalidStart, InvalidConfig) as e:
        raise InputError(str(e)) from None
    table.print()
    if csv_path is None:
        click.echo(table.to_csv(), nl=False)
    else:
        table.write_csv(csv_path)
    if json_path is not None:
        with open(json_path, "w", encoding="utf-8") as fp:
            json.dump(table.info(), fp, indent=2, ensure_ascii=False)


@main.command()
@click.option("--instance", "instance_name", required=True, help="Instance file, or 'counterexample'")
@click.option("--tol", type=float, default=ORACLE_TOLERANCE, show_default=True)
@click.option("--irreducibility", is_flag=True, help="Also tell whether every policy is irreducible")
def oracle(instance_name, tol, irreducibility):
    """Enumerates every stationary policy and prints J* and the optimal set."""
    instance = _instance(instance_name)
    try:
        report = enumerate_optimal(instance, tol=tol, irreducibility=irreducibility)
    except EnumerationTooLarge as e:
        raise InputError(str(e)) from None
    report.print(level=logging.DEBUG)
    click.echo(f"J* = {_numbers(report.optimal_cost)}")
    click.echo(f"{len(report.optimal_policies)} optimal of {report.enumerated} policies:")
    for p in report.optimal_policies:
        click.echo(f"  {p}")
    if report.all_irreducible is not None:
        click.echo(f"all policies irreducible: {'yes' if report.all_irreducible else 'no'}")
