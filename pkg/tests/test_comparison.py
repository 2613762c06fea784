import csv
import io
import json

import numpy as np

from conftest import random_instances
from onlinepi.model import named_policy
from onlinepi.algorithms import OnlineConfig, evaluate_policy_exact
from onlinepi.harness import CSV_HEADER, run_comparison

SEEDS = list(range(1, 21))


def test_counterexample_sweep(counterexample, mubar):
    table = run_comparison(counterexample, 1, mubar, SEEDS)
    assert table.reference_source == "oracle"
    assert len(table.rows) == 1 + 3 * len(SEEDS)
    for row in table.rows_for("plain"):
        assert row.policy_changes == 0
        assert not row.global_opt
        assert row.local_opt
        assert abs(row.max_gap - 100.0) < 1e-6
    for row in table.rows_for("exploration"):
        if row.converged:
            assert row.global_opt
    classical = table.rows_for("classical")
    assert len(classical) == 1 and classical[0].global_opt and classical[0].seed is None


def test_rows_are_sorted_and_independent_of_workers(counterexample, mubar):
    sequential = run_comparison(counterexample, 1, mubar, [5, 3, 4])
    parallel = run_comparison(counterexample, 1, mubar, [5, 3, 4], workers=4)
    assert sequential.to_csv() == parallel.to_csv()
    assert [r.mode for r in sequential.rows][:4] == ["classical", "plain", "plain", "plain"]
    assert [r.seed for r in sequential.rows_for("exploration")] == [3, 4, 5]


def test_optimal_start(counterexample, mustar):
    table = run_comparison(counterexample, 1, mustar, [0, 1])
    for row in table.rows:
        assert row.policy_changes == 0
        assert row.global_opt


def test_csv_format(counterexample, mubar, tmp_path):
    table = run_comparison(counterexample, 1, mubar, [1, 2])
    text = table.to_csv()
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == CSV_HEADER
    assert rows[1][0] == "" and rows[1][1] == "classical"
    assert all(r[5] in ("true", "false") and r[6] in ("true", "false") for r in rows[1:])
    path = tmp_path / "table.csv"
    table.write_csv(path)
    assert path.read_text(encoding="utf-8") == text
    json.dumps(table.info())


def test_plain_runs_never_worsen_the_start():
    template = OnlineConfig(max_steps=300)
    for seed, instance in random_instances(100, 6, 3, first_seed=200):
        mu0 = named_policy(instance, "first")
        table = run_comparison(instance, 1, mu0, [seed], template=template)
        plain = table.rows_for("plain")[0]
        assert np.all(np.array(plain.final_cost) <= evaluate_policy_exact(instance, mu0) + 1e-8)
        assert plain.max_gap >= 0.0
