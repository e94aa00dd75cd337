import json
import math

import numpy as np
import pytest

from deepdr import harness, nnet, simgen
from deepdr.errors import DataError, DomainError, NumericalError
from deepdr.estimators import ESTIMATORS

SMALL = simgen.SimConfig(N=2000, n_A=100, n_B=200, B=3, seed=11)
FAST = harness.DNNSettings(hidden=(8,), train=nnet.TrainConfig(max_epochs=60, patience=10))


@pytest.fixture(scope="module")
def small_table():
    return harness.run_simulation(SMALL, FAST, rhos=[0.3, 0.8], scenarios=["TF", "FF"])


# -- metrics ------------------------------------------------------------------------------

def test_percent_rb_examples():
    assert harness.percent_rb([2.0, 2.0, 2.0], 2.0) == 0.0
    assert harness.percent_rb([1.1], [1.0]) == pytest.approx(10.0, rel=1e-12)
    assert harness.percent_rb([1.1, 0.9], [1.0, 1.0]) == pytest.approx(0.0, abs=1e-12)


def test_percent_rb_uses_each_replications_truth():
    # +10% against 2 and -10% against 4 cancel even though the raw deviations do not
    assert harness.percent_rb([2.2, 3.6], [2.0, 4.0]) == pytest.approx(0.0, abs=1e-12)


def test_percent_rb_zero_truth():
    with pytest.raises(DomainError):
        harness.percent_rb([1.0], [0.0])


def test_mse_examples():
    assert harness.mse([4.0, 4.0], 4.0) == 0.0
    assert harness.mse([2.0, 0.0], [1.0, 1.0]) == 1.0
    assert harness.mse([3.0], [0.0]) == 9.0


def test_mse_bias_variance_identity_fixed_population():
    cfg = SMALL.with_(B=6, fixed_population=True)
    table = harness.run_simulation(cfg, FAST, rhos=[0.5], scenarios=["TF"])
    mus = {r[5] for r in table.archive}
    assert len(mus) == 1
    mu = mus.pop()
    for est in ESTIMATORS:
        v = table.estimates("TF", 0.5, est)
        expected = np.var(v) + (np.mean(v) - mu) ** 2
        assert table["TF", 0.5, est].mse == pytest.approx(expected, rel=1e-10)
        assert table["TF", 0.5, est].mse >= 0


# -- replication runner -----------------------------------------------------------------------

def test_table_covers_every_cell(small_table):
    assert small_table.scenarios == ["TF", "FF"]
    assert small_table.rhos == [0.3, 0.8]
    assert len(small_table.cells) == 2 * 2 * len(ESTIMATORS)
    assert all(c.B == 3 for c in small_table.cells.values())
    assert len(small_table.archive) == 3 * 2 * 2 * len(ESTIMATORS)
    assert all(math.isfinite(r[4]) for r in small_table.archive)


def test_scenario_only_changes_outcome_based_estimators(small_table):
    for est in ("naive", "ipw", "dipw"):
        np.testing.assert_array_equal(small_table.estimates("TF", 0.3, est), small_table.estimates("FF", 0.3, est))
    assert not np.array_equal(small_table.estimates("TF", 0.3, "reg"), small_table.estimates("FF", 0.3, "reg"))


def test_single_replication_deterministic():
    cfg = SMALL.with_(B=1)
    t1 = harness.run_simulation(cfg, FAST)
    t2 = harness.run_simulation(cfg, FAST)
    assert t1.archive == t2.archive
    assert len(t1.archive) == len(ESTIMATORS)


def test_parallel_matches_serial():
    cfg = SMALL.with_(B=4)
    serial = harness.run_simulation(cfg, FAST, rhos=[0.5])
    parallel = harness.run_simulation(cfg, FAST, rhos=[0.5], n_jobs=2)
    assert harness.format_json(serial) == harness.format_json(parallel)
    assert harness.format_archive(serial) == harness.format_archive(parallel)


def test_failures_are_skipped(monkeypatch):
    real = harness.run_replication

    def flaky(b, *args):
        if b == 3:
            raise NumericalError("forced")
        return real(b, *args)

    monkeypatch.setattr(harness, "run_replication", flaky)
    table = harness.run_simulation(SMALL.with_(B=25), FAST)
    assert [b for b, _ in table.failures] == [3]
    assert all(c.B == 24 for c in table.cells.values())
    assert "1 failed" in harness.format_text(table)


def test_too_many_failures_abort(monkeypatch):
    def broken(b, *args):
        raise NumericalError("forced")

    monkeypatch.setattr(harness, "run_replication", broken)
    with pytest.raises(NumericalError):
        harness.run_simulation(SMALL.with_(B=4), FAST)


# -- reports --------------------------------------------------------------------------------

def test_empty_table_reports_are_header_only():
    empty = harness.MetricsTable()
    assert harness.format_csv(empty).strip() == ",".join(harness.CSV_FIELDS)
    text = harness.format_text(empty).strip().splitlines()
    assert text[0].split() == ["Model", "Estimator"]
    assert json.loads(harness.format_json(empty))["cells"] == []


def test_text_layout(small_table):
    text = harness.format_text(small_table)
    assert "rho=0.30" in text and "rho=0.80" in text
    for label in harness.LABELS.values():
        assert label in text
    assert text.rstrip().endswith("B = 3 replications, 0 failed")


def test_csv_round_trip(small_table, tmp_path):
    path = harness.emit_report(small_table, "csv", tmp_path / "r.csv")
    assert harness.read_report_csv(path) == small_table.cells


def test_json_round_trip_and_config(small_table, tmp_path):
    path = harness.emit_report(small_table, "json", tmp_path / "r.json")
    assert harness.read_report_json(path) == small_table.cells
    doc = json.loads(path.read_text())
    assert doc["config"]["sim"]["N"] == SMALL.N
    assert doc["config"]["hidden"] == [8]


def test_archive_written_alongside(small_table, tmp_path):
    harness.emit_report(small_table, "text", tmp_path / "r.txt", tmp_path / "arch.csv")
    lines = (tmp_path / "arch.csv").read_text().splitlines()
    assert lines[0] == ",".join(harness.ARCHIVE_FIELDS)
    assert len(lines) == 1 + len(small_table.archive)
    rebuilt = harness.MetricsTable.from_archive(
        [(int(r[0]), r[1], float(r[2]), r[3], float(r[4]), float(r[5]))
         for r in (line.split(",") for line in lines[1:])])
    assert rebuilt.cells == small_table.cells


def test_emit_errors(small_table, tmp_path):
    with pytest.raises(DataError):
        harness.emit_report(small_table, "xml", tmp_path / "r.xml")
    with pytest.raises(OSError, match="missing"):
        harness.emit_report(small_table, "csv", tmp_path / "missing" / "r.csv")
