"""Monte Carlo replication of the simulation study.

Each replication draws a population and both samples, fits the linear
pseudo-likelihood scores, the network scores and the outcome regression,
and evaluates the six estimators. Populations differ across ``rho`` only
through the noise scale, and the selection mechanism ignores ``y``. One
replication therefore serves every (scenario, rho) cell from a single set of
draws and a single network fit.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import nnet, simgen
from .data import CovariateMatrix, NonprobSample, ProbSample
from .errors import DataError, DomainError, NumericalError
from .estimators import ESTIMATORS, estimate_all, ols_fit
from .scores import DEFAULT_EPS, fit_dnn_scores, fit_logistic_pl

log = logging.getLogger(__name__)

LABELS = {"naive": "mu_A", "reg": "REG", "ipw": "IPW", "dr": "DR", "dipw": "DIPW", "ddr": "DDR"}
MAX_FAILURE_RATE = 0.05


def percent_rb(estimates, mu_y) -> float:
    """Mean relative deviation from the truth, in percent.

    ``mu_y`` may be a scalar or one true mean per replication.
    """
    est = np.asarray(estimates, dtype=float)
    mu = np.broadcast_to(np.asarray(mu_y, dtype=float), est.shape)
    if est.size == 0:
        raise DomainError("no replications")
    if np.any(mu == 0):
        raise DomainError("percent relative bias is undefined for mu_y = 0")
    return float(np.mean((est - mu) / mu) * 100.0)


def mse(estimates, mu_y) -> float:
    est = np.asarray(estimates, dtype=float)
    mu = np.broadcast_to(np.asarray(mu_y, dtype=float), est.shape)
    if est.size == 0:
        raise DomainError("no replications")
    return float(np.mean((est - mu) ** 2))


@dataclass(frozen=True)
class Cell:
    percent_rb: float
    mse: float
    B: int


@dataclass
class MetricsTable:
    """Per (scenario, rho, estimator) metrics plus the per-replication archive.

    Archive rows are ``(rep, scenario, rho, estimator, estimate, mu_y)``.
    """

    cells: dict[tuple[str, float, str], Cell] = field(default_factory=dict)
    archive: list[tuple[int, str, float, str, float, float]] = field(default_factory=list)
    failures: list[tuple[int, str]] = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def scenarios(self) -> list[str]:
        return sorted({k[0] for k in self.cells}, key=simgen.SCENARIOS.index)

    @property
    def rhos(self) -> list[float]:
        return sorted({k[1] for k in self.cells})

    def __getitem__(self, key) -> Cell:
        scenario, rho, est = key
        return self.cells[(scenario, float(rho), est)]

    def estimates(self, scenario: str, rho: float, estimator: str) -> np.ndarray:
        return np.array([r[4] for r in self.archive
                         if r[1] == scenario and r[2] == rho and r[3] == estimator])

    @classmethod
    def from_archive(cls, archive, failures=(), config=None) -> "MetricsTable":
        archive = sorted(archive, key=lambda r: (r[0], simgen.SCENARIOS.index(r[1]), r[2],
                                                 ESTIMATORS.index(r[3])))
        groups: dict[tuple, list] = {}
        for rep, sc, rho, est, value, mu in archive:
            groups.setdefault((sc, rho, est), []).append((value, mu))
        cells = {}
        for key in sorted(groups, key=lambda k: (simgen.SCENARIOS.index(k[0]), k[1], ESTIMATORS.index(k[2]))):
            v, mu = map(np.array, zip(*groups[key]))
            cells[key] = Cell(percent_rb(v, mu), mse(v, mu), len(v))
        return cls(cells, list(archive), list(failures), dict(config or {}))


@dataclass(frozen=True)
class DNNSettings:
    hidden: tuple[int, ...] = (64, 64)
    train: nnet.TrainConfig = nnet.TrainConfig()
    eps_n: float = DEFAULT_EPS


def _samples(x, y, idx, names) -> NonprobSample:
    return NonprobSample(CovariateMatrix(x[idx], names), y[idx])


def run_replication(b: int, cfg: simgen.SimConfig, rhos: Sequence[float], scenarios: Sequence[str],
                    dnn: DNNSettings) -> list[tuple]:
    """Archive rows for replication ``b`` across every (scenario, rho) cell."""
    seeds = simgen.replication_seeds(cfg.seed, b, cfg.fixed_population)
    draws = simgen.PopulationDraws.draw(cfg.N, cfg.n_A, seeds["population"])
    idx_a, _ = simgen.poisson_indices(draws.pi_a, np.random.default_rng(seeds["sample_A"]))
    idx_b = simgen.srs_indices(cfg.N, cfg.n_B, np.random.default_rng(seeds["sample_B"]))
    names = simgen.COVARIATES

    # scores depend on covariates and membership only, never on y
    a_x = _samples(draws.x, np.zeros(cfg.N), idx_a, names)
    b_s = ProbSample(CovariateMatrix(draws.x[idx_b], names), np.full(idx_b.size, cfg.N / cfg.n_B))
    pl = fit_logistic_pl(a_x, b_s).scores(a_x, dnn.eps_n)
    train_cfg = nnet.TrainConfig(**{**asdict(dnn.train), "seed": int(seeds["dnn"].generate_state(1)[0])})
    arch = nnet.Architecture.from_hidden(len(names), dnn.hidden)
    dnn_scores = fit_dnn_scores(a_x, b_s, arch, train_cfg, dnn.eps_n)

    rows = []
    for rho in rhos:
        pop = draws.population(rho)
        a = _samples(pop.x.values, pop.y, idx_a, names)
        for sc in scenarios:
            m = ols_fit(a, simgen.misspecify(sc).outcome_features)
            for est, value in estimate_all(a, b_s, m, pl, dnn_scores).items():
                rows.append((b, sc, float(rho), est, value, pop.mu_y))
    return rows


def _run_one(args):
    b, cfg, rhos, scenarios, dnn = args
    try:
        return b, run_replication(b, cfg, rhos, scenarios, dnn), None
    except (NumericalError, DataError) as exc:
        return b, None, f"{type(exc).__name__}: {exc}"


def run_simulation(cfg: simgen.SimConfig, dnn: DNNSettings | None = None,
                   rhos: Iterable[float] | None = None, scenarios: Iterable[str] | None = None,
                   n_jobs: int = 1) -> MetricsTable:
    """Run ``cfg.B`` replications and aggregate %RB and MSE per cell.

    ``rhos`` and ``scenarios`` default to ``cfg.rho`` and ``cfg.scenario``.
    Replications that raise a numerical or data error are skipped and listed
    in ``failures``; more than 5% failures aborts the run. Results do not
    depend on ``n_jobs``.
    """
    dnn = dnn or DNNSettings()
    rhos = [float(r) for r in (rhos if rhos is not None else [cfg.rho])]
    scenarios = [simgen.parse_scenario(s) for s in (scenarios if scenarios is not None else [cfg.scenario])]
    tasks = [(b, cfg, rhos, scenarios, dnn) for b in range(cfg.B)]
    if n_jobs == 1:
        results = [_run_one(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            results = list(pool.map(_run_one, tasks))

    archive, failures = [], []
    for b, rows, err in results:
        if err is None:
            archive.extend(rows)
        else:
            log.warning("replication %d failed: %s", b, err)
            failures.append((b, err))
    if len(failures) > MAX_FAILURE_RATE * cfg.B:
        raise NumericalError(f"{len(failures)} of {cfg.B} replications failed; first: {failures[0][1]}")
    config = {"sim": asdict(cfg), "rhos": rhos, "scenarios": scenarios,
              "hidden": list(dnn.hidden), "train": asdict(dnn.train), "eps_n": dnn.eps_n}
    return MetricsTable.from_archive(archive, failures, config)


# -- reports ---------------------------------------------------------------------

CSV_FIELDS = ("scenario", "rho", "estimator", "percent_rb", "mse", "B")
ARCHIVE_FIELDS = ("rep", "scenario", "rho", "estimator", "estimate", "mu_y")


def format_text(table: MetricsTable) -> str:
    rhos = table.rhos
    head = f"{'Model':<6}{'Estimator':<10}" + "".join(f"{'rho=' + format(r, '.2f'):>20}" for r in rhos)
    sub = " " * 16 + "".join(f"{'%RB':>10}{'MSE':>10}" for _ in rhos)
    lines = [head, sub, "-" * len(sub)]
    for sc in table.scenarios:
        for k, est in enumerate(ESTIMATORS):
            if not any((sc, r, est) in table.cells for r in rhos):
                continue
            row = f"{sc if k == 0 else '':<6}{LABELS[est]:<10}"
            for r in rhos:
                c = table.cells.get((sc, r, est))
                row += f"{c.percent_rb:>10.2f}{c.mse:>10.2f}" if c else f"{'':>20}"
            lines.append(row)
        lines.append("-" * len(sub))
    if table.cells:
        B = max(c.B for c in table.cells.values())
        lines.append(f"B = {B} replications, {len(table.failures)} failed")
    return "\n".join(lines) + "\n"


def format_csv(table: MetricsTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for (sc, rho, est), c in table.cells.items():
        w.writerow([sc, repr(rho), est, repr(c.percent_rb), repr(c.mse), c.B])
    return buf.getvalue()


def format_json(table: MetricsTable) -> str:
    doc = {
        "config": table.config,
        "cells": [{"scenario": sc, "rho": rho, "estimator": est, **asdict(c)}
                  for (sc, rho, est), c in table.cells.items()],
        "failures": [{"rep": b, "error": e} for b, e in table.failures],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def format_archive(table: MetricsTable) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ARCHIVE_FIELDS)
    for rep, sc, rho, est, value, mu in table.archive:
        w.writerow([rep, sc, repr(rho), est, repr(value), repr(mu)])
    return buf.getvalue()


FORMATS = {"text": format_text, "csv": format_csv, "json": format_json}


def emit_report(table: MetricsTable, fmt: str, path, archive_path=None) -> Path:
    """Write ``table`` as text, csv or json; optionally write the per-replication archive too."""
    if fmt not in FORMATS:
        raise DataError(f"unknown report format {fmt!r}; expected one of {sorted(FORMATS)}")
    path = Path(path)
    try:
        path.write_text(FORMATS[fmt](table))
        if archive_path is not None:
            Path(archive_path).write_text(format_archive(table))
    except OSError as exc:
        raise OSError(f"cannot write report to {exc.filename or path}: {exc.strerror}") from exc
    return path


def read_report_csv(path) -> dict[tuple[str, float, str], Cell]:
    with Path(path).open(newline="") as fh:
        return {(r["scenario"], float(r["rho"]), r["estimator"]):
                Cell(float(r["percent_rb"]), float(r["mse"]), int(r["B"]))
                for r in csv.DictReader(fh)}


def read_report_json(path) -> dict[tuple[str, float, str], Cell]:
    doc = json.loads(Path(path).read_text())
    return {(c["scenario"], float(c["rho"]), c["estimator"]): Cell(c["percent_rb"], c["mse"], c["B"])
            for c in doc["cells"]}


