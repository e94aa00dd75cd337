"""Two-sample data model and CSV ingestion.

A nonprobability sample carries covariates and outcomes; the reference
probability sample carries covariates and design weights. Both are
immutable once built.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, ParseError, SchemaError


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class CovariateMatrix:
    """Covariates for a set of units: one row per unit, one column per variable."""

    values: np.ndarray
    column_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2:
            raise SchemaError(f"covariates must be 2-D, got shape {values.shape}")
        names = tuple(str(c) for c in self.column_names)
        if values.shape[1] < 1:
            raise SchemaError("at least one covariate is required")
        if len(names) != values.shape[1]:
            raise SchemaError(f"{len(names)} column names for {values.shape[1]} columns")
        if len(set(names)) != len(names):
            raise SchemaError(f"duplicate covariate names in {names}")
        if not np.all(np.isfinite(values)):
            bad = int(np.argwhere(~np.isfinite(values))[0, 0])
            raise ParseError(f"non-finite covariate value at row {bad + 1}", row=bad + 1)
        object.__setattr__(self, "values", _frozen(values))
        object.__setattr__(self, "column_names", names)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def r(self) -> int:
        return self.values.shape[1]

    def select(self, names: Sequence[str]) -> "CovariateMatrix":
        missing = [c for c in names if c not in self.column_names]
        if missing:
            raise SchemaError(f"unknown covariate(s): {missing}")
        idx = [self.column_names.index(c) for c in names]
        return CovariateMatrix(self.values[:, idx], tuple(names))


@dataclass(frozen=True)
class NonprobSample:
    """The nonprobability sample S_A: covariates and observed outcomes, no weights."""

    x: CovariateMatrix
    y: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        if y.shape[0] != self.x.n:
            raise SchemaError(f"{y.shape[0]} outcomes for {self.x.n} covariate rows")
        if y.shape[0] < 2:
            raise DomainError("nonprobability sample needs at least 2 units")
        if not np.all(np.isfinite(y)):
            bad = int(np.argwhere(~np.isfinite(y))[0, 0])
            raise ParseError(f"non-finite outcome at row {bad + 1}", row=bad + 1)
        object.__setattr__(self, "y", _frozen(y))

    @property
    def n(self) -> int:
        return self.x.n


@dataclass(frozen=True)
class ProbSample:
    """The reference probability sample S_B: covariates and design weights d = 1/pi_B."""

    x: CovariateMatrix
    d: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float).ravel()
        if d.shape[0] != self.x.n:
            raise SchemaError(f"{d.shape[0]} weights for {self.x.n} covariate rows")
        bad = np.flatnonzero(~(np.isfinite(d) & (d > 0)))
        if bad.size:
            row = int(bad[0]) + 1
            raise DomainError(f"design weight must be positive and finite (row {row}: {d[bad[0]]})", row=row)
        object.__setattr__(self, "d", _frozen(d))

    @property
    def n(self) -> int:
        return self.x.n


@dataclass(frozen=True)
class FinitePopulation:
    """A fully observed simulated population, including true selection probabilities."""

    x: CovariateMatrix
    y: np.ndarray
    pi_a: np.ndarray
    mu_y: float = field(init=False)

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        pi = np.asarray(self.pi_a, dtype=float).ravel()
        if not (y.shape[0] == pi.shape[0] == self.x.n):
            raise SchemaError("population arrays have inconsistent lengths")
        if np.any((pi <= 0) | (pi >= 1)):
            raise DomainError("true selection probabilities must lie in (0, 1)")
        object.__setattr__(self, "y", _frozen(y))
        object.__setattr__(self, "pi_a", _frozen(pi))
        object.__setattr__(self, "mu_y", float(np.mean(y)))

    @property
    def N(self) -> int:
        return self.x.n


@dataclass
class EstimateReport:
    """Point estimates keyed by estimator name plus free-form numeric diagnostics."""

    estimates: dict[str, float]
    diagnostics: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for name, value in self.estimates.items():
            if not math.isfinite(value):
                raise DomainError(f"estimate {name!r} is not finite: {value}")

    def format(self) -> str:
        width = max((len(k) for k in [*self.estimates, *self.diagnostics]), default=0)
        lines = ["estimates:"]
        lines += [f"  {k:<{width}}  {v: .6f}" for k, v in self.estimates.items()]
        if self.diagnostics:
            lines.append("diagnostics:")
            lines += [f"  {k:<{width}}  {v: .6g}" for k, v in self.diagnostics.items()]
        return "\n".join(lines)


# -- CSV ---------------------------------------------------------------------

def _read_table(path, required: Sequence[str], features: Sequence[str] | None):
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header row required") from None
        for col in required:
            if col not in header:
                raise SchemaError(f"{path}: column {col!r} not found in header {header}")
        if features is None:
            columns = [h for h in header if h not in required]
        else:
            missing = [c for c in features if c not in header]
            if missing:
                raise SchemaError(f"{path}: feature column(s) {missing} not found")
            columns = [c for c in features if c not in required]
        wanted = list(required) + columns
        idx = [header.index(c) for c in wanted]
        rows = []
        for lineno, rec in enumerate(reader, start=1):
            if not rec or all(not c.strip() for c in rec):
                continue
            if len(rec) != len(header):
                raise ParseError(f"{path}: row {lineno} has {len(rec)} fields, expected {len(header)}", row=lineno)
            vals = []
            for j, name in zip(idx, wanted):
                cell = rec[j].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise ParseError(f"{path}: row {lineno}, column {name!r}: cannot parse {cell!r}",
                                     row=lineno, column=name) from None
                if not math.isfinite(v):
                    raise ParseError(f"{path}: row {lineno}, column {name!r}: non-finite value {cell!r}",
                                     row=lineno, column=name)
                vals.append(v)
            rows.append(vals)
    if not columns:
        raise SchemaError(f"{path}: no covariate columns besides {list(required)}")
    table = np.array(rows, dtype=float).reshape(len(rows), len(wanted))
    return table[:, : len(required)], table[:, len(required):], columns


def load_nonprob_csv(path, outcome_col: str, features: Sequence[str] | None = None) -> NonprobSample:
    """Read S_A from a CSV file; every column other than ``outcome_col`` is a covariate.

    ``features`` restricts (and orders) the covariates; unlisted columns are
    ignored and need not be numeric. Rows are numbered from 1 after the header.
    """
    req, cov, names = _read_table(path, [outcome_col], features)
    return NonprobSample(CovariateMatrix(cov, names), req[:, 0])


def load_prob_csv(path, weight_col: str, features: Sequence[str] | None = None) -> ProbSample:
    """Read S_B from a CSV file; ``weight_col`` holds the design weights."""
    req, cov, names = _read_table(path, [weight_col], features)
    return ProbSample(CovariateMatrix(cov, names), req[:, 0])


def _write_csv(path, first_name: str, first: np.ndarray, x: CovariateMatrix) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*x.column_names, first_name])
        for row, v in zip(x.values, first):
            # repr() of a float round-trips exactly
            w.writerow([repr(float(c)) for c in row] + [repr(float(v))])


def write_nonprob_csv(sample: NonprobSample, path, outcome_col: str = "y") -> None:
    _write_csv(path, outcome_col, sample.y, sample.x)


def write_prob_csv(sample: ProbSample, path, weight_col: str = "d") -> None:
    _write_csv(path, weight_col, sample.d, sample.x)


def write_population_csv(pop: FinitePopulation, path) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([*pop.x.column_names, "y", "pi_a"])
        for row, y, p in zip(pop.x.values, pop.y, pop.pi_a):
            w.writerow([repr(float(c)) for c in row] + [repr(float(y)), repr(float(p))])


# -- schema helpers ------------------------------------------------------------

def align_covariates(a: NonprobSample, b: ProbSample) -> tuple[NonprobSample, ProbSample]:
    """Restrict both samples to their shared covariates, in S_A's column order."""
    common = [c for c in a.x.column_names if c in set(b.x.column_names)]
    if not common:
        raise SchemaError(
            f"no common covariates between {list(a.x.column_names)} and {list(b.x.column_names)}")
    if tuple(common) == a.x.column_names == b.x.column_names:
        return a, b
    return (NonprobSample(a.x.select(common), a.y),
            ProbSample(b.x.select(common), b.d))


def minmax_rescale(a: NonprobSample, b: ProbSample) -> tuple[NonprobSample, ProbSample]:
    """Map every covariate onto [0, 1] using the range over both samples.

    Constant columns are mapped to 0.
    """
    a, b = align_covariates(a, b)
    both = np.vstack([a.x.values, b.x.values])
    lo, hi = both.min(axis=0), both.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    names = a.x.column_names
    return (NonprobSample(CovariateMatrix((a.x.values - lo) / span, names), a.y),
            ProbSample(CovariateMatrix((b.x.values - lo) / span, names), b.d))
