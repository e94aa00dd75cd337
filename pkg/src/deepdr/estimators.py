"""Population-mean estimators combining S_A outcomes with S_B design weights.

All estimators use Hajek normalisation: inverse-score weights on S_A are
divided by their sum, design weights on S_B by theirs.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import NonprobSample, ProbSample
from .errors import RankError, SchemaError
from .scores import ScoreSet


@dataclass(frozen=True)
class OutcomeModel:
    """Linear working model ``m(x) = beta' (1, x_S)`` over the covariate subset ``features``."""

    beta: np.ndarray
    features: tuple[str, ...]

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).ravel()
        if beta.size != len(self.features) + 1:
            raise ValueError("beta needs one entry per feature plus the intercept")
        if not np.all(np.isfinite(beta)):
            raise ValueError("beta must be finite")
        beta.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "features", tuple(self.features))

    def predict(self, sample: NonprobSample | ProbSample) -> np.ndarray:
        x = sample.x.select(self.features).values
        return self.beta[0] + x @ self.beta[1:]

    @classmethod
    def zero(cls, features: Sequence[str]) -> "OutcomeModel":
        return cls(np.zeros(len(features) + 1), tuple(features))


def ols_fit(a: NonprobSample, feature_subset: Sequence[str] | None = None) -> OutcomeModel:
    """Least squares of y on (1, x) over S_A, solved through a QR factorisation."""
    features = tuple(feature_subset) if feature_subset is not None else a.x.column_names
    x = a.x.select(features).values
    X = np.column_stack([np.ones(a.n), x])
    if X.shape[0] < X.shape[1]:
        raise RankError(f"{X.shape[0]} observations for {X.shape[1]} coefficients")
    q, r = np.linalg.qr(X)
    diag = np.abs(np.diag(r))
    if diag.min() <= diag.max() * X.shape[0] * np.finfo(float).eps:
        raise RankError(f"outcome design matrix is rank deficient (features {features})")
    beta = np.linalg.solve(r, q.T @ a.y)
    return OutcomeModel(beta, features)


def _check(a: NonprobSample, scores: ScoreSet) -> np.ndarray:
    pi = np.asarray(scores.pi_hat, dtype=float)
    if pi.shape[0] != a.n:
        raise SchemaError(f"{pi.shape[0]} scores for {a.n} units in S_A")
    return pi


def _hajek_a(a: NonprobSample, scores: ScoreSet, values: np.ndarray) -> float:
    w = 1.0 / _check(a, scores)
    return float(np.sum(w * values) / np.sum(w))


def _hajek_b(b: ProbSample, values: np.ndarray) -> float:
    return float(np.sum(b.d * values) / np.sum(b.d))


def estimate_naive(a: NonprobSample) -> float:
    return float(np.mean(a.y))


def estimate_reg(b: ProbSample, m: OutcomeModel) -> float:
    return _hajek_b(b, m.predict(b))


def estimate_ipw(a: NonprobSample, scores: ScoreSet) -> float:
    return _hajek_a(a, scores, a.y)


def estimate_dr(a: NonprobSample, b: ProbSample, scores: ScoreSet, m: OutcomeModel) -> float:
    """Inverse-score weighted residual mean on S_A plus the design-weighted prediction mean on S_B."""
    return _hajek_a(a, scores, a.y - m.predict(a)) + _hajek_b(b, m.predict(b))


# The deep variants share the arithmetic; only the score provider differs.
def estimate_dipw(a: NonprobSample, dnn_scores: ScoreSet) -> float:
    return estimate_ipw(a, dnn_scores)


def estimate_ddr(a: NonprobSample, b: ProbSample, dnn_scores: ScoreSet, m: OutcomeModel) -> float:
    return estimate_dr(a, b, dnn_scores, m)


ESTIMATORS = ("naive", "reg", "ipw", "dr", "dipw", "ddr")


def estimate_all(a: NonprobSample, b: ProbSample, m: OutcomeModel,
                 pl_scores: ScoreSet, dnn_scores: ScoreSet) -> dict[str, float]:
    """All six estimates, keyed by the names in ``ESTIMATORS``."""
    return {
        "naive": estimate_naive(a),
        "reg": estimate_reg(b, m),
        "ipw": estimate_ipw(a, pl_scores),
        "dr": estimate_dr(a, b, pl_scores, m),
        "dipw": estimate_dipw(a, dnn_scores),
        "ddr": estimate_ddr(a, b, dnn_scores, m),
    }
