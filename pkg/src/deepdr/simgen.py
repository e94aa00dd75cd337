"""Simulated finite populations with a nonlinear selection mechanism.

Covariates are built recursively from independent draws

    x1 = z1 ~ Bernoulli(0.5)          x2 = z2 + 0.3 x1,      z2 ~ U(0, 2)
    x3 = z3 + 0.2 (x1 + x2)           z3 ~ Exp(1)
    x4 = z4 + 0.1 (x1 + x2 + x3)      z4 ~ chi2(4)

with outcome ``y = 2 + x1 + x2 + x3 + x4 + sigma * eps`` and selection logit
``theta0 + selection_logits(x)``. ``sigma`` fixes corr(y, x1+x2+x3+x4) at
``rho``; ``theta0`` makes the selection probabilities sum to ``n_A``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import CovariateMatrix, FinitePopulation, NonprobSample, ProbSample
from .errors import ConfigError, DomainError
from .scores import sigmoid

COVARIATES = ("x1", "x2", "x3", "x4")
SCENARIOS = ("TF", "FF")


@dataclass(frozen=True)
class SimConfig:
    N: int = 20000
    n_A: int = 500
    n_B: int = 1000
    rho: float = 0.5
    scenario: str = "TF"
    B: int = 500
    seed: int = 0
    fixed_population: bool = False

    def __post_init__(self):
        object.__setattr__(self, "scenario", parse_scenario(self.scenario))
        if not (0 < self.n_A < self.N and 0 < self.n_B <= self.N):
            raise ConfigError(f"need 0 < n_A < N and 0 < n_B <= N (N={self.N}, n_A={self.n_A}, n_B={self.n_B})")
        if not 0 < self.rho < 1:
            raise ConfigError(f"rho must lie in (0, 1), got {self.rho}")
        if self.B < 1:
            raise ConfigError("B must be >= 1")

    def with_(self, **changes) -> "SimConfig":
        return replace(self, **changes)


def parse_scenario(token: str) -> str:
    s = str(token).strip().upper()
    if s not in SCENARIOS:
        raise ConfigError(f"unknown scenario {token!r}; expected one of {SCENARIOS}")
    return s


@dataclass(frozen=True)
class ModelRecipe:
    """Which covariates each working model sees under a scenario."""

    scenario: str
    outcome_features: tuple[str, ...]
    propensity_features: tuple[str, ...]
    dnn_features: tuple[str, ...] = COVARIATES


def misspecify(scenario: str) -> ModelRecipe:
    """TF: correct outcome model; FF: outcome model drops x4. The linear logit is wrong in both."""
    s = parse_scenario(scenario)
    outcome = COVARIATES if s == "TF" else COVARIATES[:3]
    return ModelRecipe(s, outcome, COVARIATES)


# -- building blocks -------------------------------------------------------------

def draw_latent(N: int, rng: np.random.Generator) -> np.ndarray:
    """Independent columns z1..z4, shape (N, 4)."""
    return np.column_stack([
        rng.binomial(1, 0.5, N).astype(float),
        rng.uniform(0.0, 2.0, N),
        rng.exponential(1.0, N),
        rng.chisquare(4, N),
    ])


def build_covariates(z: np.ndarray) -> np.ndarray:
    x1 = z[:, 0]
    x2 = z[:, 1] + 0.3 * x1
    x3 = z[:, 2] + 0.2 * (x1 + x2)
    x4 = z[:, 3] + 0.1 * (x1 + x2 + x3)
    return np.column_stack([x1, x2, x3, x4])


def linear_predictor(x: np.ndarray) -> np.ndarray:
    """x' beta with the true slopes (1, 1, 1, 1); the intercept does not affect correlations."""
    return np.asarray(x, dtype=float)[:, :4].sum(axis=1)


def calibrate_sigma(linear_pred, rho: float) -> float:
    """Noise scale giving corr(linear_pred + sigma * eps, linear_pred) = rho in expectation."""
    if not 0 < rho < 1:
        raise DomainError(f"rho must lie in (0, 1), got {rho}")
    sd = float(np.std(linear_pred))
    if not sd > 0:
        raise DomainError("linear predictor has zero variance")
    return sd * math.sqrt(1.0 / rho ** 2 - 1.0)


def selection_logits(x) -> np.ndarray:
    """Nonlinear part of the selection logit (everything except theta0)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != 4:
        raise DomainError(f"selection model needs 4 covariates, got {x.shape[1]}")
    x1, x2, x3, x4 = x.T
    return (0.05 * x1 * x2 + 0.1 * x2 ** 2 + 0.05 * x3 * x4
            + 0.08 * np.sin(0.3 * x3) + 0.05 * np.log1p(x2 + x4))


def calibrate_theta0(logits, n_A: float, lo: float = -40.0, hi: float = 40.0) -> float:
    """Bisection for theta0 with sum(sigmoid(theta0 + logits)) = n_A, to within 1e-6 * n_A."""
    logits = np.asarray(logits, dtype=float)
    if not 0 < n_A < logits.size:
        raise DomainError(f"n_A must lie in (0, N={logits.size}), got {n_A}")

    def h(t):
        return float(np.sum(sigmoid(t + logits))) - n_A

    h_lo, h_hi = h(lo), h(hi)
    if h_lo > 0 or h_hi < 0:
        raise DomainError(f"theta0 not bracketed by [{lo}, {hi}]")
    tol = 1e-6 * n_A
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h_mid = h(mid)
        if abs(h_mid) <= tol:
            return mid
        if h_mid < 0:
            lo = mid
        else:
            hi = mid
    if abs(h(mid)) <= tol:
        return mid
    raise DomainError("bisection for theta0 failed to reach tolerance")


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


@dataclass(frozen=True)
class PopulationDraws:
    """Everything random about a population except the noise scale."""

    z: np.ndarray
    x: np.ndarray
    eps: np.ndarray
    pi_a: np.ndarray
    theta0: float

    @classmethod
    def draw(cls, N: int, n_A: float, seed) -> "PopulationDraws":
        rng = _rng(seed)
        z = draw_latent(N, rng)
        eps = rng.standard_normal(N)
        x = build_covariates(z)
        logits = selection_logits(x)
        theta0 = calibrate_theta0(logits, n_A)
        return cls(z, x, eps, sigmoid(theta0 + logits), theta0)

    def population(self, rho: float | None = None, sigma: float | None = None) -> FinitePopulation:
        lp = linear_predictor(self.x)
        if sigma is None:
            sigma = calibrate_sigma(lp, rho)
        y = 2.0 + lp + sigma * self.eps
        return FinitePopulation(CovariateMatrix(self.x, COVARIATES), y, self.pi_a)


def gen_population(cfg: SimConfig, seed=None, sigma: float | None = None) -> FinitePopulation:
    """One finite population for ``cfg``; ``sigma`` overrides the calibrated noise scale."""
    seed = cfg.seed if seed is None else seed
    return PopulationDraws.draw(cfg.N, cfg.n_A, seed).population(cfg.rho, sigma)


def poisson_indices(pi, rng: np.random.Generator, min_size: int = 2) -> tuple[np.ndarray, int]:
    """Indices selected by independent Bernoulli(pi_i) trials, and the number of redraws.

    Draws with fewer than ``min_size`` units are discarded and redrawn from
    the same stream.
    """
    pi = np.asarray(pi, dtype=float)
    for retries in range(1000):
        idx = np.flatnonzero(rng.random(pi.size) < pi)
        if idx.size >= min_size:
            return idx, retries
    raise DomainError("Poisson sampling kept returning (near-)empty samples")


def draw_sample_A(pop: FinitePopulation, seed) -> NonprobSample:
    idx, _ = poisson_indices(pop.pi_a, _rng(seed))
    return NonprobSample(CovariateMatrix(pop.x.values[idx], pop.x.column_names), pop.y[idx])


def srs_indices(N: int, n_B: int, rng: np.random.Generator) -> np.ndarray:
    if not 0 < n_B <= N:
        raise DomainError(f"need 0 < n_B <= N, got n_B={n_B}, N={N}")
    return np.sort(rng.choice(N, size=n_B, replace=False))


def draw_sample_B(pop: FinitePopulation, n_B: int, seed) -> ProbSample:
    """Simple random sample without replacement; every weight is N / n_B."""
    idx = srs_indices(pop.N, n_B, _rng(seed))
    return ProbSample(CovariateMatrix(pop.x.values[idx], pop.x.column_names),
                      np.full(idx.size, pop.N / n_B))


def replication_seeds(master_seed: int, b: int, fixed_population: bool = False) -> dict[str, np.random.SeedSequence]:
    """Independent seed streams for replication ``b``, derived from the master seed alone.

    With ``fixed_population`` the population stream is shared by every
    replication while the sample and training streams still vary.
    """
    rep = np.random.SeedSequence(master_seed, spawn_key=(b,))
    pop, sa, sb, dnn = rep.spawn(4)
    if fixed_population:
        pop = np.random.SeedSequence(master_seed, spawn_key=(2**32 - 1,))
    return {"population": pop, "sample_A": sa, "sample_B": sb, "dnn": dnn}
