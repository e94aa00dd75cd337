"""Sampling-score estimation for the nonprobability sample.

The logit score g is fitted by maximising the survey pseudo-log-likelihood

    l*(g) = sum_{i in S_A} g(x_i) - sum_{j in S_B} d_j log(1 + exp(g(x_j)))

either over ReLU networks (``fit_dnn_scores``) or over linear logits
``theta' (1, x)`` (``fit_logistic_pl``, Newton-Raphson).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import expit

from . import nnet
from .data import NonprobSample, ProbSample
from .errors import ConvergenceError, DomainError, RankError, SchemaError

DEFAULT_EPS = 1e-3


def sigmoid(z):
    """Logistic function, overflow-free for any finite input."""
    return expit(z)


def log1pexp(z):
    """``log(1 + exp(z))`` without overflow."""
    return np.logaddexp(0.0, z)


def pseudo_log_lik(g_a, g_b, d_b) -> float:
    g_a = np.asarray(g_a, dtype=float)
    g_b = np.asarray(g_b, dtype=float)
    d_b = np.asarray(d_b, dtype=float)
    if g_b.shape != d_b.shape:
        raise ValueError("g_b and d_b must have the same length")
    return float(np.sum(g_a) - np.sum(d_b * log1pexp(g_b)))


def population_log_lik(g_all, selected) -> float:
    """Bernoulli log-likelihood of the selection indicators over a whole population.

    Needs covariates for every unit, so it is only usable in simulation, where
    it serves as the target the pseudo-log-likelihood estimates.
    """
    g_all = np.asarray(g_all, dtype=float)
    selected = np.asarray(selected, dtype=bool)
    return float(np.sum(g_all[selected]) - np.sum(log1pexp(g_all)))


def truncate_scores(pi, eps_n: float = DEFAULT_EPS) -> np.ndarray:
    """Clamp scores into ``[eps_n, 1 - eps_n]``."""
    if not 0 < eps_n < 0.5:
        raise DomainError(f"truncation level must lie in (0, 0.5), got {eps_n}")
    return np.clip(np.asarray(pi, dtype=float), eps_n, 1.0 - eps_n)


def pseudo_loss_and_grad(net: nnet.Network, x_a, x_b, d_b) -> tuple[float, np.ndarray]:
    """``-l*`` and its gradient with respect to the network parameters."""
    x_a = np.asarray(x_a, dtype=float).reshape(-1, net.arch.input_dim)
    x_b = np.asarray(x_b, dtype=float).reshape(-1, net.arch.input_dim)
    d_b = np.asarray(d_b, dtype=float)
    X = np.vstack([x_a, x_b])
    n_a = x_a.shape[0]
    if X.shape[0] == 0:
        return 0.0, np.zeros(net.arch.n_params)
    raw, acts = nnet.forward_cache(net, X)
    g = raw if net.clip is None else np.clip(raw, -net.clip, net.clip)
    g_a, g_b = g[:n_a], g[n_a:]
    loss = -pseudo_log_lik(g_a, g_b, d_b)
    c = np.concatenate([-np.ones(n_a), d_b * sigmoid(g_b)])
    return loss, nnet.backward(net, X, c, cache=(raw, acts))


def pseudo_loss_gradients(net: nnet.Network, x_a, x_b, d_b) -> np.ndarray:
    return pseudo_loss_and_grad(net, x_a, x_b, d_b)[1]


@dataclass(frozen=True)
class ScoreSet:
    """Estimated selection probabilities for the units of S_A.

    ``pi_hat`` is truncated to ``[eps_n, 1 - eps_n]``; ``pi_raw`` is
    ``sigmoid(g_hat(x_i))`` before truncation.
    """

    pi_hat: np.ndarray
    pi_raw: np.ndarray
    g_hat: Callable[[np.ndarray], np.ndarray]
    eps_n: float
    diagnostics: dict = field(default_factory=dict)
    model: object = None

    @classmethod
    def from_logits(cls, g, g_hat, eps_n: float = DEFAULT_EPS, model=None, **diagnostics) -> "ScoreSet":
        raw = sigmoid(np.asarray(g, dtype=float))
        pi = truncate_scores(raw, eps_n)
        diagnostics.update(
            pi_raw_min=float(raw.min()), pi_raw_max=float(raw.max()),
            pi_min=float(pi.min()), pi_max=float(pi.max()),
            n_truncated=float(np.sum(pi != raw)),
        )
        raw.setflags(write=False)
        pi.setflags(write=False)
        return cls(pi, raw, g_hat, eps_n, diagnostics, model)

    @classmethod
    def constant(cls, pi: float, n: int, eps_n: float = DEFAULT_EPS) -> "ScoreSet":
        g = float(np.log(pi / (1 - pi)))
        return cls.from_logits(np.full(n, g), lambda x: np.full(np.atleast_2d(x).shape[0], g), eps_n)


# -- parametric working model ---------------------------------------------------

@dataclass(frozen=True)
class LogisticTheta:
    """Coefficients of a linear logit, intercept first."""

    theta: np.ndarray
    iterations: int = 0
    score_norm: float = 0.0

    def __post_init__(self):
        t = np.array(self.theta, dtype=float).ravel()
        if not np.all(np.isfinite(t)):
            raise ValueError("theta must be finite")
        t.setflags(write=False)
        object.__setattr__(self, "theta", t)

    def logit(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return self.theta[0] + x @ self.theta[1:]

    def scores(self, a: NonprobSample, eps_n: float = DEFAULT_EPS) -> ScoreSet:
        return ScoreSet.from_logits(self.logit(a.x.values), self.logit, eps_n, model=self,
                                    newton_iterations=float(self.iterations))


def _with_intercept(x: np.ndarray) -> np.ndarray:
    return np.column_stack([np.ones(x.shape[0]), x])


def fit_logistic_pl(a: NonprobSample, b: ProbSample, tol: float = 1e-8,
                    max_iter: int = 100) -> LogisticTheta:
    """Maximise the pseudo-log-likelihood over linear logits by Newton-Raphson.

    Stops once the sup-norm of the score is below ``tol``. A Newton step that
    fails to increase the objective is halved (up to 50 times).
    """
    if a.x.column_names != b.x.column_names:
        raise SchemaError("samples must share covariates; call align_covariates first")
    xa, xb, d = _with_intercept(a.x.values), _with_intercept(b.x.values), b.d
    p = xa.shape[1]
    if np.linalg.matrix_rank(np.vstack([xa, xb])) < p or np.linalg.matrix_rank(xb) < p:
        raise RankError("design matrix with intercept is rank deficient")
    sum_a = xa.sum(axis=0)

    def objective(th):
        return pseudo_log_lik(xa @ th, xb @ th, d)

    theta = np.zeros(p)
    value = objective(theta)
    for it in range(1, max_iter + 1):
        s = sigmoid(xb @ theta)
        score = sum_a - xb.T @ (d * s)
        if np.max(np.abs(score)) < tol:
            return LogisticTheta(theta, it - 1, float(np.max(np.abs(score))))
        info = (xb * (d * s * (1 - s))[:, None]).T @ xb
        try:
            step = np.linalg.solve(info, score)
        except np.linalg.LinAlgError as exc:
            raise RankError(f"singular Hessian at iteration {it}") from exc
        for _ in range(50):
            cand = theta + step
            cand_value = objective(cand)
            if cand_value >= value:
                break
            step = step / 2
        else:
            # halving exhausted: sitting at the optimum up to rounding
            cand, cand_value = theta, value
        theta, value = cand, cand_value
    s = sigmoid(xb @ theta)
    resid = float(np.max(np.abs(sum_a - xb.T @ (d * s))))
    if resid < tol:
        return LogisticTheta(theta, max_iter, resid)
    raise ConvergenceError(f"Newton did not converge in {max_iter} iterations (|U|={resid:.3g})",
                           max_iter, resid)


# -- network scores ---------------------------------------------------------------

@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, a: NonprobSample, b: ProbSample) -> "Standardizer":
        # S_A units count once, S_B units by their design weight
        x = np.vstack([a.x.values, b.x.values])
        w = np.concatenate([np.ones(a.n), b.d])
        mean = np.average(x, axis=0, weights=w)
        sd = np.sqrt(np.average((x - mean) ** 2, axis=0, weights=w))
        return cls(mean, np.where(sd > 0, sd, 1.0))

    def __call__(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=float) - self.mean) / self.scale


def _holdout(n: int, frac: float, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    n_val = int(round(frac * n))
    n_val = min(max(n_val, 1 if n >= 2 else 0), n - 1) if n else 0
    perm = rng.permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


def fit_dnn_scores(a: NonprobSample, b: ProbSample, arch: nnet.Architecture | None = None,
                   cfg: nnet.TrainConfig | None = None, eps_n: float = DEFAULT_EPS,
                   standardize: bool = True) -> ScoreSet:
    """Fit the logit score with a ReLU network trained by ADAM on ``-l*``.

    A fraction ``cfg.val_fraction`` of each sample is held out for early
    stopping; held-out S_B units keep their design weights.
    """
    if a.x.column_names != b.x.column_names:
        raise SchemaError("samples must share covariates; call align_covariates first")
    cfg = cfg or nnet.TrainConfig()
    arch = arch or nnet.Architecture.from_hidden(a.x.r)
    if arch.input_dim != a.x.r:
        raise SchemaError(f"network input width {arch.input_dim} != {a.x.r} covariates")

    scaler = Standardizer.fit(a, b) if standardize else Standardizer(np.zeros(a.x.r), np.ones(a.x.r))
    xa, xb, d = scaler(a.x.values), scaler(b.x.values), b.d

    init_seed, split_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    split_rng = np.random.default_rng(split_seed)
    tr_a, va_a = _holdout(a.n, cfg.val_fraction, split_rng)
    tr_b, va_b = _holdout(b.n, cfg.val_fraction, split_rng)

    def provider(net):
        loss, grad = pseudo_loss_and_grad(net, xa[tr_a], xb[tr_b], d[tr_b])
        g_va = net(np.vstack([xa[va_a], xb[va_b]]))
        val = -pseudo_log_lik(g_va[:va_a.size], g_va[va_a.size:], d[va_b])
        return loss, grad, val

    net0 = nnet.xavier_init(arch, int(init_seed.generate_state(1)[0]), clip=cfg.clip_D)
    net, hist = nnet.train(net0, provider, cfg)

    def g_hat(x):
        return net(scaler(np.atleast_2d(x)))

    return ScoreSet.from_logits(
        net(xa), g_hat, eps_n, model=net,
        epochs=float(hist.epochs), best_epoch=float(hist.best_epoch),
        final_train_loss=hist.train_loss[-1], best_val_loss=min(hist.val_loss),
    )
