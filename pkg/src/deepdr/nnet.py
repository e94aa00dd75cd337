"""Dense ReLU network with scalar output, trained by full-batch ADAM.

Parameters are held as one flat float64 vector laid out layer by layer
(``W_0`` row-major, ``v_0``, ``W_1``, ``v_1``, ...). Layer ``k`` maps width
``p_k`` to ``p_{k+1}``; hidden layers use ReLU and the output is linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .errors import TrainingError


@dataclass(frozen=True)
class Architecture:
    """Width vector ``(p_0, ..., p_K, 1)``; depth ``K`` is the number of hidden layers."""

    widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.widths)
        if len(widths) < 2:
            raise ValueError("need at least input and output widths")
        if min(widths) < 1:
            raise ValueError(f"all widths must be >= 1, got {widths}")
        if widths[-1] != 1:
            raise ValueError(f"output width must be 1, got {widths[-1]}")
        object.__setattr__(self, "widths", widths)

    @classmethod
    def from_hidden(cls, r: int, hidden: Sequence[int] = (64, 64)) -> "Architecture":
        return cls((r, *hidden, 1))

    @property
    def depth(self) -> int:
        return len(self.widths) - 2

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    @property
    def shapes(self) -> list[tuple[int, int]]:
        return [(self.widths[k + 1], self.widths[k]) for k in range(self.depth + 1)]

    @property
    def n_params(self) -> int:
        return sum(o * i + o for o, i in self.shapes)


def validate_scaling(arch: Architecture, n: int, gamma_n: float | None = None,
                     c: float = 1.0, smoothness: float = 2.0) -> bool:
    """Heuristic check of the width/depth growth conditions for sample size ``n``.

    Requires ``K <= c * log(n)`` and ``c * n * gamma_n**2 <= min hidden width``
    with ``max hidden width <= n / c``. When ``gamma_n`` is not given it is
    taken as ``n ** (-s / (2 s + p_0))`` for smoothness ``s``. The constants are
    asymptotic, so a ``False`` is a warning sign rather than an error.
    """
    if gamma_n is None:
        gamma_n = n ** (-smoothness / (2 * smoothness + arch.input_dim))
    hidden = arch.widths[1:-1]
    if not hidden:
        return True
    return (arch.depth <= c * math.log(n)
            and c * n * gamma_n ** 2 <= min(hidden)
            and max(hidden) <= n / c)


@dataclass(frozen=True)
class Network:
    """Parameters of a feedforward ReLU network. Immutable."""

    arch: Architecture
    params: np.ndarray
    clip: float | None = None

    def __post_init__(self):
        p = np.array(self.params, dtype=float).ravel()
        if p.size != self.arch.n_params:
            raise ValueError(f"expected {self.arch.n_params} parameters, got {p.size}")
        if not np.all(np.isfinite(p)):
            raise ValueError("network parameters must be finite")
        if self.clip is not None and not self.clip > 0:
            raise ValueError("clip must be positive")
        p.setflags(write=False)
        object.__setattr__(self, "params", p)

    @classmethod
    def from_layers(cls, weights: Sequence[np.ndarray], biases: Sequence[np.ndarray],
                    clip: float | None = None) -> "Network":
        weights = [np.atleast_2d(np.asarray(w, dtype=float)) for w in weights]
        widths = [weights[0].shape[1]] + [w.shape[0] for w in weights]
        arch = Architecture(tuple(widths))
        chunks = []
        for w, b in zip(weights, biases):
            chunks += [w.ravel(), np.asarray(b, dtype=float).ravel()]
        return cls(arch, np.concatenate(chunks), clip)

    def layers(self) -> list[tuple[np.ndarray, np.ndarray]]:
        """``[(W_k, v_k), ...]`` as read-only views into ``params``."""
        return _split(self.arch, self.params)

    @property
    def weights(self) -> list[np.ndarray]:
        return [w for w, _ in self.layers()]

    @property
    def biases(self) -> list[np.ndarray]:
        return [b for _, b in self.layers()]

    def with_params(self, params: np.ndarray) -> "Network":
        return Network(self.arch, params, self.clip)

    def __call__(self, x) -> np.ndarray | float:
        return forward(self, x)


def _split(arch: Architecture, params: np.ndarray):
    out, pos = [], 0
    for o, i in arch.shapes:
        w = params[pos:pos + o * i].reshape(o, i)
        pos += o * i
        b = params[pos:pos + o]
        pos += o
        out.append((w, b))
    return out


def xavier_init(arch: Architecture, seed: int, clip: float | None = None) -> Network:
    """Zero biases; weights uniform on +-sqrt(6 / (fan_in + fan_out))."""
    rng = np.random.default_rng(seed)
    chunks = []
    for o, i in arch.shapes:
        bound = math.sqrt(6.0 / (i + o))
        chunks += [rng.uniform(-bound, bound, size=o * i), np.zeros(o)]
    return Network(arch, np.concatenate(chunks), clip)


def _as_batch(net: Network, x) -> tuple[np.ndarray, bool]:
    X = np.asarray(x, dtype=float)
    single = X.ndim == 1
    if single:
        X = X.reshape(1, -1)
    if X.ndim != 2 or X.shape[1] != net.arch.input_dim:
        raise ValueError(f"input has shape {np.shape(x)}, network expects width {net.arch.input_dim}")
    return X, single


def forward_cache(net: Network, X: np.ndarray) -> tuple[np.ndarray, list[np.ndarray]]:
    """Output (before clipping) and the layer inputs ``[X, h_1, ..., h_K]``."""
    layers = net.layers()
    acts = [X]
    h = X
    for w, b in layers[:-1]:
        h = np.maximum(h @ w.T + b, 0.0)
        acts.append(h)
    w, b = layers[-1]
    return (h @ w.T + b)[:, 0], acts


def forward(net: Network, x) -> np.ndarray | float:
    """Evaluate the network on one covariate vector (returns a float) or a batch."""
    X, single = _as_batch(net, x)
    out, _ = forward_cache(net, X)
    if net.clip is not None:
        out = np.clip(out, -net.clip, net.clip)
    return float(out[0]) if single else out


def hidden_activations(net: Network, x) -> list[np.ndarray]:
    X, _ = _as_batch(net, x)
    return forward_cache(net, X)[1][1:]


def backward(net: Network, X, c, cache=None) -> np.ndarray:
    """Gradient of ``sum_j c_j g(x_j)`` with respect to the flat parameter vector.

    ReLU has derivative 0 at exactly 0. Units whose output is strictly outside
    ``[-clip, clip]`` contribute nothing.
    """
    X, _ = _as_batch(net, X)
    c = np.asarray(c, dtype=float).ravel()
    if c.shape[0] != X.shape[0]:
        raise ValueError("one upstream gradient per input row is required")
    out, acts = cache if cache is not None else forward_cache(net, X)
    delta = c.copy()
    if net.clip is not None:
        delta[np.abs(out) > net.clip] = 0.0
    delta = delta[:, None]
    layers = net.layers()
    grads: list[np.ndarray] = []
    for k in range(len(layers) - 1, -1, -1):
        w, _ = layers[k]
        h = acts[k]
        grads.append(delta.sum(axis=0))
        grads.append((delta.T @ h).ravel())
        if k:
            delta = (delta @ w) * (h > 0)
    grads.reverse()
    return np.concatenate(grads)


# -- ADAM ------------------------------------------------------------------------

@dataclass(frozen=True)
class AdamState:
    """Moment accumulators and constants for ADAM; ``t`` counts completed steps."""

    m: np.ndarray
    v: np.ndarray
    t: int = 0
    gamma: float = 1e-3
    r1: float = 0.9
    r2: float = 0.999
    eps0: float = 1e-8

    @classmethod
    def zeros(cls, n: int, gamma: float = 1e-3, r1: float = 0.9, r2: float = 0.999,
              eps0: float = 1e-8) -> "AdamState":
        if not gamma > 0 or not eps0 > 0 or not (0 < r1 < 1 and 0 < r2 < 1):
            raise ValueError("need gamma > 0, eps0 > 0 and decay rates in (0, 1)")
        return cls(np.zeros(n), np.zeros(n), 0, gamma, r1, r2, eps0)


def adam_step(state: AdamState, params: np.ndarray, grads: np.ndarray) -> tuple[np.ndarray, AdamState]:
    """One ADAM update; returns new parameters and state, inputs untouched."""
    g = np.asarray(grads, dtype=float)
    if g.shape != state.m.shape or np.shape(params) != g.shape:
        raise ValueError("parameter, gradient and moment shapes differ")
    t1 = state.t + 1
    m = state.r1 * state.m + (1.0 - state.r1) * g
    v = state.r2 * state.v + (1.0 - state.r2) * g * g
    m_hat = m / (1.0 - state.r1 ** t1)
    v_hat = v / (1.0 - state.r2 ** t1)
    new = params - state.gamma * m_hat / (np.sqrt(v_hat) + state.eps0)
    return new, AdamState(m, v, t1, state.gamma, state.r1, state.r2, state.eps0)


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int = 2000
    patience: int = 20
    val_fraction: float = 0.2
    stop_threshold: float = 1e-6
    seed: int = 0
    clip_D: float | None = None
    learning_rate: float = 1e-3
    r1: float = 0.9
    r2: float = 0.999
    eps0: float = 1e-8

    def __post_init__(self):
        if self.max_epochs < 1 or self.patience < 1:
            raise ValueError("max_epochs and patience must be >= 1")
        if not 0 < self.val_fraction <= 0.5:
            raise ValueError("val_fraction must lie in (0, 0.5]")
        if not self.stop_threshold > 0:
            raise ValueError("stop_threshold must be positive")
        if self.clip_D is not None and not self.clip_D > 0:
            raise ValueError("clip_D must be positive")


@dataclass
class TrainHistory:
    train_loss: list[float] = field(default_factory=list)
    val_loss: list[float] = field(default_factory=list)
    step_norm: list[float] = field(default_factory=list)
    best_epoch: int = 0
    stop_reason: str = ""

    @property
    def epochs(self) -> int:
        return len(self.train_loss)


# provider(net) -> (training loss, gradient of training loss, validation loss or None)
LossProvider = Callable[[Network], "tuple[float, np.ndarray, float | None]"]


def train(net: Network, provider: LossProvider, cfg: TrainConfig) -> tuple[Network, TrainHistory]:
    """Minimise a loss with full-batch ADAM and early stopping.

    Each epoch evaluates the loss and gradient at the current parameters and
    takes one ADAM step. Training stops when the validation loss (training
    loss if the provider returns ``None``) has not improved for
    ``cfg.patience`` epochs, when the step has L2 norm ``<= cfg.stop_threshold``,
    or after ``cfg.max_epochs`` steps. The parameters with the best validation
    loss are returned.
    """
    hist = TrainHistory()
    state = AdamState.zeros(net.arch.n_params, cfg.learning_rate, cfg.r1, cfg.r2, cfg.eps0)
    theta = net.params.copy()
    best_theta, best_val = theta.copy(), math.inf
    since_best = 0

    def evaluate(epoch):
        loss, grad, val = provider(net.with_params(theta))
        val = loss if val is None else val
        if not (math.isfinite(loss) and math.isfinite(val) and np.all(np.isfinite(grad))):
            raise TrainingError(f"non-finite loss or gradient at epoch {epoch}", epoch)
        return loss, grad, val

    for epoch in range(1, cfg.max_epochs + 1):
        loss, grad, val = evaluate(epoch)
        hist.train_loss.append(float(loss))
        hist.val_loss.append(float(val))
        if val < best_val:
            best_val, best_theta, since_best = val, theta.copy(), 0
            hist.best_epoch = epoch
        else:
            since_best += 1
            if since_best >= cfg.patience:
                hist.stop_reason = "patience"
                break
        new_theta, state = adam_step(state, theta, grad)
        step = float(np.linalg.norm(new_theta - theta))
        hist.step_norm.append(step)
        theta = new_theta
        if step <= cfg.stop_threshold:
            hist.stop_reason = "threshold"
            break
    else:
        hist.stop_reason = "max_epochs"

    if hist.stop_reason != "patience":
        # the last step's parameters have not been scored yet
        loss, _, val = provider(net.with_params(theta))
        val = loss if val is None else val
        if math.isfinite(val) and val < best_val:
            best_theta = theta.copy()
            hist.best_epoch = len(hist.train_loss) + 1
    return net.with_params(best_theta), hist


# -- persistence -------------------------------------------------------------------

def save_network(net: Network, path) -> None:
    """Write a JSON document: widths, then each layer's row-major weights and biases."""
    doc = {
        "widths": list(net.arch.widths),
        "clip": net.clip,
        "layers": [{"W": w.ravel().tolist(), "v": b.tolist()} for w, b in net.layers()],
    }
    Path(path).write_text(json.dumps(doc))


def load_network(path) -> Network:
    doc = json.loads(Path(path).read_text())
    arch = Architecture(tuple(doc["widths"]))
    chunks = []
    for layer in doc["layers"]:
        chunks += [np.asarray(layer["W"], dtype=float), np.asarray(layer["v"], dtype=float)]
    return Network(arch, np.concatenate(chunks), doc.get("clip"))
