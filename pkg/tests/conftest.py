import numpy as np
import pytest

from deepdr.data import CovariateMatrix, NonprobSample, ProbSample

# acceptance results, printed at the end of the run
ACCEPTANCE: list[tuple[str, bool, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in ACCEPTANCE:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")


def make_samples(rng, n_a=30, n_b=40, r=2, shift=0.5, d_range=(2.0, 4.0), names=None):
    names = names or tuple(f"x{i + 1}" for i in range(r))
    xa = rng.normal(shift, 1.0, size=(n_a, r))
    xb = rng.normal(0.0, 1.0, size=(n_b, r))
    ya = 1.0 + xa.sum(axis=1) + rng.normal(size=n_a)
    d = rng.uniform(*d_range, size=n_b)
    return (NonprobSample(CovariateMatrix(xa, names), ya),
            ProbSample(CovariateMatrix(xb, names), d))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_pair(rng):
    return make_samples(rng)


def central_diff(f, theta, h=1e-5):
    theta = np.asarray(theta, dtype=float)
    out = np.empty_like(theta)
    for i in range(theta.size):
        up, dn = theta.copy(), theta.copy()
        up[i] += h
        dn[i] -= h
        out[i] = (f(up) - f(dn)) / (2 * h)
    return out


def grad_rel_error(analytic, numeric, floor=1e-8):
    """Elementwise relative error; entries below ``floor`` in magnitude are compared absolutely."""
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    diff = np.abs(analytic - numeric)
    return np.where(scale >= floor, diff / np.where(scale > 0, scale, 1.0), diff)
