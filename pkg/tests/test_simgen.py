import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deepdr import simgen
from deepdr.errors import ConfigError, DomainError
from deepdr.scores import sigmoid

CFG = simgen.SimConfig(N=20000, n_A=500, n_B=1000)


@pytest.fixture(scope="module")
def draws():
    return simgen.PopulationDraws.draw(CFG.N, CFG.n_A, 42)


def test_noiseless_population_is_perfectly_correlated():
    pop = simgen.gen_population(CFG, seed=1, sigma=0.0)
    r = np.corrcoef(pop.y, 2 + pop.x.values.sum(axis=1))[0, 1]
    assert r == pytest.approx(1.0, abs=1e-12)


def test_chi_square_column_mean(draws):
    z4 = draws.z[:, 3]
    assert abs(z4.mean() - 4.0) < 3 * math.sqrt(8.0) / math.sqrt(CFG.N)


@pytest.mark.parametrize("rho", [0.3, 0.5, 0.8])
def test_population_hits_target_correlation(draws, rho):
    pop = draws.population(rho)
    r = np.corrcoef(pop.y, simgen.linear_predictor(pop.x.values))[0, 1]
    assert abs(r - rho) < 0.02


def test_covariate_recursion(draws):
    x1, x2, x3, x4 = draws.x.T
    np.testing.assert_array_equal(x1, draws.z[:, 0])
    np.testing.assert_allclose(x2 - 0.3 * x1, draws.z[:, 1], rtol=0, atol=1e-15)
    # reconstruction is exact up to a few ulps of the stored covariate
    assert np.all(np.abs(x3 - 0.2 * (x1 + x2) - draws.z[:, 2]) <= 4 * np.spacing(x3))
    assert np.all(np.abs(x4 - 0.1 * (x1 + x2 + x3) - draws.z[:, 3]) <= 4 * np.spacing(x4))


def test_population_deterministic():
    p1 = simgen.gen_population(CFG.with_(N=3000, n_A=100), seed=8)
    p2 = simgen.gen_population(CFG.with_(N=3000, n_A=100), seed=8)
    assert p1.x.values.tobytes() == p2.x.values.tobytes()
    assert p1.y.tobytes() == p2.y.tobytes()
    assert p1.pi_a.tobytes() == p2.pi_a.tobytes()


def test_selection_probabilities_sum_to_n_a(draws):
    assert abs(draws.pi_a.sum() - CFG.n_A) <= 1e-6 * CFG.n_A
    assert draws.pi_a.mean() * CFG.N == pytest.approx(CFG.n_A, abs=1e-6 * CFG.n_A)


# -- sigma --------------------------------------------------------------------------------

def test_calibrate_sigma_values():
    assert simgen.calibrate_sigma([-1.0, 1.0], 0.5) == pytest.approx(math.sqrt(3), rel=1e-15)
    assert simgen.calibrate_sigma([-2.0, 2.0], 0.8) == pytest.approx(1.5, rel=1e-14)


def test_calibrate_sigma_decreasing_to_zero():
    rhos = [0.1, 0.3, 0.5, 0.8, 0.99, 0.999999]
    sig = [simgen.calibrate_sigma([0.0, 1.0, 3.0], r) for r in rhos]
    assert all(s1 > s2 for s1, s2 in zip(sig, sig[1:]))
    assert sig[-1] < 1e-2


def test_calibrate_sigma_errors():
    with pytest.raises(DomainError):
        simgen.calibrate_sigma([2.0, 2.0], 0.5)
    with pytest.raises(DomainError):
        simgen.calibrate_sigma([0.0, 1.0], 1.0)


# -- selection logits ---------------------------------------------------------------------

def logit_oracle(row):
    mpmath.mp.dps = 40
    x1, x2, x3, x4 = (mpmath.mpf(float(v)) for v in row)
    return float(mpmath.mpf("0.05") * x1 * x2 + mpmath.mpf("0.1") * x2 ** 2 + mpmath.mpf("0.05") * x3 * x4
                 + mpmath.mpf("0.08") * mpmath.sin(mpmath.mpf("0.3") * x3)
                 + mpmath.mpf("0.05") * mpmath.log(1 + x2 + x4))


def test_selection_logits_vanish_at_origin():
    assert simgen.selection_logits(np.zeros((1, 4)))[0] == 0.0


def test_selection_logits_at_ones():
    assert simgen.selection_logits(np.ones((1, 4)))[0] == pytest.approx(0.27857223096631265, rel=1e-14)


def test_selection_logits_term_by_term(draws):
    rows = draws.x[:10]
    expected = [logit_oracle(r) for r in rows]
    np.testing.assert_allclose(simgen.selection_logits(rows), expected, rtol=1e-13)


def test_selection_logits_needs_four_columns():
    with pytest.raises(DomainError):
        simgen.selection_logits(np.ones((2, 3)))


# -- theta0 -------------------------------------------------------------------------------

def test_theta0_symmetric():
    assert simgen.calibrate_theta0(np.zeros(1000), 500) == pytest.approx(0.0, abs=1e-6)


def test_theta0_quarter():
    t = simgen.calibrate_theta0(np.zeros(1000), 250)
    assert t == pytest.approx(math.log(1 / 3), abs=2e-6)
    assert abs(np.sum(sigmoid(t + np.zeros(1000))) - 250) <= 1e-6 * 250


def test_theta0_study_config(draws):
    logits = simgen.selection_logits(draws.x)
    t = simgen.calibrate_theta0(logits, 500)
    assert abs(np.sum(sigmoid(t + logits)) - 500) <= 1e-6 * 500


@settings(max_examples=50, deadline=None)
@given(st.floats(-30, 30), st.floats(1e-3, 10))
def test_theta0_objective_increasing(t, delta):
    logits = np.linspace(-3, 3, 50)
    h = lambda s: np.sum(sigmoid(s + logits))
    assert h(t + delta) > h(t) or h(t) == 50.0


def test_theta0_bad_target():
    with pytest.raises(DomainError):
        simgen.calibrate_theta0(np.zeros(10), 10)


# -- sampling -----------------------------------------------------------------------------

def test_poisson_all_ones():
    idx, retries = simgen.poisson_indices(np.ones(50), np.random.default_rng(0))
    np.testing.assert_array_equal(idx, np.arange(50))
    assert retries == 0


def test_poisson_half_concentration():
    idx, _ = simgen.poisson_indices(np.full(20000, 0.5), np.random.default_rng(1))
    assert abs(idx.size - 10000) < 4 * math.sqrt(20000 * 0.25)


def test_poisson_redraws_empty_samples():
    idx, retries = simgen.poisson_indices(np.full(3, 0.05), np.random.default_rng(2))
    assert idx.size >= 2 and retries > 0


def test_sample_a_deterministic(draws):
    pop = draws.population(0.5)
    a1 = simgen.draw_sample_A(pop, 11)
    a2 = simgen.draw_sample_A(pop, 11)
    assert a1.y.tobytes() == a2.y.tobytes()
    assert abs(a1.n - 500) < 5 * math.sqrt(500)


def test_sample_b_census():
    pop = simgen.gen_population(CFG.with_(N=400, n_A=40, n_B=400), seed=3)
    b = simgen.draw_sample_B(pop, 400, seed=0)
    np.testing.assert_array_equal(b.d, 1.0)
    np.testing.assert_array_equal(b.x.values, pop.x.values)


def test_sample_b_weights_sum_to_n(draws):
    pop = draws.population(0.5)
    b = simgen.draw_sample_B(pop, 1000, seed=5)
    assert b.d.sum() == pytest.approx(CFG.N, rel=1e-15)
    assert b.n == 1000


def test_sample_b_design_unbiased(draws):
    pop = draws.population(0.5)
    x2 = pop.x.values[:, 1]
    n, N = 1000, CFG.N
    design_sd = math.sqrt((1 - n / N) * np.var(x2, ddof=1) / n)
    est = [np.sum(b.d * b.x.values[:, 1]) / N for b in (simgen.draw_sample_B(pop, n, s) for s in range(100))]
    assert abs(np.mean(est) - x2.mean()) < 4 * design_sd / math.sqrt(100)


# -- scenarios & config -------------------------------------------------------------------

def test_misspecify():
    tf, ff = simgen.misspecify("TF"), simgen.misspecify("ff")
    assert len(tf.outcome_features) == 4
    assert ff.outcome_features == ("x1", "x2", "x3")
    assert tf.propensity_features == ff.propensity_features == simgen.COVARIATES
    with pytest.raises(ConfigError):
        simgen.misspecify("XX")


def test_sim_config_validation():
    with pytest.raises(ConfigError):
        simgen.SimConfig(N=100, n_A=100)
    with pytest.raises(ConfigError):
        simgen.SimConfig(rho=1.0)
    with pytest.raises(ConfigError):
        simgen.SimConfig(B=0)


def test_replication_seeds_depend_only_on_index():
    a = simgen.replication_seeds(7, 3)
    b = simgen.replication_seeds(7, 3)
    c = simgen.replication_seeds(7, 4)
    state = lambda s: s["dnn"].generate_state(4).tolist()
    assert state(a) == state(b) != state(c)
    fixed = [simgen.replication_seeds(7, k, fixed_population=True)["population"].generate_state(2).tolist()
             for k in (0, 1)]
    assert fixed[0] == fixed[1]
