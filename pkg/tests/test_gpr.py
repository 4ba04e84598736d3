import json
import math

import numpy as np
import pytest

import gpr
from errors import DomainError, GprFitError
from gpr import FitOptions, GprHyperparams
from probdist import make_rng
from scenarios import SampleRecord

HYPER = GprHyperparams(0.01, 0.1, 1e-4)


def records(x, v):
    return [SampleRecord(i, 0, "none", float(a), float(b)) for i, (a, b) in enumerate(zip(x, v))]


@pytest.fixture(scope="module")
def linear_data():
    rng = make_rng(17)
    x = rng.uniform(0.0, 1.0, 60)
    v = 1.0 + 0.05 * x + rng.normal(0.0, 1e-3, 60)
    return x, v


@pytest.fixture(scope="module")
def fixed_model(linear_data):
    x, v = linear_data
    return gpr.build_gpr_model(x, v, HYPER)


def test_hyperparams_positive():
    with pytest.raises(DomainError):
        GprHyperparams(0.0, 0.1, 1e-4)
    with pytest.raises(DomainError):
        GprHyperparams(0.01, -0.1, 1e-4)
    with pytest.raises(DomainError):
        GprHyperparams(0.01, 0.1, 0.0)


def test_theta_round_trip():
    back = GprHyperparams.from_theta(HYPER.to_theta())
    assert back.lambda_sq == pytest.approx(HYPER.lambda_sq, rel=1e-12)
    assert back.tau_sq == pytest.approx(HYPER.tau_sq, rel=1e-12)
    assert back.noise_var == pytest.approx(HYPER.noise_var, rel=1e-12)


def test_kernel_eval():
    assert gpr.kernel_eval(0.3, 0.3, HYPER) == HYPER.lambda_sq
    assert gpr.kernel_eval(0.0, 0.1, HYPER) == pytest.approx(0.01 * math.exp(-0.1))


def test_build_rejects_shape_mismatch():
    with pytest.raises(GprFitError):
        gpr.build_gpr_model([0.1, 0.2], [1.0], HYPER)


def test_prediction_interval_width(fixed_model):
    p = gpr.predict(fixed_model, 0.42)
    lo, hi = gpr.prediction_interval(fixed_model, 0.42, 0.05)
    assert (hi - lo) / 2 == pytest.approx(1.959964 * math.sqrt(p.sigma_sq), rel=1e-5)
    assert (lo + hi) / 2 == pytest.approx(p.mu, abs=1e-12)
    for alpha in (0.0, 1.0, -0.5):
        with pytest.raises(DomainError):
            gpr.prediction_interval(fixed_model, 0.42, alpha)


def test_risk_index_at_quantile(fixed_model):
    p = gpr.predict(fixed_model, 0.7)
    v_limit = p.mu + 1.959964 * math.sqrt(p.sigma_sq)
    assert gpr.gp_risk_index(fixed_model, 0.7, v_limit) == pytest.approx(0.025, abs=1e-6)
    assert gpr.gp_risk_index(fixed_model, 0.7, p.mu) == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(DomainError):
        gpr.gp_risk_index(fixed_model, 0.7, 0.0)


def test_risk_many_matches_scalar(fixed_model):
    xs = np.linspace(0.0, 1.0, 11)
    many = gpr.risk_many(fixed_model, xs, 1.03)
    single = [gpr.gp_risk_index(fixed_model, x, 1.03) for x in xs]
    assert np.allclose(many, single, rtol=0, atol=1e-12)
    assert many[-1] > many[0]


def test_variance_includes_noise(fixed_model):
    _, var = gpr.predict_many(fixed_model, np.linspace(-0.5, 1.5, 41))
    assert np.all(var >= HYPER.noise_var)
    _, var_far = gpr.predict_many(fixed_model, [50.0])
    assert var_far[0] == pytest.approx(HYPER.lambda_sq + HYPER.noise_var)


def test_far_prediction_reverts_to_center(fixed_model):
    mu, _ = gpr.predict_many(fixed_model, [50.0])
    assert mu[0] == pytest.approx(fixed_model.center_m, abs=1e-12)


def test_log_marginal_likelihood_gradient(linear_data):
    x, v = linear_data
    y = v - np.mean(v)
    theta = HYPER.to_theta()
    _, grad = gpr.log_marginal_likelihood(theta, x, y)
    h = 1e-6
    for k in range(3):
        step = np.zeros(3)
        step[k] = h
        numeric = (gpr.log_marginal_likelihood(theta + step, x, y)[0]
                   - gpr.log_marginal_likelihood(theta - step, x, y)[0]) / (2 * h)
        assert grad[k] == pytest.approx(numeric, rel=1e-4, abs=1e-4)


def test_fit_linear_trend(linear_data):
    x, v = linear_data
    model = gpr.fit_gpr(records(x, v), FitOptions(n_starts=4, seed=1))
    grid = np.linspace(0.05, 0.95, 19)
    mu, _ = gpr.predict_many(model, grid)
    metrics = gpr.regression_metrics(1.0 + 0.05 * grid, mu)
    assert metrics["r2"] > 0.99
    assert model.hyper.noise_var < 1e-4


def test_fit_deterministic(linear_data):
    x, v = linear_data
    a = gpr.fit_gpr(records(x, v), FitOptions(n_starts=3, seed=5))
    b = gpr.fit_gpr(records(x, v), FitOptions(n_starts=3, seed=5))
    assert a.hyper == b.hyper


@pytest.mark.parametrize("x, v, match", [
    (np.linspace(0, 1, 9), np.ones(9), "at least"),
    (np.r_[np.linspace(0, 1, 11), np.nan], np.ones(12), "non-finite"),
    (np.full(20, 0.3), np.linspace(1.0, 1.05, 20), "identical"),
])
def test_fit_rejects_bad_data(x, v, match):
    with pytest.raises(GprFitError, match=match):
        gpr.fit_gpr(records(x, v))


def test_fit_respects_max_train():
    x = np.linspace(0, 1, 30)
    with pytest.raises(GprFitError, match="exceeds"):
        gpr.fit_gpr(records(x, 1.0 + x / 10), FitOptions(max_train=20))


def test_dict_round_trip(fixed_model):
    doc = json.loads(json.dumps(gpr.gpr_to_dict(fixed_model)))
    back = gpr.gpr_from_dict(doc)
    xs = np.linspace(0, 1, 25)
    mu_a, var_a = gpr.predict_many(fixed_model, xs)
    mu_b, var_b = gpr.predict_many(back, xs)
    assert np.array_equal(mu_a, mu_b)
    assert np.array_equal(var_a, var_b)


def test_malformed_dict(fixed_model):
    doc = gpr.gpr_to_dict(fixed_model)
    del doc["tau_sq"]
    with pytest.raises(GprFitError):
        gpr.gpr_from_dict(doc)
    doc = gpr.gpr_to_dict(fixed_model)
    doc["train_y"] = doc["train_y"][:-1]
    with pytest.raises(GprFitError):
        gpr.gpr_from_dict(doc)


def test_regression_metrics():
    m = gpr.regression_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    assert m["mae"] == pytest.approx(1 / 3)
    assert m["rmse"] == pytest.approx(math.sqrt(1 / 3))
    assert m["r2"] == pytest.approx(0.5)
    assert gpr.regression_metrics([2.0, 2.0], [2.0, 2.0])["r2"] == 1.0


def test_interpolates_without_noise():
    x = np.linspace(0.0, 1.0, 10)
    v = 1.0 + 0.04 * np.sin(3 * x)
    model = gpr.build_gpr_model(x, v, GprHyperparams(0.01, 0.01, 1e-12))
    assert model.jitter == 0.0
    mu, _ = gpr.predict_many(model, x)
    assert np.allclose(mu, v, rtol=0, atol=1e-4)


def test_recovers_hyperparameters():
    truth = GprHyperparams(1.0, 0.04, 1e-4)
    rng = make_rng(2024)
    x = np.sort(rng.uniform(0.0, 1.0, 200))
    k = truth.lambda_sq * np.exp(-np.subtract.outer(x, x) ** 2 / truth.tau_sq) + truth.noise_var * np.eye(200)
    y = np.linalg.cholesky(k) @ rng.standard_normal(200)
    model = gpr.fit_gpr(records(x, 1.0 + y), FitOptions(n_starts=8, seed=3))
    error = model.hyper.to_theta() - truth.to_theta()
    assert np.all(np.abs(error) < 0.5)
