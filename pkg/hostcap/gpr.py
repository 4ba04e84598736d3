# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Exact Gaussian process regression of the maximum bus voltage over PV penetration.

The kernel is the squared exponential k(x, x') = lambda_sq * exp(-(x - x')^2 / tau_sq). Targets are
centered on their sample mean before fitting and the mean is added back on prediction.
Hyperparameters are optimized in log space, theta = (log lambda_sq, log tau_sq, log noise_var).
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np
import scipy.linalg
from scipy import optimize, special
from scipy.stats import qmc

import probdist
from errors import DomainError, GprFitError

MIN_SAMPLES = 10
MAX_TRAIN = 2000
JITTER_START = 1e-10
JITTER_MAX = 1e-6
VARIANCE_CLAMP = -1e-10


@dataclass(frozen=True)
class GprHyperparams:
    lambda_sq: float
    tau_sq: float
    noise_var: float

    def __post_init__(self) -> None:
        if not (self.lambda_sq > 0 and self.tau_sq > 0 and self.noise_var > 0):
            raise DomainError(f"GPR hyperparameters must be positive, got {self}.")

    def to_theta(self) -> np.ndarray:
        return np.log([self.lambda_sq, self.tau_sq, self.noise_var])

    @staticmethod
    def from_theta(theta: Sequence[float]) -> "GprHyperparams":
        return GprHyperparams(*(float(v) for v in np.exp(theta)))


@dataclass(frozen=True)
class GprPrediction:
    mu: float
    sigma_sq: float


@dataclass(frozen=True)
class FitOptions:
    n_starts: int = 8
    max_train: int = MAX_TRAIN
    seed: int = 0


@dataclass(frozen=True)
class GprModel:
    hyper: GprHyperparams
    train_x: np.ndarray
    train_y: np.ndarray
    center_m: float
    chol_factor: np.ndarray
    alpha_vec: np.ndarray
    jitter: float = 0.0

    def mean_and_std(self, xs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        mu, var = predict_many(self, xs)
        return mu, np.sqrt(var)


def kernel_eval(xi: float, xj: float, hyper: GprHyperparams) -> float:
    return hyper.lambda_sq * math.exp(-(xi - xj) ** 2 / hyper.tau_sq)


def _sq_dist(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.subtract.outer(np.asarray(a, dtype=float), np.asarray(b, dtype=float)) ** 2


def _stable_cholesky(k: np.ndarray) -> Tuple[np.ndarray, float]:
    """
    Cholesky factor of k, adding diagonal jitter from 1e-10 up to 1e-6 when the plain factorization fails.
    @return: Returns (lower factor, jitter used). Raises GprFitError if all attempts fail.
    """
    jitter = 0.0
    while True:
        try:
            kj = k + jitter * np.eye(len(k)) if jitter else k
            return scipy.linalg.cholesky(kj, lower=True), jitter
        except (scipy.linalg.LinAlgError, ValueError):
            jitter = JITTER_START if jitter == 0.0 else jitter * 10
            if jitter > JITTER_MAX * (1 + 1e-9):
                raise GprFitError("Cholesky factorization failed even with jitter 1e-6.")


def build_gpr_model(x: Sequence[float], v: Sequence[float], hyper: GprHyperparams) -> GprModel:
    """
    Assemble a GPR model for fixed hyperparameters.
    @param x: Training inputs (penetration levels).
    @param v: Training targets (maximum voltages, original scale).
    @param hyper: Kernel and noise hyperparameters.
    @return: Returns the model with cached Cholesky factor and alpha vector.
    """
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    if x.shape != v.shape or x.ndim != 1:
        raise GprFitError("Training inputs and targets must be 1-D arrays of equal length.")
    center_m = float(np.mean(v))
    return _assemble(x, v - center_m, center_m, hyper)


def _assemble(x: np.ndarray, y: np.ndarray, center_m: float, hyper: GprHyperparams) -> GprModel:
    k = hyper.lambda_sq * np.exp(-_sq_dist(x, x) / hyper.tau_sq) + hyper.noise_var * np.eye(len(x))
    chol, jitter = _stable_cholesky(k)
    alpha = scipy.linalg.cho_solve((chol, True), y)
    return GprModel(hyper, x, y, center_m, chol, alpha, jitter)


def log_marginal_likelihood(theta: np.ndarray, x: np.ndarray, y: np.ndarray) -> Tuple[float, np.ndarray]:
    """
    Log marginal likelihood of centered targets y and its gradient w.r.t. the log hyperparameters.
    @return: Returns (value, gradient).
    """
    lambda_sq, tau_sq, noise_var = np.exp(theta)
    n = len(x)
    d2 = _sq_dist(x, x)
    k_f = lambda_sq * np.exp(-d2 / tau_sq)
    chol, _ = _stable_cholesky(k_f + noise_var * np.eye(n))
    alpha = scipy.linalg.cho_solve((chol, True), y)

    value = -0.5 * float(y @ alpha) - float(np.sum(np.log(np.diag(chol)))) - 0.5 * n * math.log(2 * math.pi)

    inner = np.outer(alpha, alpha) - scipy.linalg.cho_solve((chol, True), np.eye(n))
    grad = np.array([
        0.5 * np.sum(inner * k_f),
        0.5 * np.sum(inner * k_f * d2 / tau_sq),
        0.5 * noise_var * np.trace(inner),
    ])
    return value, grad


def _theta_box(y: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Optimization bounds and multi-start box for theta, relative to the target variance.
    """
    scale = float(np.var(y))
    if not scale > 0:
        scale = 1.0
    ls = math.log(scale)
    bounds_lo = np.array([ls - 4 * math.log(10), math.log(1e-4), ls - 6 * math.log(10)])
    bounds_hi = np.array([ls + 2 * math.log(10), math.log(1e2), ls + math.log(10)])
    start_lo = np.array([ls - math.log(10), math.log(1e-3), ls - 5 * math.log(10)])
    start_hi = np.array([ls + math.log(10), math.log(1.0), ls + math.log(0.5)])
    return bounds_lo, bounds_hi, start_lo, start_hi


def fit_gpr(samples: Sequence, opts: FitOptions = FitOptions()) -> GprModel:
    """
    Fit a GPR model by maximizing the log marginal likelihood. Starting points come from a Latin hypercube
    in log-parameter space; each start is refined by L-BFGS-B with the analytic gradient.
    @param samples: Training records with attributes x and v_max.
    @param opts: Fit options.
    @return: Returns the fitted model.
    """
    l = logging.getLogger("GPR")
    x = np.array([s.x for s in samples], dtype=float)
    v = np.array([s.v_max for s in samples], dtype=float)

    if len(x) < MIN_SAMPLES:
        raise GprFitError(f"GPR needs at least {MIN_SAMPLES} samples, got {len(x)}.")
    if len(x) > opts.max_train:
        raise GprFitError(f"GPR training set of {len(x)} samples exceeds the limit of {opts.max_train}.")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(v))):
        raise GprFitError("GPR training data contains non-finite values.")
    if np.ptp(x) == 0:
        raise GprFitError("GPR training inputs are all identical.")

    y = v - np.mean(v)
    bounds_lo, bounds_hi, start_lo, start_hi = _theta_box(y)
    sampler = qmc.LatinHypercube(d=3, seed=probdist.make_rng(opts.seed))
    starts = qmc.scale(sampler.random(opts.n_starts), start_lo, start_hi)

    def objective(theta: np.ndarray) -> Tuple[float, np.ndarray]:
        value, grad = log_marginal_likelihood(theta, x, y)
        return -value, -grad

    best = None
    for i, theta0 in enumerate(starts):
        try:
            res = optimize.minimize(objective, theta0, jac=True, method="L-BFGS-B",
                                    bounds=list(zip(bounds_lo, bounds_hi)),
                                    options={"maxiter": 500, "ftol": 1e-15, "gtol": 1e-8})
        except GprFitError as e:
            l.debug(f"[start {i}] {e}")
            continue
        l.debug(f"[start {i}] log marginal likelihood {-res.fun:.6f} at {np.exp(res.x)}")
        if best is None or res.fun < best.fun:
            best = res

    if best is None:
        raise GprFitError("Hyperparameter optimization failed from every starting point.")

    grad_norm = float(np.linalg.norm(best.jac))
    if grad_norm > 1e-5:
        on_bound = np.isclose(best.x, bounds_lo) | np.isclose(best.x, bounds_hi)
        l.warning(f"GPR optimum has gradient norm {grad_norm:.2e} (parameters on bound: {on_bound.tolist()}).")

    hyper = GprHyperparams.from_theta(best.x)
    l.info(f"Fitted GPR on {len(x)} samples: lambda_sq={hyper.lambda_sq:.4e}, tau_sq={hyper.tau_sq:.4e}, "
           f"noise_var={hyper.noise_var:.4e}, log marginal likelihood {-best.fun:.4f}.")
    return build_gpr_model(x, v, hyper)


def predict_many(model: GprModel, xs: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Predictive mean and variance (including observation noise) at many points.
    @return: Returns (mu, sigma_sq) arrays in original scale.
    """
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    hyper = model.hyper
    k_star = hyper.lambda_sq * np.exp(-_sq_dist(model.train_x, xs) / hyper.tau_sq)
    mu = k_star.T @ model.alpha_vec + model.center_m
    w = scipy.linalg.solve_triangular(model.chol_factor, k_star, lower=True)
    latent = hyper.lambda_sq - np.sum(w * w, axis=0)
    if np.any(latent < VARIANCE_CLAMP):
        raise GprFitError(f"Negative posterior variance {float(np.min(latent)):.3e}; the model is ill-conditioned.")
    return mu, np.maximum(latent, 0.0) + hyper.noise_var


def predict(model: GprModel, x_star: float) -> GprPrediction:
    mu, var = predict_many(model, [x_star])
    return GprPrediction(float(mu[0]), float(var[0]))


def prediction_interval(model: GprModel, x_star: float, alpha: float) -> Tuple[float, float]:
    """
    Two-sided prediction interval mu -/+ z * sigma with z = Phi^-1(1 - alpha / 2).
    @param alpha: Miscoverage level in (0, 1).
    @return: Returns (lower, upper) in p.u.
    """
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}.")
    p = predict(model, x_star)
    half = probdist.normal_inv_cdf(1 - alpha / 2) * math.sqrt(p.sigma_sq)
    return p.mu - half, p.mu + half


def risk_many(model: GprModel, xs: Sequence[float], v_limit: float) -> np.ndarray:
    """
    Probability that the maximum voltage exceeds v_limit at each x. Points with zero predictive standard
    deviation get a hard 0/1 indicator.
    """
    mu, sd = model.mean_and_std(xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        risk = np.where(sd > 0, special.ndtr((mu - v_limit) / sd), (mu > v_limit).astype(float))
    return risk


def gp_risk_index(model: GprModel, x_star: float, v_limit: float) -> float:
    """
    Risk index 1 - Phi((v_limit - mu) / sigma).
    @param v_limit: Voltage limit in p.u., positive.
    @return: Returns the violation probability in [0, 1].
    """
    if not v_limit > 0:
        raise DomainError(f"Voltage limit must be positive, got {v_limit}.")
    p = predict(model, x_star)
    if p.sigma_sq == 0:
        logging.getLogger("GPR").info(f"Zero predictive variance at x={x_star}, risk reduces to an indicator.")
        return 1.0 if p.mu > v_limit else 0.0
    return probdist.normal_cdf((p.mu - v_limit) / math.sqrt(p.sigma_sq))


def regression_metrics(y_true: Sequence[float], y_pred: Sequence[float]) -> Dict[str, float]:
    """
    Mean absolute error, root mean squared error and coefficient of determination.
    """
    y_true = np.asarray(y_true, dtype=float)
    err = np.asarray(y_pred, dtype=float) - y_true
    ss_res = float(np.sum(err ** 2))
    ss_tot = float(np.sum((y_true - np.mean(y_true)) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res == 0 else 0.0
    return {
        "mae": float(np.mean(np.abs(err))),
        "rmse": float(math.sqrt(np.mean(err ** 2))),
        "r2": r2,
    }


def gpr_to_dict(model: GprModel) -> dict:
    return {
        "kernel": "squared_exponential",
        "lambda_sq": model.hyper.lambda_sq,
        "tau_sq": model.hyper.tau_sq,
        "noise_var": model.hyper.noise_var,
        "center_m": model.center_m,
        "jitter": model.jitter,
        "train_x": [float(v) for v in model.train_x],
        "train_y": [float(v) for v in model.train_y],
    }


def gpr_from_dict(doc: dict) -> GprModel:
    """
    Rebuild a model from its JSON form. The stored targets are already centered, so the rebuilt model
    predicts bit-identically to the saved one.
    @return: Returns the model. Raises GprFitError if the document is malformed.
    """
    try:
        hyper = GprHyperparams(float(doc["lambda_sq"]), float(doc["tau_sq"]), float(doc["noise_var"]))
        x = np.asarray(doc["train_x"], dtype=float)
        y = np.asarray(doc["train_y"], dtype=float)
        center_m = float(doc["center_m"])
    except (KeyError, TypeError, ValueError) as e:
        raise GprFitError(f"Malformed GPR model: {e}") from e
    if x.shape != y.shape or x.ndim != 1 or len(x) == 0:
        raise GprFitError("Malformed GPR model: training arrays differ in length.")
    return _assemble(x, y, center_m, hyper)
