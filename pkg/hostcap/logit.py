# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
import logging
import math
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy import special

from errors import LogitFitError

DEFAULT_V_LIMIT = 1.05
MIN_SAMPLES = 10
RIDGE = 1e-6


@dataclass(frozen=True)
class LabeledSample:
    x: float
    violated: int


@dataclass(frozen=True)
class LogitModel:
    b0: float
    b1: float
    degenerate: bool = False
    iterations: int = 0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.b0) and math.isfinite(self.b1)):
            raise LogitFitError(f"Logit coefficients must be finite, got ({self.b0}, {self.b1}).")


def label_violations(samples: Sequence, v_limit: float = DEFAULT_V_LIMIT) -> List[LabeledSample]:
    """
    Label each sample 1 if its maximum voltage strictly exceeds v_limit, 0 otherwise.
    """
    return [LabeledSample(s.x, 1 if s.v_max > v_limit else 0) for s in samples]


def _penalized_log_likelihood(b: np.ndarray, design: np.ndarray, y: np.ndarray, ridge: float) -> float:
    eta = design @ b
    return float(np.sum(y * eta - np.logaddexp(0.0, eta)) - 0.5 * ridge * (b @ b))


def fit_logit(data: Sequence[LabeledSample], ridge: float = RIDGE, tolerance: float = 1e-8,
              max_iterations: int = 200) -> LogitModel:
    """
    Fit P(violated | x) = 1 / (1 + exp(-b0 - b1 x)) by Newton iterations (iteratively reweighted least squares)
    on the ridge-penalized Bernoulli log-likelihood, halving the step until the objective increases.
    @param data: Labeled samples.
    @param ridge: L2 penalty on (b0, b1).
    @param tolerance: Stop when the largest parameter change is below this value.
    @param max_iterations: Newton iteration limit.
    @return: Returns the fitted model. Single-class labels give a finite model flagged as degenerate.
    """
    l = logging.getLogger("Logit")
    if len(data) < MIN_SAMPLES:
        raise LogitFitError(f"Logistic regression needs at least {MIN_SAMPLES} samples, got {len(data)}.")

    x = np.array([d.x for d in data], dtype=float)
    y = np.array([d.violated for d in data], dtype=float)
    design = np.column_stack([np.ones_like(x), x])

    degenerate = bool(np.all(y == y[0]))
    if degenerate:
        l.warning(f"All {len(y)} labels are {int(y[0])}; the fit is determined by the ridge penalty only.")

    b = np.zeros(2)
    objective = _penalized_log_likelihood(b, design, y, ridge)
    for iteration in range(1, max_iterations + 1):
        p = special.expit(design @ b)
        grad = design.T @ (y - p) - ridge * b
        hess = design.T @ (design * (p * (1 - p))[:, None]) + ridge * np.eye(2)
        step = np.linalg.solve(hess, grad)

        t = 1.0
        while True:
            candidate = b + t * step
            cand_obj = _penalized_log_likelihood(candidate, design, y, ridge)
            if cand_obj >= objective or t < 1e-10:
                break
            t *= 0.5

        b, objective = candidate, cand_obj
        if np.max(np.abs(t * step)) < tolerance:
            l.info(f"Fitted logit model b0={b[0]:.6f}, b1={b[1]:.6f} in {iteration} iterations.")
            return LogitModel(float(b[0]), float(b[1]), degenerate, iteration)

    raise LogitFitError(f"Logistic regression did not converge within {max_iterations} iterations.")


def logit_violation_prob(model: LogitModel, x_star: float) -> float:
    return float(special.expit(model.b0 + model.b1 * x_star))


def classification_accuracy(labels: Sequence[int], probs: Sequence[float], threshold: float = 0.5) -> float:
    """
    Share of samples whose thresholded probability (violation if prob > threshold) matches the label.
    """
    labels = np.asarray(labels)
    if len(labels) == 0:
        return 0.0
    predicted = (np.asarray(probs, dtype=float) > threshold).astype(int)
    return float(np.mean(predicted == labels))


def logit_to_dict(model: LogitModel) -> dict:
    return {"b0": model.b0, "b1": model.b1, "degenerate": model.degenerate, "iterations": model.iterations}


def logit_from_dict(doc: dict) -> LogitModel:
    try:
        return LogitModel(float(doc["b0"]), float(doc["b1"]), bool(doc.get("degenerate", False)),
                          int(doc.get("iterations", 0)))
    except (KeyError, TypeError, ValueError) as e:
        raise LogitFitError(f"Malformed logit model: {e}") from e
