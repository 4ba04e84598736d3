# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Hosting capacity solvers on top of the learned voltage models, and risk-curve generation.

GP-based solvers search a uniform grid over [0, 1] and return the largest feasible penetration. They accept
any object with a mean_and_std(xs) method.
"""
import csv
import io
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import special

import gpr
import helper
import probdist
from errors import SolveError
from logit import LogitModel

GP_MEAN = "gp_mean"
GP_BOUNDS = "gp_bounds"
GP_CC = "gp_cc"
LOGIT_CC = "logit_cc"
METHODS = (GP_MEAN, GP_BOUNDS, GP_CC, LOGIT_CC)

DEFAULT_V_LIMIT = 1.05
DEFAULT_GRID_POINTS = 2001
RISK_CURVE_POINTS = 101
RISK_CURVE_HEADER = ["x", "gp_risk", "logit_risk"]
SWEEP_HEADER = ["load_scale", "peak_load_mw", "method", "bound", "hc", "hc_mw"]

UNCONSTRAINED = "unconstrained"
INFEASIBLE = "infeasible"
NON_CONTIGUOUS = "non-contiguous"
GRID_FALLBACK = "grid-fallback"


class MeanStdPredictor(Protocol):
    def mean_and_std(self, xs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        ...


@dataclass(frozen=True)
class HcQuery:
    method: str
    beta: Optional[float] = None
    alpha: Optional[float] = None
    v_limit: float = DEFAULT_V_LIMIT
    grid_points: int = DEFAULT_GRID_POINTS

    def problems(self) -> List[str]:
        """
        @return: Returns a list of problems; empty if the query is well-formed.
        """
        problems = []
        if self.method not in METHODS:
            return [f"unknown method '{self.method}'"]
        needs_beta = self.method in (GP_CC, LOGIT_CC)
        needs_alpha = self.method == GP_BOUNDS
        if needs_beta and (self.beta is None or not 0 < self.beta < 1):
            problems.append(f"{self.method} needs beta in (0, 1), got {self.beta}")
        if not needs_beta and self.beta is not None:
            problems.append(f"{self.method} does not take beta")
        if needs_alpha and (self.alpha is None or not 0 < self.alpha < 1):
            problems.append(f"{self.method} needs alpha in (0, 1), got {self.alpha}")
        if not needs_alpha and self.alpha is not None:
            problems.append(f"{self.method} does not take alpha")
        if not self.v_limit > 0:
            problems.append(f"v_limit must be positive, got {self.v_limit}")
        if self.grid_points < 2:
            problems.append(f"grid_points must be at least 2, got {self.grid_points}")
        return problems

    def check(self) -> None:
        problems = self.problems()
        if problems:
            raise SolveError("Invalid HC query: " + "; ".join(problems))

    def parameters(self) -> dict:
        params = {"v_limit": self.v_limit, "grid_points": self.grid_points}
        if self.beta is not None:
            params["beta"] = self.beta
        if self.alpha is not None:
            params["alpha"] = self.alpha
        return params


@dataclass(frozen=True)
class HcResult:
    method: str
    hc: float
    hc_mw: float
    feasible_set_contiguous: bool
    binding_value: float
    diagnostics: Tuple[str, ...] = ()
    bound: str = ""
    parameters: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        doc = {
            "method": self.method,
            "parameters": self.parameters,
            "hc": self.hc,
            "hc_mw": self.hc_mw,
            "feasible_set_contiguous": self.feasible_set_contiguous,
            "binding_value": self.binding_value,
            "diagnostics": list(self.diagnostics),
        }
        if self.bound:
            doc["bound"] = self.bound
        return doc


@dataclass(frozen=True)
class RiskCurve:
    grid: np.ndarray
    gp_risk: np.ndarray
    logit_risk: np.ndarray


def hc_grid(grid_points: int) -> np.ndarray:
    return np.linspace(0.0, 1.0, grid_points)


def quantile_bound(mu: np.ndarray, sd: np.ndarray, z: float) -> np.ndarray:
    """
    Voltage quantile mu + z * sd. Every GP chance constraint and interval bound goes through here, so that
    equal z values give bit-identical constraint curves.
    """
    return mu + z * sd


def feasible_runs(feasible: np.ndarray) -> int:
    """
    Number of maximal runs of True in a boolean grid indicator.
    """
    f = np.asarray(feasible, dtype=int)
    if len(f) == 0:
        return 0
    return int(f[0] + np.count_nonzero(np.diff(f) == 1))


def _largest_feasible(method: str, grid: np.ndarray, values: np.ndarray, limit: float, peak_load_mw: float,
                      parameters: dict, bound: str = "") -> HcResult:
    feasible = values <= limit
    runs = feasible_runs(feasible)
    diagnostics = []
    # x = 0 carries no PV, so a feasible set holding only that grid point is empty
    if not np.any(feasible[1:]):
        idx = 0
        hc = 0.0
        diagnostics.append(INFEASIBLE)
    else:
        idx = int(np.flatnonzero(feasible)[-1])
        hc = float(grid[idx])
        if np.all(feasible):
            diagnostics.append(UNCONSTRAINED)
    if runs > 1:
        diagnostics.append(NON_CONTIGUOUS)
    contiguous = runs == 1 and INFEASIBLE not in diagnostics
    return HcResult(method, hc, hc * peak_load_mw, contiguous, float(values[idx]), tuple(diagnostics), bound,
                    parameters)


def solve_gp_wocc_hc(model: MeanStdPredictor, q: HcQuery, peak_load_mw: float) -> HcResult:
    """
    Largest penetration whose predicted mean maximum voltage stays within the limit.
    """
    grid = hc_grid(q.grid_points)
    mu, _ = model.mean_and_std(grid)
    return _largest_feasible(GP_MEAN, grid, mu, q.v_limit, peak_load_mw, q.parameters())


def solve_gp_hc_bounds(model: MeanStdPredictor, q: HcQuery, peak_load_mw: float) -> Tuple[HcResult, HcResult]:
    """
    Lower and upper HC bounds from the prediction interval: the lower bound keeps the upper interval edge
    mu + z * sd within the limit, the upper bound the lower edge mu - z * sd, with z = Phi^-1(1 - alpha / 2).
    @return: Returns (lower, upper).
    """
    if q.alpha is None or not 0 < q.alpha < 1:
        raise SolveError(f"gp_bounds needs alpha in (0, 1), got {q.alpha}.")
    grid = hc_grid(q.grid_points)
    mu, sd = model.mean_and_std(grid)
    z = probdist.normal_inv_cdf(1 - q.alpha / 2)
    lower = _largest_feasible(GP_BOUNDS, grid, quantile_bound(mu, sd, z), q.v_limit, peak_load_mw,
                              q.parameters(), "lower")
    upper = _largest_feasible(GP_BOUNDS, grid, quantile_bound(mu, sd, -z), q.v_limit, peak_load_mw,
                              q.parameters(), "upper")
    return lower, upper


def solve_gp_cc_hc(model: MeanStdPredictor, q: HcQuery, peak_load_mw: float) -> HcResult:
    """
    Chance-constrained HC: largest x with mu(x) + sd(x) * Phi^-1(1 - beta) <= v_limit.
    """
    if q.beta is None or not 0 < q.beta < 1:
        raise SolveError(f"gp_cc needs beta in (0, 1), got {q.beta}.")
    grid = hc_grid(q.grid_points)
    mu, sd = model.mean_and_std(grid)
    z = probdist.normal_inv_cdf(1 - q.beta)
    return _largest_feasible(GP_CC, grid, quantile_bound(mu, sd, z), q.v_limit, peak_load_mw, q.parameters())


def solve_logit_cc_hc(model: LogitModel, q: HcQuery, peak_load_mw: float) -> HcResult:
    """
    Chance-constrained HC on the logit violation probability: sigmoid(b0 + b1 x) <= beta.
    With b1 > 0 the solution is x* = (logit(beta) - b0) / b1 clamped to [0, 1]; otherwise a grid search
    is used.
    """
    l = logging.getLogger("HC")
    if q.beta is None or not 0 < q.beta < 1:
        raise SolveError(f"logit_cc needs beta in (0, 1), got {q.beta}.")

    if model.b1 <= 0:
        l.warning(f"Logit slope {model.b1} is not positive, falling back to grid search.")
        grid = hc_grid(q.grid_points)
        probs = special.expit(model.b0 + model.b1 * grid)
        result = _largest_feasible(LOGIT_CC, grid, probs, q.beta, peak_load_mw, q.parameters())
        return HcResult(result.method, result.hc, result.hc_mw, result.feasible_set_contiguous,
                        result.binding_value, result.diagnostics + (GRID_FALLBACK,), "", result.parameters)

    x_star = (special.logit(q.beta) - model.b0) / model.b1
    diagnostics = []
    contiguous = True
    if x_star < 0:
        x_star = 0.0
        if special.expit(model.b0) > q.beta:
            diagnostics.append(INFEASIBLE)
            contiguous = False
    elif x_star >= 1:
        x_star = 1.0
        diagnostics.append(UNCONSTRAINED)
    x_star = float(x_star)
    prob = float(special.expit(model.b0 + model.b1 * x_star))
    return HcResult(LOGIT_CC, x_star, x_star * peak_load_mw, contiguous, prob, tuple(diagnostics), "",
                    q.parameters())


def solve_query(q: HcQuery, gp: MeanStdPredictor, lr: LogitModel, peak_load_mw: float) -> List[HcResult]:
    """
    Dispatch one query to its solver.
    @return: Returns one result, or two for gp_bounds (lower, upper).
    """
    q.check()
    if q.method == GP_MEAN:
        return [solve_gp_wocc_hc(gp, q, peak_load_mw)]
    if q.method == GP_BOUNDS:
        return list(solve_gp_hc_bounds(gp, q, peak_load_mw))
    if q.method == GP_CC:
        return [solve_gp_cc_hc(gp, q, peak_load_mw)]
    return [solve_logit_cc_hc(lr, q, peak_load_mw)]


def compute_risk_curve(gp: gpr.GprModel, lr: LogitModel, grid_points: int = RISK_CURVE_POINTS,
                       v_limit: float = DEFAULT_V_LIMIT) -> RiskCurve:
    """
    Evaluate GP and logit violation probabilities on a uniform grid over [0, 1].
    """
    if grid_points < 2:
        raise SolveError(f"A risk curve needs at least 2 grid points, got {grid_points}.")
    grid = hc_grid(grid_points)
    return RiskCurve(grid, gpr.risk_many(gp, grid, v_limit), special.expit(lr.b0 + lr.b1 * grid))


def results_health(results: Sequence[HcResult]) -> str:
    """
    Fold result diagnostics into a health level: infeasible results are CRITICAL, other diagnostics WARNING.
    """
    levels = []
    for r in results:
        if INFEASIBLE in r.diagnostics:
            levels.append("CRITICAL")
        elif r.diagnostics:
            levels.append("WARNING")
    return helper.get_highest_warning_level(levels)


def hc_report(results: Sequence[HcResult], peak_load_mw: float) -> dict:
    return {
        "schema_version": 1,
        "peak_load_mw": peak_load_mw,
        "health": results_health(results),
        "results": [r.to_dict() for r in results],
    }


def write_hc_report(filename: str, results: Sequence[HcResult], peak_load_mw: float) -> None:
    helper.write_text(filename, helper.pretty_json(hc_report(results, peak_load_mw)))


def risk_curve_to_csv(curve: RiskCurve) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RISK_CURVE_HEADER)
    for x, g, r in zip(curve.grid, curve.gp_risk, curve.logit_risk):
        writer.writerow([helper.format_float(x), helper.format_float(g), helper.format_float(r)])
    return buf.getvalue()


def write_risk_curve_csv(filename: str, curve: RiskCurve) -> None:
    helper.write_text(filename, risk_curve_to_csv(curve))


def sweep_to_csv(rows: Sequence[Tuple[float, float, HcResult]]) -> str:
    """
    One line per (load scale, HC result) of a peak-load sweep.
    @param rows: Tuples (load_scale, peak_load_mw, result) in sweep order.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_HEADER)
    for scale, peak, r in rows:
        writer.writerow([helper.format_float(scale), helper.format_float(peak), r.method, r.bound,
                         helper.format_float(r.hc), helper.format_float(r.hc_mw)])
    return buf.getvalue()
