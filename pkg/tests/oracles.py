"""
Brute-force reference implementations for the numerical kernels. None of them calls the code they check:
power flows are solved by closed form or backward/forward sweep, GP predictions by a dense inverse, Beta
quantiles by Gauss-Legendre quadrature and bisection, logit fits by grid search, and the normal CDF by its
Taylor series.
"""
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import legendre
from numpy.random import PCG64, Generator

import gpr
import logit
import netmodel
import powerflow
import probdist

PF_SETTINGS = powerflow.SolverSettings(tolerance=1e-10, max_iterations=50)


@dataclass(frozen=True)
class OracleReport:
    case_id: str
    main_value: float
    oracle_value: float
    abs_error: float
    rel_error: float
    tolerance: float
    relative: bool = False

    @property
    def passed(self) -> bool:
        err = self.rel_error if self.relative else self.abs_error
        return math.isfinite(err) and err <= self.tolerance

    def __str__(self) -> str:
        state = "OK" if self.passed else "FAIL"
        return (f"{self.case_id:28} main={self.main_value:<22.15g} oracle={self.oracle_value:<22.15g} "
                f"abs={self.abs_error:.3e} rel={self.rel_error:.3e} [{state}]")


def _report(case_id: str, main: float, oracle: float, tolerance: float, relative: bool = False) -> OracleReport:
    abs_err = abs(main - oracle)
    rel_err = abs_err / abs(oracle) if oracle != 0 else abs_err
    return OracleReport(case_id, float(main), float(oracle), float(abs_err), float(rel_err), tolerance, relative)


# --- power flow ---------------------------------------------------------------------------------

def two_bus_voltage(v_slack: float, p: float, q: float, r: float, x: float) -> float:
    """
    Receiving-end voltage of a single line feeding a constant-power load P + jQ (p.u.).
    Larger root of |V|^4 + (2(rP + xQ) - V0^2)|V|^2 + |z|^2 |S|^2 = 0.
    """
    b = 2 * (r * p + x * q) - v_slack ** 2
    c = (r ** 2 + x ** 2) * (p ** 2 + q ** 2)
    return math.sqrt((-b + math.sqrt(b * b - 4 * c)) / 2)


def sweep_radial(parents: Sequence[int], s_load: np.ndarray, z: np.ndarray, v_slack: float,
                 tolerance: float = 1e-14, max_iterations: int = 1000) -> np.ndarray:
    """
    Backward/forward sweep on a radial feeder. Node 0 is the slack; node k + 1 is fed from node parents[k]
    through impedance z[k] and draws s_load[k] (p.u.).
    @return: Returns the voltage magnitudes of all nodes, slack included.
    """
    n = len(parents) + 1
    v = np.full(n, complex(v_slack))
    for _ in range(max_iterations):
        i_node = np.zeros(n, dtype=complex)
        i_node[1:] = np.conj(s_load / v[1:])
        # children always have larger numbers than their parents
        i_branch = i_node.copy()
        for k in range(n - 1, 0, -1):
            i_branch[parents[k - 1]] += i_branch[k]
        v_new = v.copy()
        for k in range(1, n):
            v_new[k] = v_new[parents[k - 1]] - z[k - 1] * i_branch[k]
        change = float(np.max(np.abs(v_new - v)))
        v = v_new
        if change < tolerance:
            break
    return np.abs(v)


def _two_bus_case() -> OracleReport:
    base = 10.0
    buses = [netmodel.Bus(1, netmodel.SLACK, 0.0, 0.0, base_kv=12.66, v_set=1.03),
             netmodel.Bus(2, netmodel.PQ, 0.1 * base, 0.05 * base, base_kv=12.66)]
    net = netmodel.Network.build(base, buses, [netmodel.Branch(1, 2, 0.01, 0.05)], "twobus")
    inj = powerflow.InjectionSet(np.array([0.0, -0.1]), np.array([0.0, -0.05]))
    sol = powerflow.solve_ac_power_flow(net, inj, PF_SETTINGS)
    return _report("powerflow/two_bus", sol.v_mag[1], two_bus_voltage(1.03, 0.1, 0.05, 0.01, 0.05), 1e-8)


def random_radial_case(rng: Generator) -> Tuple[List[int], np.ndarray, np.ndarray]:
    n = int(rng.integers(2, 7))
    parents = [int(rng.integers(0, k)) for k in range(1, n)]
    s_load = rng.uniform(0.01, 0.08, n - 1) + 1j * rng.uniform(0.0, 0.04, n - 1)
    z = rng.uniform(0.005, 0.03, n - 1) + 1j * rng.uniform(0.01, 0.06, n - 1)
    return parents, s_load, z


def _radial_cases(rng: Generator, count: int = 10) -> List[OracleReport]:
    reports = []
    for case in range(count):
        parents, s_load, z = random_radial_case(rng)
        buses = [netmodel.Bus(1, netmodel.SLACK, 0.0, 0.0, v_set=1.03)]
        branches = []
        for k, parent in enumerate(parents):
            buses.append(netmodel.Bus(k + 2, netmodel.PQ, float(s_load[k].real), float(s_load[k].imag)))
            branches.append(netmodel.Branch(parent + 1, k + 2, float(z[k].real), float(z[k].imag)))
        net = netmodel.Network.build(1.0, buses, branches, f"radial{case}")

        inj = powerflow.InjectionSet(-net.p_load_pu(), -net.q_load_pu())
        sol = powerflow.solve_ac_power_flow(net, inj, PF_SETTINGS)
        oracle = sweep_radial(parents, s_load, z, 1.03)
        worst = int(np.argmax(np.abs(sol.v_mag - oracle)))
        reports.append(_report(f"powerflow/radial{case}[{worst}]", sol.v_mag[worst], oracle[worst], 1e-6))
    return reports


# --- Gaussian process ---------------------------------------------------------------------------

def dense_gp_predict(x: np.ndarray, v: np.ndarray, xs: np.ndarray, lambda_sq: float, tau_sq: float,
                     noise_var: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    GP predictive mean and variance (with noise) by explicit matrix inversion.
    """
    m = np.mean(v)
    k = np.array([[lambda_sq * math.exp(-(a - b) ** 2 / tau_sq) for b in x] for a in x])
    k_inv = np.linalg.inv(k + noise_var * np.eye(len(x)))
    k_star = np.array([[lambda_sq * math.exp(-(a - b) ** 2 / tau_sq) for b in xs] for a in x])
    mu = m + k_star.T @ k_inv @ (v - m)
    var = lambda_sq - np.einsum("ij,ik,kj->j", k_star, k_inv, k_star) + noise_var
    return mu, var


def _gp_cases(rng: Generator) -> List[OracleReport]:
    x = rng.uniform(0.0, 1.0, 50)
    v = 1.0 + 0.08 * x + 0.004 * rng.standard_normal(50)
    xs = np.linspace(0.0, 1.0, 21)
    hyper = gpr.GprHyperparams(lambda_sq=0.01, tau_sq=0.1, noise_var=1e-4)

    model = gpr.build_gpr_model(x, v, hyper)
    mu, var = gpr.predict_many(model, xs)
    mu_o, var_o = dense_gp_predict(x, v, xs, 0.01, 0.1, 1e-4)
    i = int(np.argmax(np.abs(mu - mu_o)))
    j = int(np.argmax(np.abs(var - var_o)))
    return [_report(f"gpr/mean[{i}]", mu[i], mu_o[i], 1e-8),
            _report(f"gpr/variance[{j}]", var[j], var_o[j], 1e-8)]


# --- distributions ------------------------------------------------------------------------------

def quadrature_beta_cdf(x: float, a: float, b: float, nodes: int = 64) -> float:
    """
    Beta CDF by Gauss-Legendre quadrature of the density over [0, x].
    """
    if x <= 0:
        return 0.0
    if x >= 1:
        return 1.0
    t, w = legendre.leggauss(nodes)
    u = 0.5 * x * (t + 1)
    log_norm = math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
    dens = np.exp(log_norm + (a - 1) * np.log(u) + (b - 1) * np.log1p(-u))
    return float(0.5 * x * np.sum(w * dens))


def bisection_beta_quantile(p: float, a: float, b: float) -> float:
    lo, hi = 0.0, 1.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if quadrature_beta_cdf(mid, a, b) < p:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-15:
            break
    return 0.5 * (lo + hi)


def series_normal_cdf(z: float, terms: int = 200) -> float:
    """
    Standard normal CDF from the Maclaurin series of erf.
    """
    t = z / math.sqrt(2)
    total = 0.0
    term = t
    for n in range(terms):
        total += term / (2 * n + 1)
        term *= -t * t / (n + 1)
        if abs(term) < 1e-18:
            break
    return 0.5 + total / math.sqrt(math.pi)


def newton_normal_quantile(p: float) -> float:
    z = 0.0
    for _ in range(100):
        step = (series_normal_cdf(z) - p) / (math.exp(-z * z / 2) / math.sqrt(2 * math.pi))
        z -= step
        if abs(step) < 1e-15:
            break
    return z


def _distribution_cases() -> List[OracleReport]:
    beta = probdist.BetaParams(15.0, 6.0)
    return [
        _report("beta/median(15,6)", probdist.beta_inv_cdf(0.5, beta), bisection_beta_quantile(0.5, 15.0, 6.0), 1e-8),
        _report("beta/cdf(15,6)@0.7", probdist.beta_cdf(0.7, beta), quadrature_beta_cdf(0.7, 15.0, 6.0), 1e-10),
        _report("normal/cdf(1.959964)", probdist.normal_cdf(1.959964), series_normal_cdf(1.959964), 1e-10),
        _report("normal/inv(0.975)", probdist.normal_inv_cdf(0.975), newton_normal_quantile(0.975), 1e-8),
        _report("normal/inv(0.99)", probdist.normal_inv_cdf(0.99), newton_normal_quantile(0.99), 1e-8),
    ]


# --- logistic regression ------------------------------------------------------------------------

def symmetric_logit_data(b0: float = -10.0, b1: float = 20.0, levels: int = 50,
                         per_level: int = 100) -> List[logit.LabeledSample]:
    """
    Deterministic labeled data: at each of `levels` evenly spaced x values, round(per_level * p(x)) of the
    per_level samples are violations.
    """
    data = []
    for j in range(levels):
        x = (j + 0.5) / levels
        ones = int(round(per_level / (1 + math.exp(-(b0 + b1 * x)))))
        data += [logit.LabeledSample(x, 1)] * ones + [logit.LabeledSample(x, 0)] * (per_level - ones)
    return data


def grid_search_logit(data: Sequence[logit.LabeledSample], center: Tuple[float, float] = (-10.0, 20.0),
                      width: Tuple[float, float] = (20.0, 40.0), points: int = 41,
                      rounds: int = 40) -> Tuple[float, float]:
    """
    Maximize the Bernoulli log-likelihood on successively refined grids, summing over distinct x values.
    """
    x_all = np.array([d.x for d in data])
    y_all = np.array([d.violated for d in data], dtype=float)
    x, inverse = np.unique(x_all, return_inverse=True)
    ones = np.bincount(inverse, weights=y_all)
    total = np.bincount(inverse).astype(float)
    c0, c1 = center
    w0, w1 = width
    for _ in range(rounds):
        g0 = np.linspace(c0 - w0 / 2, c0 + w0 / 2, points)
        g1 = np.linspace(c1 - w1 / 2, c1 + w1 / 2, points)
        eta = g0[:, None, None] + g1[None, :, None] * x[None, None, :]
        ll = np.sum(ones * eta - total * np.logaddexp(0.0, eta), axis=2)
        i, j = np.unravel_index(int(np.argmax(ll)), ll.shape)
        c0, c1 = float(g0[i]), float(g1[j])
        w0, w1 = w0 / 2, w1 / 2
    return c0, c1


def _logit_cases() -> List[OracleReport]:
    data = symmetric_logit_data()
    model = logit.fit_logit(data)
    b0, b1 = grid_search_logit(data)
    return [
        _report("logit/b0_vs_grid", model.b0, b0, 1e-3, relative=True),
        _report("logit/b1_vs_grid", model.b1, b1, 1e-3, relative=True),
        _report("logit/b0_vs_truth", model.b0, -10.0, 0.1, relative=True),
        _report("logit/b1_vs_truth", model.b1, 20.0, 0.1, relative=True),
    ]


def oracle_suite(seed: int) -> List[OracleReport]:
    """
    Run every oracle comparison.
    @param seed: Seed of the random test cases (radial feeders, GP training data).
    @return: Returns one report per compared quantity, in a fixed order.
    """
    rng = Generator(PCG64(seed))
    reports = [_two_bus_case()]
    reports += _radial_cases(rng)
    reports += _gp_cases(rng)
    reports += _distribution_cases()
    reports += _logit_cases()
    return reports


def format_reports(reports: Sequence[OracleReport]) -> str:
    lines = [str(r) for r in reports]
    failed = sum(1 for r in reports if not r.passed)
    lines.append(f"{len(reports)} checks, {failed} failed")
    return "\n".join(lines) + "\n"
