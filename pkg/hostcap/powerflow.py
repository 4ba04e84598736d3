# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
AC power flow by Newton-Raphson in polar coordinates.

Sign convention: injections are generation minus load, so a load is a negative p_inj/q_inj and a PV plant
a positive p_inj. The slack bus entry of an InjectionSet is ignored.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from errors import PowerFlowError, SingularJacobianError
from netmodel import Network

DEFAULT_TOLERANCE = 1e-8
DEFAULT_MAX_ITERATIONS = 50


@dataclass(frozen=True)
class InjectionSet:
    p_inj: np.ndarray
    q_inj: np.ndarray


@dataclass(frozen=True)
class SolverSettings:
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS

    def verify(self) -> bool:
        l = logging.getLogger("SolverSettings")
        if not self.tolerance > 0:
            l.error(f"Solver tolerance must be positive, got {self.tolerance}.")
            return False
        if self.max_iterations < 1:
            l.error(f"Solver needs at least one iteration, got {self.max_iterations}.")
            return False
        return True


@dataclass(frozen=True)
class PowerFlowSolution:
    v_mag: np.ndarray
    v_ang: np.ndarray
    converged: bool
    iterations: int
    max_mismatch: float
    slack_power: complex = 0j
    control_iterations: int = 0
    control_converged: bool = True

    @property
    def v_max(self) -> float:
        return float(np.max(self.v_mag))

    @property
    def voltage(self) -> np.ndarray:
        return self.v_mag * np.exp(1j * self.v_ang)


def build_admittance(net: Network) -> np.ndarray:
    """
    Build the dense complex bus admittance matrix.
    @param net: A valid network.
    @return: Returns an n x n complex array in p.u., ordered like net.buses.
    """
    n = net.n_bus
    y_bus = np.zeros((n, n), dtype=complex)

    f = np.array([net.index_of[br.from_bus] for br in net.branches], dtype=int)
    t = np.array([net.index_of[br.to_bus] for br in net.branches], dtype=int)
    y_series = np.array([1.0 / complex(br.r, br.x) for br in net.branches], dtype=complex)
    y_charging = np.array([0.5j * br.b_charging for br in net.branches], dtype=complex)

    np.add.at(y_bus, (f, f), y_series + y_charging)
    np.add.at(y_bus, (t, t), y_series + y_charging)
    np.add.at(y_bus, (f, t), -y_series)
    np.add.at(y_bus, (t, f), -y_series)

    y_bus[np.diag_indices(n)] += net.shunt_pu()
    return y_bus


def injections_from_mw(net: Network, p_mw: np.ndarray, q_mvar: np.ndarray) -> InjectionSet:
    """
    Convert per-bus net injections in MW/MVar to p.u. on the network base.
    """
    return InjectionSet(np.asarray(p_mw, dtype=float) / net.base_mva,
                        np.asarray(q_mvar, dtype=float) / net.base_mva)


def _dS_dV(y_bus: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Partial derivatives of the complex bus power injections w.r.t. voltage magnitude and angle.
    """
    i_bus = y_bus @ v
    v_norm = v / np.abs(v)
    dS_dVm = v[:, None] * np.conj(y_bus * v_norm[None, :]) + np.diag(np.conj(i_bus) * v_norm)
    dS_dVa = 1j * v[:, None] * np.conj(np.diag(i_bus) - y_bus * v[None, :])
    return dS_dVm, dS_dVa


def solve_ac_power_flow(net: Network, inj: InjectionSet, settings: SolverSettings = SolverSettings(),
                        y_bus: Optional[np.ndarray] = None) -> PowerFlowSolution:
    """
    Solve the AC power flow equations for a network where all buses except the slack are PQ buses.
    @param net: A valid network.
    @param inj: Net injections per bus in p.u.
    @param settings: Tolerance and iteration limit.
    @param y_bus: Optional precomputed admittance matrix of net.
    @return: Returns the solution. A solution with converged=False is returned if the iteration limit is
        reached. Raises SingularJacobianError if the Newton step cannot be computed.
    """
    n = net.n_bus
    p_inj = np.asarray(inj.p_inj, dtype=float)
    q_inj = np.asarray(inj.q_inj, dtype=float)
    if p_inj.shape != (n,) or q_inj.shape != (n,):
        raise PowerFlowError(f"Injection vectors must have {n} entries.")
    if not (np.all(np.isfinite(p_inj)) and np.all(np.isfinite(q_inj))):
        raise PowerFlowError("Injections must be finite.")

    if y_bus is None:
        y_bus = build_admittance(net)

    slack = net.slack_index
    pq = np.array([i for i in range(n) if i != slack], dtype=int)
    n_pq = len(pq)
    s_bus = p_inj + 1j * q_inj

    # flat start at the slack set point
    v_mag = np.full(n, net.pcc_voltage, dtype=float)
    v_ang = np.zeros(n, dtype=float)
    v = v_mag * np.exp(1j * v_ang)

    def mismatch(v_: np.ndarray) -> np.ndarray:
        mis = v_ * np.conj(y_bus @ v_) - s_bus
        return np.concatenate([mis[pq].real, mis[pq].imag])

    f = mismatch(v)
    max_mis = float(np.max(np.abs(f))) if n_pq else 0.0
    iterations = 0
    converged = max_mis <= settings.tolerance

    while not converged and iterations < settings.max_iterations:
        iterations += 1
        dS_dVm, dS_dVa = _dS_dV(y_bus, v)
        jac = np.block([
            [dS_dVa[np.ix_(pq, pq)].real, dS_dVm[np.ix_(pq, pq)].real],
            [dS_dVa[np.ix_(pq, pq)].imag, dS_dVm[np.ix_(pq, pq)].imag],
        ])
        try:
            dx = scipy.linalg.solve(jac, -f)
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise SingularJacobianError(iterations, str(e)) from e
        if not np.all(np.isfinite(dx)):
            raise SingularJacobianError(iterations, "non-finite Newton step")

        v_ang[pq] += dx[:n_pq]
        v_mag[pq] += dx[n_pq:]
        v = v_mag * np.exp(1j * v_ang)

        f = mismatch(v)
        max_mis = float(np.max(np.abs(f)))
        if not np.isfinite(max_mis):
            break
        converged = max_mis <= settings.tolerance

    slack_power = complex(v[slack] * np.conj((y_bus @ v)[slack]))
    return PowerFlowSolution(v_mag, v_ang, bool(converged), iterations, max_mis, slack_power)


def branch_flows(net: Network, sol: PowerFlowSolution) -> Tuple[np.ndarray, np.ndarray]:
    """
    Compute complex power flows at both ends of every branch.
    @return: Returns (s_from, s_to) in p.u., each measured as power leaving the bus into the branch.
    """
    v = sol.voltage
    s_from = np.zeros(len(net.branches), dtype=complex)
    s_to = np.zeros(len(net.branches), dtype=complex)
    for k, br in enumerate(net.branches):
        vf = v[net.index_of[br.from_bus]]
        vt = v[net.index_of[br.to_bus]]
        y = 1.0 / complex(br.r, br.x)
        yc = 0.5j * br.b_charging
        s_from[k] = vf * np.conj((y + yc) * vf - y * vt)
        s_to[k] = vt * np.conj((y + yc) * vt - y * vf)
    return s_from, s_to


def total_losses(net: Network, sol: PowerFlowSolution) -> complex:
    """
    Total complex power consumed by branches (series losses and charging) and bus shunts, in p.u.
    """
    s_from, s_to = branch_flows(net, sol)
    shunt = np.sum(sol.v_mag ** 2 * np.conj(net.shunt_pu()))
    return complex(np.sum(s_from + s_to) + shunt)
