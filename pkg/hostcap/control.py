# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Local droop control of PV inverters and storage units, and the fixed-point iteration that couples the
droop laws with the power flow.

Sign convention: absorbed reactive power and ESS charging are negative injections. ESS ratings and
set points are in kW, everything else in MW / MVar.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple, TYPE_CHECKING

import numpy as np

from errors import DomainError
from netmodel import Network
from powerflow import PowerFlowSolution, SolverSettings, build_admittance, injections_from_mw, solve_ac_power_flow

if TYPE_CHECKING:
    from scenarios import LoadGenProfile, PvScenario

NONE = "none"
VOLT_VAR = "volt_var"
POWER_FACTOR = "power_factor"
ESS = "ess"
MODES = (NONE, VOLT_VAR, POWER_FACTOR, ESS)


@dataclass(frozen=True)
class DroopBreakpoints:
    v1: float = 0.95
    v2: float = 0.97
    v3: float = 1.03
    v4: float = 1.05

    def __post_init__(self) -> None:
        if not self.v1 < self.v2 < self.v3 < self.v4:
            raise DomainError(f"Droop breakpoints must be strictly increasing, got {self.as_tuple()}.")

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return self.v1, self.v2, self.v3, self.v4


@dataclass(frozen=True)
class EssUnit:
    bus: int
    p_max: float


@dataclass(frozen=True)
class ControlConfig:
    mode: str = NONE
    breakpoints: DroopBreakpoints = field(default_factory=DroopBreakpoints)
    c1: float = 0.95
    ess_units: Tuple[EssUnit, ...] = ()
    epsilon_v: float = 0.005
    max_control_iters: int = 30
    damping: float = 0.5

    def verify(self, net: Optional[Network] = None) -> bool:
        """
        Check the control parameters, and optionally that every ESS unit sits on a bus of net.
        @return: Returns True if the configuration is usable.
        """
        l = logging.getLogger("ControlConfig")
        if self.mode not in MODES:
            l.error(f"Unknown control mode '{self.mode}', expected one of {', '.join(MODES)}.")
            return False
        if not 0 < self.c1 <= 1:
            l.error(f"Minimum power factor c1 must lie in (0, 1], got {self.c1}.")
            return False
        if not self.epsilon_v > 0:
            l.error(f"Control convergence threshold must be positive, got {self.epsilon_v}.")
            return False
        if self.max_control_iters < 1:
            l.error("At least one control iteration is needed.")
            return False
        if not 0 < self.damping < 1:
            l.error(f"Damping factor must lie in (0, 1), got {self.damping}.")
            return False
        for unit in self.ess_units:
            if not unit.p_max > 0:
                l.error(f"ESS at bus {unit.bus} needs a positive power rating.")
                return False
            if net is not None and unit.bus not in net.index_of:
                l.error(f"ESS references nonexistent bus {unit.bus}.")
                return False
        if self.mode == ESS and not self.ess_units:
            l.warning("ESS control mode without any ESS units behaves like no control.")
            # no return
        if self.mode != ESS and self.ess_units:
            l.warning(f"ESS units are configured but ignored in control mode '{self.mode}'.")
            # no return
        return True


@dataclass(frozen=True)
class Setpoints:
    """
    Per-bus actuator outputs (arrays ordered like net.buses).
    """
    pv_p_mw: np.ndarray
    pv_q_mvar: np.ndarray
    ess_p_mw: np.ndarray


def volt_var_q(v: float, p_pv: float, s_max: float, bp: DroopBreakpoints) -> float:
    """
    Volt-Var droop: reactive power of a PV inverter as a function of its terminal voltage.
    @param v: Terminal voltage in p.u.
    @param p_pv: Active PV output in MW.
    @param s_max: Inverter rating in MVA.
    @param bp: Droop breakpoints.
    @return: Returns Q in MVar, bounded by the capability curve.
    """
    if p_pv > s_max:
        raise DomainError(f"PV output {p_pv} MW exceeds inverter rating {s_max} MVA.")
    q_max = math.sqrt(max(s_max ** 2 - p_pv ** 2, 0.0))
    return float(np.interp(v, bp.as_tuple(), (q_max, 0.0, 0.0, -q_max)))


def pf_control_q(v: float, p_pv: float, cfg: ControlConfig) -> float:
    """
    Adaptive power-factor droop: unity power factor up to v3, falling linearly to c1 at v4.
    @return: Returns Q in MVar (absorbing at high voltage).
    """
    if p_pv < 0:
        raise DomainError(f"PV output must be non-negative, got {p_pv} MW.")
    bp = cfg.breakpoints
    pf = float(np.interp(v, (bp.v3, bp.v4), (1.0, cfg.c1)))
    if pf >= 1.0:
        return 0.0
    return -p_pv * math.tan(math.acos(pf))


def ess_power(v: float, unit: EssUnit, bp: DroopBreakpoints) -> float:
    """
    ESS droop: discharge at low voltage, charge at high voltage.
    @return: Returns P in kW; positive is discharging.
    """
    return float(np.interp(v, bp.as_tuple(), (unit.p_max, 0.0, 0.0, -unit.p_max)))


def pv_output(net: Network, capacities: Dict[int, float], p_gn: float) -> np.ndarray:
    """
    Active PV output per bus in MW.
    """
    pv = np.zeros(net.n_bus)
    for bus, c in capacities.items():
        pv[net.index_of[bus]] += c * p_gn
    return pv


def base_injections(net: Network, capacities: Dict[int, float], p_dn: float, p_gn: float) -> Tuple[np.ndarray, np.ndarray]:
    """
    Net injections without control: P = C*p_gn - p_load*p_dn, Q = -q_load*p_dn (unity power factor inverters).
    @return: Returns (p_mw, q_mvar) per bus.
    """
    p_load = np.array([b.p_load for b in net.buses])
    q_load = np.array([b.q_load for b in net.buses])
    return pv_output(net, capacities, p_gn) - p_load * p_dn, -q_load * p_dn


def compute_setpoints(net: Network, scenario: "PvScenario", profile: "LoadGenProfile", v_mag: np.ndarray,
                      cfg: ControlConfig) -> Setpoints:
    """
    Evaluate the droop laws of all actuators at the given bus voltages.
    @param net: The network.
    @param scenario: PV sizes; each inverter is rated at its PV capacity.
    @param profile: Normalized demand and generation.
    @param v_mag: Bus voltage magnitudes in p.u. (ordered like net.buses).
    @param cfg: Control configuration.
    @return: Returns the set points of every bus.
    """
    pv_p = pv_output(net, scenario.capacities, profile.p_gn)
    pv_q = np.zeros(net.n_bus)
    ess_p = np.zeros(net.n_bus)

    if cfg.mode in (VOLT_VAR, POWER_FACTOR):
        for bus, c in scenario.capacities.items():
            if c <= 0:
                continue
            k = net.index_of[bus]
            p = c * profile.p_gn
            if cfg.mode == VOLT_VAR:
                pv_q[k] += volt_var_q(v_mag[k], p, c, cfg.breakpoints)
            else:
                pv_q[k] += pf_control_q(v_mag[k], p, cfg)

    elif cfg.mode == ESS:
        for unit in cfg.ess_units:
            k = net.index_of[unit.bus]
            ess_p[k] += ess_power(v_mag[k], unit, cfg.breakpoints) / 1000.0

    return Setpoints(pv_p, pv_q, ess_p)


def iterate_control(net: Network, scenario: "PvScenario", profile: "LoadGenProfile", cfg: ControlConfig,
                    settings: SolverSettings = SolverSettings(), y_bus: Optional[np.ndarray] = None) -> PowerFlowSolution:
    """
    Fixed-point iteration between droop set points and power flow: measure voltages, update set points,
    solve again, until the largest voltage change between iterations drops below epsilon_v.
    The uncontrolled solution provides the first voltage measurement. The iteration oscillates when the
    voltage change does not shrink or reverses direction; every such iteration damps the set point updates
    by cfg.damping (compounding), so limit cycles contract.
    @return: Returns the last power flow solution with control_iterations and control_converged set.
    """
    if cfg.mode == NONE:
        raise DomainError("iterate_control needs an active control mode.")

    l = logging.getLogger("Control")
    tag = f"s{scenario.scenario_id}"
    if y_bus is None:
        y_bus = build_admittance(net)

    p_base, q_base = base_injections(net, scenario.capacities, profile.p_dn, profile.p_gn)
    sol = solve_ac_power_flow(net, injections_from_mw(net, p_base, q_base), settings, y_bus)
    if not sol.converged:
        l.debug(f"[{tag}] Uncontrolled power flow did not converge.")
        return dataclasses.replace(sol, control_iterations=0, control_converged=False)

    v_prev = sol.v_mag
    sp = compute_setpoints(net, scenario, profile, v_prev, cfg)
    step = 1.0
    prev_delta = math.inf
    prev_dv = None

    for iteration in range(1, cfg.max_control_iters + 1):
        sol = solve_ac_power_flow(net, injections_from_mw(net, p_base + sp.ess_p_mw, q_base + sp.pv_q_mvar),
                                  settings, y_bus)
        if not sol.converged:
            l.debug(f"[{tag}] Power flow failed in control iteration {iteration}.")
            return dataclasses.replace(sol, control_iterations=iteration, control_converged=False)

        dv = sol.v_mag - v_prev
        delta = float(np.max(np.abs(dv)))
        if delta < cfg.epsilon_v:
            return dataclasses.replace(sol, control_iterations=iteration, control_converged=True)

        if delta >= prev_delta or (prev_dv is not None and float(np.dot(dv, prev_dv)) < 0):
            step *= cfg.damping
            l.debug(f"[{tag}] Oscillation at voltage change {delta:.5f}, damping set point updates by {step}.")

        target = compute_setpoints(net, scenario, profile, sol.v_mag, cfg)
        sp = Setpoints(sp.pv_p_mw,
                       sp.pv_q_mvar + step * (target.pv_q_mvar - sp.pv_q_mvar),
                       sp.ess_p_mw + step * (target.ess_p_mw - sp.ess_p_mw))
        v_prev = sol.v_mag
        prev_delta = delta
        prev_dv = dv

    l.warning(f"[{tag}] Control did not settle within {cfg.max_control_iters} iterations.")
    return dataclasses.replace(sol, control_iterations=cfg.max_control_iters, control_converged=False)
