import dataclasses

import numpy as np
import pytest

import control
import netmodel
import powerflow
from conftest import two_bus_network
from errors import PowerFlowError
from netmodel import Branch, Bus, Network
from oracles import two_bus_voltage
from powerflow import InjectionSet, SolverSettings


def peak_injections(net, pv_mw=None):
    p_mw, q_mvar = control.base_injections(net, pv_mw or {}, 1.0, 1.0)
    return powerflow.injections_from_mw(net, p_mw, q_mvar)


def without_shunts(net):
    buses = [dataclasses.replace(b, g_shunt=0.0, b_shunt=0.0) for b in net.buses]
    return Network.build(net.base_mva, buses, net.branches, net.name)


def test_admittance_single_branch():
    buses = [Bus(1, netmodel.SLACK, 0.0, 0.0, v_set=1.0), Bus(2, netmodel.PQ, 0.0, 0.0)]
    net = Network.build(1.0, buses, [Branch(1, 2, 0.0, 0.1)])
    y_bus = powerflow.build_admittance(net)
    assert np.allclose(y_bus, np.array([[-10j, 10j], [10j, -10j]]), rtol=0, atol=1e-12)


def test_admittance_row_sums_equal_shunts(case33):
    y_bus = powerflow.build_admittance(case33)
    assert np.allclose(y_bus, y_bus.T)
    assert np.allclose(y_bus.sum(axis=1), case33.shunt_pu(), rtol=0, atol=1e-9)
    k = case33.index_of[18]
    assert y_bus.sum(axis=1)[k].imag == pytest.approx(0.4 / case33.base_mva)


def test_admittance_line_charging():
    buses = [Bus(1, netmodel.SLACK, 0.0, 0.0, v_set=1.0), Bus(2, netmodel.PQ, 0.0, 0.0)]
    net = Network.build(1.0, buses, [Branch(1, 2, 0.0, 0.1, b_charging=0.02)])
    y_bus = powerflow.build_admittance(net)
    assert y_bus[0, 0] == pytest.approx(-10j + 0.01j)
    assert y_bus[0, 1] == pytest.approx(10j)


def test_flat_solution_without_injections(case33):
    net = without_shunts(case33)
    inj = InjectionSet(np.zeros(net.n_bus), np.zeros(net.n_bus))
    sol = powerflow.solve_ac_power_flow(net, inj)
    assert sol.converged
    assert np.allclose(sol.v_mag, 1.03, rtol=0, atol=1e-12)
    assert np.allclose(sol.v_ang, 0.0, rtol=0, atol=1e-12)


def test_case33_peak_load(case33):
    sol = powerflow.solve_ac_power_flow(case33, peak_injections(case33))
    assert sol.converged
    assert sol.max_mismatch < 1e-8
    assert sol.v_mag[case33.slack_index] == 1.03
    assert np.min(sol.v_mag) > 0.95
    assert sol.v_max == pytest.approx(1.03)


def test_case123_peak_load(case123):
    sol = powerflow.solve_ac_power_flow(case123, peak_injections(case123))
    assert sol.converged
    assert np.min(sol.v_mag) > 0.95


def test_two_bus_closed_form():
    net = two_bus_network()
    inj = InjectionSet(np.array([0.0, -0.1]), np.array([0.0, -0.05]))
    sol = powerflow.solve_ac_power_flow(net, inj)
    assert sol.converged
    assert sol.v_mag[1] == pytest.approx(two_bus_voltage(1.03, 0.1, 0.05, 0.01, 0.05), abs=1e-8)


def test_power_balance(case33):
    pv = {18: 1.0, 25: 0.8, 33: 0.6}
    inj = peak_injections(case33, pv)
    sol = powerflow.solve_ac_power_flow(case33, inj)
    assert sol.converged
    pq = [i for i in range(case33.n_bus) if i != case33.slack_index]
    injected = complex(np.sum(inj.p_inj[pq]) + 1j * np.sum(inj.q_inj[pq]))
    residual = injected + sol.slack_power - powerflow.total_losses(case33, sol)
    assert abs(residual) < 10 * 1e-8


def test_losses_are_positive(case33):
    sol = powerflow.solve_ac_power_flow(case33, peak_injections(case33))
    s_from, s_to = powerflow.branch_flows(case33, sol)
    assert np.all((s_from + s_to).real > 0)


def test_scaling_invariance(case33):
    factor = 3.0
    buses = [dataclasses.replace(b, p_load=b.p_load * factor, q_load=b.q_load * factor,
                                 g_shunt=b.g_shunt * factor, b_shunt=b.b_shunt * factor) for b in case33.buses]
    scaled = Network.build(case33.base_mva * factor, buses, case33.branches, case33.name)
    sol = powerflow.solve_ac_power_flow(case33, peak_injections(case33))
    sol_scaled = powerflow.solve_ac_power_flow(scaled, peak_injections(scaled))
    assert np.allclose(sol.v_mag, sol_scaled.v_mag, rtol=0, atol=1e-10)
    assert np.allclose(sol.v_ang, sol_scaled.v_ang, rtol=0, atol=1e-10)


def test_iteration_limit(case33):
    sol = powerflow.solve_ac_power_flow(case33, peak_injections(case33), SolverSettings(max_iterations=1))
    assert not sol.converged
    assert sol.iterations == 1


def test_precomputed_admittance(case33):
    y_bus = powerflow.build_admittance(case33)
    a = powerflow.solve_ac_power_flow(case33, peak_injections(case33))
    b = powerflow.solve_ac_power_flow(case33, peak_injections(case33), y_bus=y_bus)
    assert np.array_equal(a.v_mag, b.v_mag)


def test_injection_shape_mismatch(case33):
    with pytest.raises(PowerFlowError):
        powerflow.solve_ac_power_flow(case33, InjectionSet(np.zeros(3), np.zeros(3)))


def test_non_finite_injection(two_bus):
    with pytest.raises(PowerFlowError):
        powerflow.solve_ac_power_flow(two_bus, InjectionSet(np.array([0.0, np.nan]), np.zeros(2)))


def test_solver_settings_verify():
    assert SolverSettings().verify()
    assert not SolverSettings(tolerance=0.0).verify()
    assert not SolverSettings(max_iterations=0).verify()
