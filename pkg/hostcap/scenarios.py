# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Scenario generation and the probabilistic load flow driver that produces (x, v_max) training samples.
"""
import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import special
from scipy.cluster.vq import kmeans2

import control
import helper
import probdist
from control import ControlConfig
from errors import ConfigError, DomainError, PowerFlowError, SimulationError
from netmodel import Network, SLACK
from powerflow import SolverSettings, build_admittance, injections_from_mw, solve_ac_power_flow
from probdist import BetaParams, CopulaSpec, NormalParams

SAMPLES_HEADER = ["scenario_id", "profile_id", "control_mode", "x", "v_max", "converged"]

REDUCE_KMEANS = "kmeans"
REDUCE_PEAK_GENERATION = "peak_generation"
KMEANS_RESTARTS = 10


@dataclass(frozen=True)
class LoadGenProfile:
    p_dn: float
    p_gn: float


@dataclass(frozen=True)
class PvScenario:
    scenario_id: int
    capacities: Dict[int, float]
    penetration: float
    retries: int = 0


@dataclass(frozen=True)
class SampleRecord:
    scenario_id: int
    profile_id: int
    control_mode: str
    x: float
    v_max: float
    converged: bool = True


@dataclass(frozen=True)
class ScenarioConfig:
    n_location_scenarios: int = 3000
    n_profiles: int = 4
    raw_copula_samples: int = 10000
    candidate_buses: Optional[Tuple[int, ...]] = None
    per_bus_cap_factor: float = 1.5
    demand: NormalParams = field(default_factory=lambda: NormalParams(0.5, 0.025))
    generation: BetaParams = field(default_factory=lambda: BetaParams(15.0, 6.0))
    copula: CopulaSpec = field(default_factory=lambda: CopulaSpec(0.15))
    seed: int = 0
    max_retries: int = 100
    reduce_method: str = REDUCE_PEAK_GENERATION
    load_scale: float = 1.0
    workers: int = 1

    def verify(self) -> bool:
        l = logging.getLogger("ScenarioConfig")
        for name in ("n_location_scenarios", "n_profiles", "raw_copula_samples", "workers"):
            if getattr(self, name) < 1:
                l.error(f"{name} must be at least 1, got {getattr(self, name)}.")
                return False
        if self.n_profiles > self.raw_copula_samples:
            l.error("Cannot reduce fewer raw copula samples than representative profiles.")
            return False
        if not self.per_bus_cap_factor > 0:
            l.error(f"per_bus_cap_factor must be positive, got {self.per_bus_cap_factor}.")
            return False
        if not self.load_scale > 0:
            l.error(f"load_scale must be positive, got {self.load_scale}.")
            return False
        if self.max_retries < 0:
            l.error("max_retries must not be negative.")
            return False
        if self.reduce_method not in (REDUCE_KMEANS, REDUCE_PEAK_GENERATION):
            l.error(f"Unknown profile reduction method '{self.reduce_method}'.")
            return False
        if not 0 <= self.seed <= probdist.SEED_MAX:
            l.error(f"Seed {self.seed} is not an unsigned 64-bit integer.")
            return False
        if self.raw_copula_samples < 1000:
            l.warning("Fewer than 1000 raw copula samples give a coarse profile reduction.")
            # no return
        return True


def stage_seeds(cfg: ScenarioConfig) -> Dict[str, int]:
    """
    Child seeds of the three random stages, derived in a fixed order.
    """
    copula_seed, reduce_seed, location_seed = probdist.spawn_seeds(cfg.seed, 3)
    return {"copula": copula_seed, "reduce": reduce_seed, "locations": location_seed}


def sample_profiles(cfg: ScenarioConfig) -> List[LoadGenProfile]:
    """
    Draw raw load-generation pairs: copula uniforms mapped through the Normal demand quantile (clamped to
    [0, 1]) and the Beta generation quantile.
    @return: Returns cfg.raw_copula_samples profiles.
    """
    u = probdist.sample_gaussian_copula(cfg.copula, cfg.raw_copula_samples, stage_seeds(cfg)["copula"])
    p_dn = probdist.normal_quantile_clamped(u[:, 0], cfg.demand)
    p_gn = special.betaincinv(cfg.generation.alpha, cfg.generation.beta_shape, u[:, 1])
    return [LoadGenProfile(float(d), float(g)) for d, g in zip(p_dn, p_gn)]


def reduce_profiles(raw: Sequence[LoadGenProfile], k: int, seed: int,
                    method: str = REDUCE_PEAK_GENERATION) -> List[LoadGenProfile]:
    """
    Reduce raw profiles to k representatives.
    @param raw: Raw profiles.
    @param k: Number of representatives, at most len(raw).
    @param seed: Seed of the clustering.
    @param method: "peak_generation" (default) returns the k raw profiles with the highest PV output, the
        high-irradiance hours that bind the voltage limit; "kmeans" returns the best centroids out of 10
        seeded k-means runs over all raw profiles.
    @return: Returns k profiles, sorted by descending p_gn.
    """
    if k < 1 or k > len(raw):
        raise DomainError(f"Cannot reduce {len(raw)} profiles to {k} representatives.")
    if k == len(raw):
        return list(raw)

    data = np.array([[p.p_dn, p.p_gn] for p in raw])

    if method == REDUCE_PEAK_GENERATION:
        order = np.argsort(-data[:, 1], kind="stable")[:k]
        return [raw[i] for i in order]

    if method != REDUCE_KMEANS:
        raise DomainError(f"Unknown profile reduction method '{method}'.")

    best = None
    best_inertia = math.inf
    for run_seed in probdist.spawn_seeds(seed, KMEANS_RESTARTS):
        centroids, labels = kmeans2(data, k, iter=50, minit="++", missing="warn", seed=probdist.make_rng(run_seed))
        inertia = float(np.sum((data - centroids[labels]) ** 2))
        if inertia < best_inertia:
            best, best_inertia = centroids, inertia

    order = np.lexsort((-best[:, 0], -best[:, 1]))
    return [LoadGenProfile(float(best[i, 0]), float(best[i, 1])) for i in order]


def bus_caps(net: Network, cfg: ScenarioConfig) -> Dict[int, float]:
    """
    Per-bus PV size limits in MW for the candidate buses: per_bus_cap_factor times the bus peak load.
    Without explicit candidates, every non-slack bus with a positive cap is a candidate.
    """
    if cfg.candidate_buses is None:
        caps = {b.id: cfg.per_bus_cap_factor * b.p_load for b in net.buses if b.kind != SLACK}
        caps = {bus: cap for bus, cap in caps.items() if cap > 0}
    else:
        caps = {}
        for bus in cfg.candidate_buses:
            if bus not in net.index_of:
                raise ConfigError(f"Candidate bus {bus} does not exist in network {net.name}.")
            caps[bus] = cfg.per_bus_cap_factor * net.buses[net.index_of[bus]].p_load
            if caps[bus] <= 0:
                logging.getLogger("Scenarios").warning(f"Candidate bus {bus} has no load and therefore no PV capacity.")
    if not caps:
        raise SimulationError(f"Network {net.name} has no candidate bus for PV.")
    return caps


def _scale_to_target(raw: np.ndarray, caps: np.ndarray, target: float) -> np.ndarray:
    """
    Scale raw sizes by a common factor so that they sum to target, saturating at the caps and spreading
    the remainder over the unsaturated units.
    """
    fixed = 0.0
    remaining = float(np.sum(raw))
    for j in np.argsort(caps / raw, kind="stable"):
        factor = (target - fixed) / remaining
        if factor * raw[j] <= caps[j]:
            return np.minimum(factor * raw, caps)
        fixed += caps[j]
        remaining -= raw[j]
    return caps.copy()


def generate_pv_scenarios(net: Network, cfg: ScenarioConfig) -> List[PvScenario]:
    """
    Draw random PV location-size scenarios. Each scenario picks K ~ U{1..n} distinct candidate buses,
    draws sizes uniformly on (0, cap], and rescales them to a target penetration x ~ U(0, 1]. A target
    that the chosen buses' caps cannot reach is redrawn, at most cfg.max_retries times.
    @return: Returns cfg.n_location_scenarios scenarios; PvScenario.retries counts the redraws.
    """
    l = logging.getLogger("Scenarios")
    caps_by_bus = bus_caps(net, cfg)
    buses = np.array(sorted(caps_by_bus))
    caps = np.array([caps_by_bus[b] for b in buses])
    peak = net.peak_load_mw
    rng = probdist.make_rng(stage_seeds(cfg)["locations"])

    result = []
    for s in range(cfg.n_location_scenarios):
        for attempt in range(cfg.max_retries + 1):
            n_loc = int(rng.integers(1, len(buses) + 1))
            chosen = np.sort(rng.choice(len(buses), size=n_loc, replace=False))
            raw = caps[chosen] * (1.0 - rng.random(n_loc))
            target = (1.0 - rng.random()) * peak
            if np.sum(caps[chosen]) >= target:
                break
        else:
            raise SimulationError(f"Scenario {s}: target penetration unreachable under the bus caps "
                                  f"after {cfg.max_retries} retries.")

        sizes = _scale_to_target(raw, caps[chosen], target)
        capacities = {int(b): float(c) for b, c in zip(buses[chosen], sizes)}
        penetration = float(sum(capacities.values()) / peak)
        result.append(PvScenario(s, capacities, penetration, attempt))

    resampled = sum(1 for sc in result if sc.retries > 0)
    l.info(f"[{net.name}] Generated {len(result)} PV scenarios, {resampled} needed resampling.")
    return result


def _evaluate(net: Network, y_bus: np.ndarray, scenario: PvScenario, profile_id: int, profile: LoadGenProfile,
              ctrl: ControlConfig, settings: SolverSettings) -> SampleRecord:
    tag = f"s{scenario.scenario_id}/p{profile_id}"
    try:
        if ctrl.mode == control.NONE:
            p_mw, q_mvar = control.base_injections(net, scenario.capacities, profile.p_dn, profile.p_gn)
            sol = solve_ac_power_flow(net, injections_from_mw(net, p_mw, q_mvar), settings, y_bus)
        else:
            sol = control.iterate_control(net, scenario, profile, ctrl, settings, y_bus)
    except PowerFlowError as e:
        logging.getLogger("Scenarios").warning(f"[{tag}] {e}")
        return SampleRecord(scenario.scenario_id, profile_id, ctrl.mode, scenario.penetration, math.nan, False)

    converged = sol.converged and sol.control_converged
    v_max = sol.v_max if np.all(np.isfinite(sol.v_mag)) else math.nan
    if not converged:
        logging.getLogger("Scenarios").debug(f"[{tag}] Record flagged as not converged.")
    return SampleRecord(scenario.scenario_id, profile_id, ctrl.mode, scenario.penetration, v_max, converged)


def run_probabilistic_load_flow(net: Network, scenarios: Sequence[PvScenario], profiles: Sequence[LoadGenProfile],
                                ctrl: ControlConfig = ControlConfig(), settings: SolverSettings = SolverSettings(),
                                workers: int = 1) -> List[SampleRecord]:
    """
    Solve one power flow (or one control fixed point) per scenario and profile.
    @param workers: Number of worker threads. The output does not depend on it.
    @return: Returns the records sorted by (scenario_id, profile_id).
    """
    l = logging.getLogger("Scenarios")
    y_bus = build_admittance(net)
    tasks = [(sc, pid, prof) for sc in scenarios for pid, prof in enumerate(profiles)]

    def run(task: Tuple[PvScenario, int, LoadGenProfile]) -> SampleRecord:
        sc, pid, prof = task
        return _evaluate(net, y_bus, sc, pid, prof, ctrl, settings)

    l.info(f"[{net.name}] Running {len(tasks)} load flows (control: {ctrl.mode}, workers: {workers}).")
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            records = list(executor.map(run, tasks))
    else:
        records = [run(t) for t in tasks]

    return sorted(records, key=lambda r: (r.scenario_id, r.profile_id))


def screen_records(records: Sequence[SampleRecord],
                   max_excluded_fraction: float = 0.01) -> Tuple[List[SampleRecord], int]:
    """
    Drop records whose load flow or control iteration did not converge.
    @return: Returns (usable records, number excluded). Raises SimulationError when more than
        max_excluded_fraction of the records are excluded.
    """
    usable = [r for r in records if r.converged]
    excluded = len(records) - len(usable)
    if excluded:
        l = logging.getLogger("Scenarios")
        l.warning(f"Excluding {excluded} of {len(records)} records that did not converge.")
        if excluded > max_excluded_fraction * len(records):
            raise SimulationError(f"{excluded} of {len(records)} load flows did not converge, "
                                  f"more than {max_excluded_fraction:.1%}.")
    return usable, excluded


def samples_to_csv(records: Sequence[SampleRecord]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SAMPLES_HEADER)
    for r in records:
        v_max = helper.format_float(r.v_max) if math.isfinite(r.v_max) else "nan"
        writer.writerow([r.scenario_id, r.profile_id, r.control_mode, helper.format_float(r.x), v_max,
                         1 if r.converged else 0])
    return buf.getvalue()


def write_samples_csv(filename: str, records: Sequence[SampleRecord]) -> None:
    helper.write_text(filename, samples_to_csv(records))


def read_samples_csv(filename: str) -> List[SampleRecord]:
    """
    Read a samples CSV file.
    @return: Returns the records in file order. Raises ConfigError on schema mismatches.
    """
    try:
        with open(filename, "r", encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != SAMPLES_HEADER:
                raise ConfigError(f"{filename}: unexpected header {header}, expected {','.join(SAMPLES_HEADER)}.")
            records = []
            for line_no, row in enumerate(reader, start=2):
                if len(row) != len(SAMPLES_HEADER) or row[5] not in ("0", "1"):
                    raise ConfigError(f"{filename}, line {line_no}: malformed row.")
                records.append(SampleRecord(int(row[0]), int(row[1]), row[2], float(row[3]), float(row[4]),
                                            row[5] == "1"))
            return records
    except OSError as e:
        raise ConfigError(f"Cannot read samples file {filename}: {e}") from e
    except ValueError as e:
        raise ConfigError(f"{filename}: {e}") from e
