# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
import copy
import dataclasses
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, List, Optional, Sequence, Tuple

import helper
import probdist
from control import ControlConfig, DroopBreakpoints, EssUnit
from errors import ConfigError, DomainError
from gpr import FitOptions, MAX_TRAIN, MIN_SAMPLES
from hc import DEFAULT_GRID_POINTS, DEFAULT_V_LIMIT, HcQuery, RISK_CURVE_POINTS
from powerflow import SolverSettings
from probdist import BetaParams, CopulaSpec, NormalParams
from scenarios import REDUCE_PEAK_GENERATION, ScenarioConfig

SCHEMA_VERSION = 1
_REQUIRED = object()


@dataclass(frozen=True)
class HcSettings:
    v_limit: float = DEFAULT_V_LIMIT
    grid_points: int = DEFAULT_GRID_POINTS
    risk_curve_points: int = RISK_CURVE_POINTS
    queries: Tuple[HcQuery, ...] = ()


@dataclass(frozen=True)
class PipelineConfig:
    network_path: str
    pcc_voltage: float
    scenario: ScenarioConfig
    control: ControlConfig
    solver: SolverSettings
    train_size: int
    fit: FitOptions
    hc: HcSettings
    output_dir: str
    seed: int
    log_level: str = "INFO"
    max_excluded_fraction: float = 0.01
    document: dict = field(default_factory=dict)

    @property
    def config_hash(self) -> str:
        """
        Digest of the resolved configuration: defaults filled in, paths resolved and seeds derived, so two
        documents that spell the same run differently share a hash.
        """
        resolved = dataclasses.asdict(self)
        del resolved["document"]
        return helper.config_hash(resolved)

    def verify(self, needs_fit: bool = True) -> bool:
        """
        Check the whole pipeline configuration. Each problem is logged.
        @param needs_fit: Also require that train_size leaves held-out samples (not needed to only simulate).
        @return: Returns True if the configuration can be run.
        """
        l = logging.getLogger("PipelineConfig")

        if not os.path.isfile(self.network_path):
            l.error(f"Network file {self.network_path} does not exist.")
            return False

        if not (self.scenario.verify() and self.control.verify() and self.solver.verify()):
            return False

        if not 0.8 <= self.pcc_voltage <= 1.2:
            l.error(f"PCC voltage {self.pcc_voltage} p.u. is implausible.")
            return False

        total = self.scenario.n_location_scenarios * self.scenario.n_profiles
        if self.train_size < MIN_SAMPLES:
            l.error(f"train_size must be at least {MIN_SAMPLES}, got {self.train_size}.")
            return False
        if self.train_size > MAX_TRAIN:
            l.error(f"train_size {self.train_size} exceeds the exact GPR limit of {MAX_TRAIN}.")
            return False
        if needs_fit and self.train_size >= total:
            l.error(f"train_size {self.train_size} leaves no held-out samples out of {total}.")
            return False

        if not 0 <= self.max_excluded_fraction < 1:
            l.error(f"max_excluded_fraction must lie in [0, 1), got {self.max_excluded_fraction}.")
            return False

        if self.hc.risk_curve_points < 2:
            l.error("The risk curve needs at least 2 points.")
            return False

        for i, q in enumerate(self.hc.queries):
            for problem in q.problems():
                l.error(f"[query {i}] {problem}.")
            if q.problems():
                return False

        if logging.getLevelName(self.log_level.upper()) not in (logging.DEBUG, logging.INFO, logging.WARNING,
                                                                 logging.ERROR, logging.CRITICAL):
            l.error(f"Unknown log level {self.log_level}.")
            return False

        return True


def apply_overrides(doc: dict, overrides: Sequence[str]) -> dict:
    """
    Apply dotted-path overrides like "scenario.copula.rho=0.3" to a config document.
    The value is decoded as JSON and kept as a string if that fails.
    @return: Returns a modified copy of doc.
    """
    doc = copy.deepcopy(doc)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"Override '{item}' is not of the form key=value.")
        key, raw = item.split("=", 1)
        path = key.strip().split(".")
        if not all(path):
            raise ConfigError(f"Override key '{key}' is malformed.")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw

        node = doc
        for part in path[:-1]:
            child = node.setdefault(part, {})
            if not isinstance(child, dict):
                raise ConfigError(f"Override '{key}': '{part}' is not a section.")
            node = child
        node[path[-1]] = value
    return doc


def _get(section: dict, key: str, where: str, fallback: Any = _REQUIRED, kind: type = float) -> Any:
    if key not in section or section[key] is None:
        if fallback is _REQUIRED:
            raise ConfigError(f"Missing config key {where}{key}.")
        return fallback
    value = section[key]
    try:
        if kind is int:
            if isinstance(value, bool) or float(value) != int(value):
                raise ValueError(f"{value!r} is not an integer")
            return int(value)
        if kind is float:
            if isinstance(value, bool):
                raise ValueError(f"{value!r} is not a number")
            return float(value)
        if kind is str:
            if not isinstance(value, str):
                raise ValueError(f"{value!r} is not a string")
            return value
        return kind(value)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Config key {where}{key}: {e}") from e


def _section(doc: dict, key: str, where: str = "") -> dict:
    value = doc.get(key, {})
    if value is None:
        return {}
    if not isinstance(value, dict):
        raise ConfigError(f"Config key {where}{key} must be an object.")
    return value


def _resolve(base_dir: str, path: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base_dir, path))


def read_scenario_config(sc: dict, seed: int) -> ScenarioConfig:
    demand = _section(sc, "demand", "scenario.")
    generation = _section(sc, "generation", "scenario.")
    copula = _section(sc, "copula", "scenario.")
    candidates = sc.get("candidate_buses")
    if candidates is not None:
        if not isinstance(candidates, list):
            raise ConfigError("Config key scenario.candidate_buses must be a list of bus ids.")
        candidates = tuple(_get({"bus": c}, "bus", "scenario.candidate_buses.", kind=int) for c in candidates)

    return ScenarioConfig(
        n_location_scenarios=_get(sc, "n_location_scenarios", "scenario.", 3000, int),
        n_profiles=_get(sc, "n_profiles", "scenario.", 4, int),
        raw_copula_samples=_get(sc, "raw_copula_samples", "scenario.", 10000, int),
        candidate_buses=candidates,
        per_bus_cap_factor=_get(sc, "per_bus_cap_factor", "scenario.", 1.5),
        demand=NormalParams(_get(demand, "mean", "scenario.demand.", 0.5),
                            _get(demand, "sd", "scenario.demand.", 0.025)),
        generation=BetaParams(_get(generation, "alpha", "scenario.generation.", 15.0),
                              _get(generation, "beta", "scenario.generation.", 6.0)),
        copula=CopulaSpec(_get(copula, "rho", "scenario.copula.", 0.15)),
        seed=seed,
        max_retries=_get(sc, "max_retries", "scenario.", 100, int),
        reduce_method=_get(sc, "reduce_method", "scenario.", REDUCE_PEAK_GENERATION, str),
        load_scale=_get(sc, "load_scale", "scenario.", 1.0),
        workers=_get(sc, "workers", "scenario.", 1, int),
    )


def read_control_config(cc: dict) -> ControlConfig:
    bp = cc.get("breakpoints", [0.95, 0.97, 1.03, 1.05])
    if not isinstance(bp, list) or len(bp) != 4:
        raise ConfigError("Config key control.breakpoints must be a list of four voltages.")
    units = cc.get("ess_units", []) or []
    if not isinstance(units, list):
        raise ConfigError("Config key control.ess_units must be a list.")
    ess_units = tuple(EssUnit(_get(u, "bus", "control.ess_units.", kind=int),
                              _get(u, "p_max_kw", "control.ess_units.")) for u in units)
    return ControlConfig(
        mode=_get(cc, "mode", "control.", "none", str),
        breakpoints=DroopBreakpoints(*(_get({"v": v}, "v", "control.breakpoints.") for v in bp)),
        c1=_get(cc, "c1", "control.", 0.95),
        ess_units=ess_units,
        epsilon_v=_get(cc, "epsilon_v", "control.", 0.005),
        max_control_iters=_get(cc, "max_control_iters", "control.", 30, int),
        damping=_get(cc, "damping", "control.", 0.5),
    )


def read_hc_settings(hc_doc: dict) -> HcSettings:
    v_limit = _get(hc_doc, "v_limit", "hc.", DEFAULT_V_LIMIT)
    grid_points = _get(hc_doc, "grid_points", "hc.", DEFAULT_GRID_POINTS, int)
    queries = hc_doc.get("queries", []) or []
    if not isinstance(queries, list):
        raise ConfigError("Config key hc.queries must be a list.")
    parsed = []
    for i, q in enumerate(queries):
        where = f"hc.queries[{i}]."
        if not isinstance(q, dict):
            raise ConfigError(f"Config key {where[:-1]} must be an object.")
        parsed.append(HcQuery(
            method=_get(q, "method", where, kind=str),
            beta=_get(q, "beta", where, None),
            alpha=_get(q, "alpha", where, None),
            v_limit=_get(q, "v_limit", where, v_limit),
            grid_points=_get(q, "grid_points", where, grid_points, int),
        ))
    return HcSettings(v_limit, grid_points, _get(hc_doc, "risk_curve_points", "hc.", RISK_CURVE_POINTS, int),
                      tuple(parsed))


def pipeline_config_from_dict(doc: dict, base_dir: str = ".") -> PipelineConfig:
    """
    Build a PipelineConfig from a parsed config document. Optional keys fall back to the defaults of the
    33-bus experiment.
    @param doc: The config document.
    @param base_dir: Directory against which relative paths are resolved.
    @return: Returns the configuration (not yet verified).
    """
    if not isinstance(doc, dict):
        raise ConfigError("The config document must be a JSON object.")
    version = doc.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"Unsupported config schema version {version}, expected {SCHEMA_VERSION}.")

    seed = _get(doc, "seed", "", 0, int)
    if not 0 <= seed <= probdist.SEED_MAX:
        raise ConfigError(f"Seed {seed} is not an unsigned 64-bit integer.")
    scenario_seed, fit_seed = probdist.spawn_seeds(seed, 2)

    fit_doc = _section(doc, "fit")
    solver_doc = _section(doc, "solver")
    try:
        return PipelineConfig(
            network_path=_resolve(base_dir, _get(doc, "network", "", kind=str)),
            pcc_voltage=_get(doc, "pcc_voltage", "", 1.03),
            scenario=read_scenario_config(_section(doc, "scenario"), scenario_seed),
            control=read_control_config(_section(doc, "control")),
            solver=SolverSettings(_get(solver_doc, "tolerance", "solver.", 1e-8),
                                  _get(solver_doc, "max_iterations", "solver.", 50, int)),
            train_size=_get(fit_doc, "train_size", "fit.", 500, int),
            fit=FitOptions(n_starts=_get(fit_doc, "n_starts", "fit.", 8, int), max_train=MAX_TRAIN, seed=fit_seed),
            hc=read_hc_settings(_section(doc, "hc")),
            output_dir=_resolve(base_dir, _get(doc, "output_dir", "", "out", str)),
            seed=seed,
            log_level=_get(_section(doc, "logging"), "level", "logging.", "INFO", str),
            max_excluded_fraction=_get(_section(doc, "scenario"), "max_excluded_fraction", "scenario.", 0.01),
            document=doc,
        )
    except DomainError as e:
        raise ConfigError(str(e)) from e


def read_pipeline_config(conf_file: str, overrides: Optional[List[str]] = None, seed: Optional[int] = None,
                         output_dir: Optional[str] = None) -> PipelineConfig:
    """
    Read a pipeline configuration from a JSON file.
    @param conf_file: The name of the JSON file.
    @param overrides: Dotted-path key=value overrides.
    @param seed: Optional seed override.
    @param output_dir: Optional output directory override (relative to the working directory).
    @return: Returns the configuration. Raises ConfigError.
    """
    try:
        with open(conf_file, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read config file {conf_file}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"{conf_file}: line {e.lineno}, column {e.colno}: {e.msg}") from e

    doc = apply_overrides(doc, overrides or [])
    if seed is not None:
        doc["seed"] = seed
    if output_dir is not None:
        doc["output_dir"] = os.path.abspath(output_dir)

    return pipeline_config_from_dict(doc, os.path.dirname(os.path.abspath(conf_file)))
