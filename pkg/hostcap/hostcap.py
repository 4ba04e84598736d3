#!/usr/bin/env python3
#
# -----------------------------------------------------------------------------
# Copyright (c) 2026, the hostcap authors
#
# All rights reserved. See LICENSE.txt for the license terms, including the
# non-military-usage clause.
# -----------------------------------------------------------------------------
"""
Command line front end of the hosting capacity toolkit.

Exit codes: 0 success, 1 unexpected error, 2 configuration error, 3 simulation or network error,
4 model fitting error, 5 HC solving error.
"""
import argparse
import dataclasses
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

import gpr
import hc
import helper
import logit
import netmodel
import pipelineconfig
import probdist
import scenarios
from errors import EXIT_OK, EXIT_SIMULATION, EXIT_UNEXPECTED, ConfigError, FitError, HostCapError
from netmodel import Network
from pipelineconfig import PipelineConfig

SAMPLES_FILE = "samples.csv"
MODELS_FILE = "models.json"
HC_REPORT_FILE = "hc_report.json"
RISK_CURVE_FILE = "risk_curve.csv"
MANIFEST_FILE = "manifest.json"
SWEEP_FILE = "sweep.csv"
DEFAULT_LOAD_SCALES = "0.8,1.0,1.2"
BUNDLE_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ModelBundle:
    gp: gpr.GprModel
    lr: logit.LogitModel
    peak_load_mw: float
    v_limit: float
    metrics: dict


class HostCap:
    """
    The hosting capacity pipeline: simulate, fit and solve, each stage writing its artifacts to the output
    directory.
    """

    def __init__(self, config: PipelineConfig) -> None:
        """
        Create a new pipeline object.
        @param config: A verified pipeline configuration.
        """
        self.config = config
        self.l = logging.getLogger("HostCap")
        self.network: Optional[Network] = None
        self.health_states: List[str] = []
        self.counts = {"records": 0, "excluded": 0, "resampled_scenarios": 0}
        self.artifacts = set()

    @staticmethod
    def read_config(conf_file: str, overrides: Optional[List[str]] = None, seed: Optional[int] = None,
                    output_dir: Optional[str] = None, needs_fit: bool = True) -> PipelineConfig:
        """
        Read and verify a pipeline configuration.
        @param conf_file: The name of the JSON config file.
        @param needs_fit: Passed on to PipelineConfig.verify().
        @return: Returns the configuration. Raises ConfigError if it cannot be used.
        """
        config = pipelineconfig.read_pipeline_config(conf_file, overrides, seed, output_dir)
        if not config.verify(needs_fit):
            raise ConfigError(f"There is a problem in the configuration {conf_file}.")
        return config

    def path(self, name: str) -> str:
        return os.path.join(self.config.output_dir, name)

    def _write(self, name: str, text: str) -> None:
        helper.write_text(self.path(name), text)
        self.artifacts.add(name)
        self.l.info(f"Wrote {self.path(name)}.")

    def load_network(self) -> Network:
        if self.network is None:
            net = netmodel.load_network(self.config.network_path, self.config.pcc_voltage)
            if self.config.scenario.load_scale != 1.0:
                net = net.scaled_load(self.config.scenario.load_scale)
                self.l.info(f"[{net.name}] Loads scaled by {self.config.scenario.load_scale}, "
                            f"peak load now {net.peak_load_mw:.4f} MW.")
            if not self.config.control.verify(net):
                raise ConfigError(f"The control section does not fit network {net.name}.")
            self.network = net
        return self.network

    def simulate(self) -> List[scenarios.SampleRecord]:
        """
        Generate profiles and PV scenarios, run the probabilistic load flow and write the samples CSV.
        @return: Returns all records, including the ones flagged as not converged.
        """
        cfg = self.config
        net = self.load_network()
        start = time.perf_counter()

        raw = scenarios.sample_profiles(cfg.scenario)
        profiles = scenarios.reduce_profiles(raw, cfg.scenario.n_profiles, scenarios.stage_seeds(cfg.scenario)["reduce"],
                                             cfg.scenario.reduce_method)
        for i, p in enumerate(profiles):
            self.l.info(f"[p{i}] Representative profile: demand {p.p_dn:.4f}, generation {p.p_gn:.4f}.")

        pv = scenarios.generate_pv_scenarios(net, cfg.scenario)
        records = scenarios.run_probabilistic_load_flow(net, pv, profiles, cfg.control, cfg.solver,
                                                        cfg.scenario.workers)
        _, excluded = scenarios.screen_records(records, cfg.max_excluded_fraction)

        self.counts = {
            "records": len(records),
            "excluded": excluded,
            "resampled_scenarios": sum(1 for s in pv if s.retries > 0),
        }
        self.health_states.append("WARNING" if excluded else "OK")
        self._write(SAMPLES_FILE, scenarios.samples_to_csv(records))
        self.l.info(f"Simulation stage took {time.perf_counter() - start:.2f} s.")
        return records

    def fit(self, records: Sequence[scenarios.SampleRecord]) -> ModelBundle:
        """
        Split usable records into training and held-out sets, fit GPR and logit models and evaluate them.
        """
        cfg = self.config
        net = self.load_network()
        start = time.perf_counter()
        v_limit = cfg.hc.v_limit

        usable = [r for r in records if r.converged]
        if cfg.train_size >= len(usable):
            raise FitError(f"train_size {cfg.train_size} leaves no held-out samples out of {len(usable)}.")

        split_seed, lhs_seed = probdist.spawn_seeds(cfg.fit.seed, 2)
        order = probdist.make_rng(split_seed).permutation(len(usable))
        train = [usable[i] for i in np.sort(order[:cfg.train_size])]
        test = [usable[i] for i in np.sort(order[cfg.train_size:])]

        gp = gpr.fit_gpr(train, gpr.FitOptions(cfg.fit.n_starts, cfg.fit.max_train, lhs_seed))
        lr = logit.fit_logit(logit.label_violations(train, v_limit))
        if lr.degenerate:
            self.health_states.append("WARNING")

        metrics = evaluate_models(gp, lr, test, v_limit)
        self.l.info(f"Held-out GPR R2 {metrics['gpr']['r2']:.4f}, accuracy {metrics['gpr']['accuracy']:.4f}; "
                    f"logit accuracy {metrics['logit']['accuracy']:.4f}.")

        bundle = ModelBundle(gp, lr, net.peak_load_mw, v_limit, metrics)
        self._write(MODELS_FILE, helper.pretty_json(bundle_to_dict(bundle, net.name, cfg.train_size, len(test))))
        self.l.info(f"Fit stage took {time.perf_counter() - start:.2f} s.")
        return bundle

    def solve(self, bundle: ModelBundle, risk_curve_only: bool = False) -> List[hc.HcResult]:
        """
        Answer all configured HC queries and write the HC report and the risk curve.
        """
        cfg = self.config
        start = time.perf_counter()
        results = []
        if not risk_curve_only:
            for q in cfg.hc.queries:
                for r in hc.solve_query(q, bundle.gp, bundle.lr, bundle.peak_load_mw):
                    label = f"{r.method}" + (f"/{r.bound}" if r.bound else "")
                    self.l.info(f"[{label}] HC {r.hc:.4f} of peak load ({r.hc_mw:.4f} MW) {list(r.diagnostics)}.")
                    results.append(r)
            self.health_states.append(hc.results_health(results))
            self._write(HC_REPORT_FILE, helper.pretty_json(hc.hc_report(results, bundle.peak_load_mw)))

        curve = hc.compute_risk_curve(bundle.gp, bundle.lr, cfg.hc.risk_curve_points, cfg.hc.v_limit)
        self._write(RISK_CURVE_FILE, hc.risk_curve_to_csv(curve))
        self.l.info(f"HC stage took {time.perf_counter() - start:.2f} s.")
        return results

    def write_manifest(self) -> None:
        net = self.load_network()
        self.artifacts.add(MANIFEST_FILE)
        manifest = {
            "schema_version": BUNDLE_SCHEMA_VERSION,
            "seed": self.config.seed,
            "config_hash": self.config.config_hash,
            "network": net.name,
            "peak_load_mw": net.peak_load_mw,
            "control_mode": self.config.control.mode,
            "counts": self.counts,
            "health": helper.get_highest_warning_level(self.health_states),
            "artifacts": sorted(self.artifacts),
        }
        helper.write_text(self.path(MANIFEST_FILE), helper.pretty_json(manifest))

    def run_pipeline(self) -> List[hc.HcResult]:
        records = self.simulate()
        start = time.perf_counter()
        bundle = self.fit(records)
        results = self.solve(bundle)
        self.l.info(f"Fit and HC stages took {time.perf_counter() - start:.2f} s together.")
        self.write_manifest()
        return results


def evaluate_models(gp: gpr.GprModel, lr: logit.LogitModel, test: Sequence[scenarios.SampleRecord],
                    v_limit: float) -> dict:
    """
    Held-out metrics: GPR regression errors, over-voltage classification accuracy of both models at the 0.5
    risk threshold, and the share of points on which both classifications agree.
    """
    x = np.array([r.x for r in test])
    v = np.array([r.v_max for r in test])
    labels = (v > v_limit).astype(int)
    mu, _ = gpr.predict_many(gp, x)
    gp_class = (mu > v_limit).astype(int)
    lr_prob = np.array([logit.logit_violation_prob(lr, xi) for xi in x])
    lr_class = (lr_prob > 0.5).astype(int)

    gp_metrics = gpr.regression_metrics(v, mu)
    gp_metrics["accuracy"] = float(np.mean(gp_class == labels)) if len(x) else 0.0
    return {
        "gpr": gp_metrics,
        "logit": {"accuracy": logit.classification_accuracy(labels, lr_prob)},
        "agreement": float(np.mean(gp_class == lr_class)) if len(x) else 0.0,
    }


def bundle_to_dict(bundle: ModelBundle, network_name: str, train_size: int, test_size: int) -> dict:
    return {
        "schema_version": BUNDLE_SCHEMA_VERSION,
        "network": network_name,
        "peak_load_mw": bundle.peak_load_mw,
        "v_limit": bundle.v_limit,
        "train_size": train_size,
        "test_size": test_size,
        "gpr": gpr.gpr_to_dict(bundle.gp),
        "logit": logit.logit_to_dict(bundle.lr),
        "metrics": bundle.metrics,
    }


def read_bundle(filename: str) -> ModelBundle:
    """
    Read a model bundle written by the fit stage.
    @return: Returns the bundle. Raises ConfigError if the file is missing or malformed.
    """
    try:
        with open(filename, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as e:
        raise ConfigError(f"Cannot read model bundle {filename}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Model bundle {filename} is not valid JSON: {e.msg}") from e

    if not isinstance(doc, dict) or doc.get("schema_version") != BUNDLE_SCHEMA_VERSION:
        raise ConfigError(f"Model bundle {filename} has an unsupported schema.")
    try:
        return ModelBundle(gpr.gpr_from_dict(doc["gpr"]), logit.logit_from_dict(doc["logit"]),
                           float(doc["peak_load_mw"]), float(doc["v_limit"]), doc.get("metrics", {}))
    except FitError as e:
        raise ConfigError(f"Model bundle {filename}: {e}") from e
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"Model bundle {filename} is malformed: {e}") from e


def parse_load_scales(text: str) -> List[float]:
    """
    Parse a comma separated list of positive load scale factors.
    @return: Returns the factors in the given order. Raises ConfigError.
    """
    try:
        scales = [float(s) for s in text.split(",") if s.strip()]
    except ValueError as e:
        raise ConfigError(f"Load scales must be numbers: {e}") from e
    if not scales or any(not s > 0 for s in scales):
        raise ConfigError(f"Load scales must be positive numbers, got '{text}'.")
    return scales


def run_sweep(config: PipelineConfig, load_scales: Sequence[float]) -> List[Tuple[float, float, hc.HcResult]]:
    """
    Peak-load sensitivity study: run the whole pipeline once per load scale, each into its own
    subdirectory of the output directory, and collect the HC results in the sweep CSV.
    @param config: A verified pipeline configuration; its scenario.load_scale is replaced.
    @param load_scales: Factors applied to every bus load.
    @return: Returns (load_scale, peak_load_mw, result) tuples.
    """
    l = logging.getLogger("Sweep")
    rows = []
    for scale in load_scales:
        out = os.path.join(config.output_dir, f"load_scale_{helper.format_float(scale)}")
        sub = dataclasses.replace(config, scenario=dataclasses.replace(config.scenario, load_scale=scale),
                                  output_dir=out)
        if not sub.verify():
            raise ConfigError(f"Load scale {scale} gives an unusable configuration.")
        app = HostCap(sub)
        results = app.run_pipeline()
        peak = app.load_network().peak_load_mw
        for r in results:
            label = f"{r.method}" + (f"/{r.bound}" if r.bound else "")
            l.info(f"[x{scale:g}] [{label}] HC {r.hc_mw:.4f} MW at peak load {peak:.4f} MW.")
            rows.append((scale, peak, r))

    filename = os.path.join(config.output_dir, SWEEP_FILE)
    helper.write_text(filename, hc.sweep_to_csv(rows))
    l.info(f"Wrote {filename}.")
    return rows


def validate(network_file: str, pcc_voltage: Optional[float]) -> int:
    """
    Print the diagnostics of a network file.
    @return: Returns the exit code, 0 if the network is valid.
    """
    net = netmodel.load_network(network_file, pcc_voltage, strict=False)
    diags = netmodel.validate_network(net)
    print(f"+ {net.name}: {net.n_bus} buses, {len(net.branches)} branches, "
          f"peak load {net.peak_load_mw:g} MW / {net.peak_load_mvar:g} MVar.")
    for d in diags:
        print(f"  {d.invariant:18} {d}")
    print("+ Network is valid." if not diags else f"+ {len(diags)} problem(s) found.")
    health = netmodel.network_health(diags)
    print(f"+ Health : {health}")
    return EXIT_OK if health == "OK" else EXIT_SIMULATION


def cmd_parser(argv: Optional[Sequence[str]] = None) -> argparse.Namespace:

    parser = argparse.ArgumentParser(description='Chance-constrained PV hosting capacity estimation.')

    parser.add_argument('--config', metavar='FILE', help='Pipeline configuration (JSON).')
    parser.add_argument('--seed', metavar='SEED', type=int, help='Override the random seed.')
    parser.add_argument('--out', metavar='DIR', help='Override the output directory.')
    parser.add_argument('--set', metavar='KEY=VALUE', action='append', default=[], dest='overrides',
                        help='Override a config key by dotted path, e.g. scenario.copula.rho=0.3.')
    parser.add_argument('--log-level', metavar='LEVEL', help='Override the log level from the configuration.')

    subparsers = parser.add_subparsers()

    parser_a = subparsers.add_parser('simulate', help='Run the probabilistic load flow and write the samples CSV')
    parser_a.set_defaults(simulate=True)

    parser_b = subparsers.add_parser('fit', help='Fit GPR and logit models on a samples CSV')
    parser_b.add_argument('--samples', metavar='FILE', help='Samples CSV (default: samples.csv in the output dir).')
    parser_b.set_defaults(fit=True)

    parser_c = subparsers.add_parser('hc', help='Solve the configured HC queries')
    parser_c.add_argument('--models', metavar='FILE', help='Model bundle (default: models.json in the output dir).')
    parser_c.set_defaults(hc=True)

    parser_d = subparsers.add_parser('pipeline', help='Run simulate, fit and hc in sequence')
    parser_d.set_defaults(pipeline=True)

    parser_e = subparsers.add_parser('risk-curve', help='Write only the risk-curve CSV')
    parser_e.add_argument('--models', metavar='FILE', help='Model bundle (default: models.json in the output dir).')
    parser_e.set_defaults(risk_curve=True)

    parser_f = subparsers.add_parser('validate', help='Print the diagnostics of a network file')
    parser_f.add_argument('--network', metavar='FILE', help='Network file (default: the configured network).')
    parser_f.set_defaults(validate=True)

    parser_g = subparsers.add_parser('sweep', help='Run the pipeline for several peak loads and tabulate the HC')
    parser_g.add_argument('--load-scales', metavar='LIST', default=DEFAULT_LOAD_SCALES,
                          help=f'Comma separated load scale factors (default: {DEFAULT_LOAD_SCALES}).')
    parser_g.set_defaults(sweep=True)

    return parser.parse_args(argv)


def setup_logging(level_name: str) -> None:
    """
    Log to stdout with the root logger set to the given level.
    """
    log_level = logging.getLevelName(level_name.upper())
    if not isinstance(log_level, int):
        log_level = logging.INFO

    root = logging.getLogger()
    root.setLevel(log_level)

    for handler in list(root.handlers):
        if getattr(handler, "hostcap", False):
            root.removeHandler(handler)

    cons_handler = logging.StreamHandler(sys.stdout)
    cons_handler.setLevel(log_level)
    cons_handler.setFormatter(
        logging.Formatter("%(asctime)s %(levelname)s %(name)s - %(message)s")
    )
    cons_handler.hostcap = True
    root.addHandler(cons_handler)


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Parse the command line, run the selected stage and map errors to exit codes.
    @return: Returns the process exit code.
    """
    args = cmd_parser(argv)
    setup_logging(args.log_level or "INFO")
    l = logging.getLogger("Main")

    try:
        if 'validate' in args and args.network:
            return validate(args.network, None)

        if not args.config:
            raise ConfigError("No configuration given, use --config FILE.")
        needs_fit = not ('simulate' in args or 'validate' in args)
        config = HostCap.read_config(args.config, args.overrides, args.seed, args.out, needs_fit)
        if not args.log_level:
            setup_logging(config.log_level)
        app = HostCap(config)

        if 'validate' in args:
            return validate(config.network_path, config.pcc_voltage)

        elif 'simulate' in args:
            app.simulate()
            app.write_manifest()

        elif 'fit' in args:
            app.fit(scenarios.read_samples_csv(args.samples or app.path(SAMPLES_FILE)))

        elif 'hc' in args or 'risk_curve' in args:
            bundle = read_bundle(args.models or app.path(MODELS_FILE))
            app.solve(bundle, risk_curve_only='risk_curve' in args)

        elif 'pipeline' in args:
            app.run_pipeline()

        elif 'sweep' in args:
            run_sweep(config, parse_load_scales(args.load_scales))

        else:
            raise ConfigError("No command given, see --help.")

    except HostCapError as e:
        l.critical(str(e))
        return e.exit_code
    except Exception:
        l.exception("Unexpected error.")
        return EXIT_UNEXPECTED

    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
