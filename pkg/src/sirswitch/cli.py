"""Scenario-driven command line: compute thresholds, simulate paths, run
ensembles, and emit the CSV/JSON artifacts consumed by the plotting
component.

Exit codes: 0 success, 2 config error, 3 runtime numerical error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ctmc import stationary_distribution
from .engine import NonFiniteState, path_rng, simulate_path, write_path_csv
from .model import as_switching_sde, compare_thresholds, compute_lambda, eval_g
from .montecarlo import (
    MonteCarloError,
    run_ensemble,
    stats_to_dict,
    write_samples_csv,
)
from .scenario import Scenario, ScenarioError, load_scenario

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _metadata(scenario: Scenario) -> dict:
    return {
        "tool_version": __version__,
        "scenario": scenario.name,
        "scenario_hash": scenario.source_hash,
        "seed": scenario.sim.seed,
    }


def _out_dir(scenario: Scenario) -> Path:
    out = Path(scenario.output_dir or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _lambda_report(scenario: Scenario) -> dict:
    pi = stationary_distribution(scenario.chain).pi
    if scenario.model is not None:
        model = scenario.model
        gvals = [eval_g(model, model.K, 0.0, i) for i in range(model.m0)]
        lam = compute_lambda(model)
    elif scenario.preset_name == "ex8":
        p = scenario.preset_params
        mu, beta, lam_rec, sigma = (np.asarray(p[k], dtype=float)
                                    for k in ("mu", "beta", "lam", "sigma"))
        gvals = (beta - mu - lam_rec - 0.5 * sigma ** 2).tolist()
        lam = float(pi @ np.asarray(gvals))
    else:
        raise ScenarioError("preset", "lambda requires a SIRS model or a known preset")
    return {"lambda": float(lam), "pi": pi.tolist(),
            "g_at_dfe": [float(g) for g in gvals], "meta": _metadata(scenario)}


def cmd_lambda(scenario: Scenario) -> int:
    report = _lambda_report(scenario)
    print(f"lambda = {report['lambda']:.6g}")
    print("pi =", " ".join(f"{p:.6g}" for p in report["pi"]),
          f"(sum = {sum(report['pi']):.6g})")
    for i, g in enumerate(report["g_at_dfe"]):
        print(f"g(K, 0, {i}) = {g:.6g}")
    _write_json(_out_dir(scenario) / f"{scenario.name}_lambda.json", report)
    return EXIT_OK


def cmd_simulate(scenario: Scenario) -> int:
    sde = scenario.sde if scenario.sde is not None else as_switching_sde(scenario.model)
    out = _out_dir(scenario)
    meta = _metadata(scenario)
    files = []
    for p in range(scenario.n_paths):
        rng = path_rng(scenario.sim.seed, p)
        path = simulate_path(sde, scenario.chain, np.asarray(scenario.init),
                             scenario.initial_regime, scenario.sim, rng)
        dest = out / f"{scenario.name}_path{p:03d}.csv"
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            write_path_csv(path, fh, metadata={**meta, "path_index": p})
        files.append(dest)
    for dest in files:
        print(dest)
    return EXIT_OK


def cmd_ensemble(scenario: Scenario) -> int:
    if scenario.n_paths < 2:
        raise ScenarioError("sim.n_paths", "ensemble requires n_paths >= 2")
    target = scenario.model if scenario.model is not None else scenario.sde
    stats = run_ensemble(target, scenario.sim, scenario.n_paths, deltas=scenario.deltas,
                         init=np.asarray(scenario.init),
                         initial_regime=scenario.initial_regime, chain=scenario.chain)
    doc = stats_to_dict(stats)
    doc["meta"] = _metadata(scenario)
    try:
        doc["lambda"] = _lambda_report(scenario)["lambda"]
    except ScenarioError:
        pass
    out = _out_dir(scenario)
    _write_json(out / f"{scenario.name}_ensemble.json", doc)
    with open(out / f"{scenario.name}_samples.csv", "w", encoding="utf-8", newline="") as fh:
        write_samples_csv(stats, fh, metadata=_metadata(scenario))
    if "lyapunov" in doc["estimators"]:
        est = doc["estimators"]["lyapunov"]
        print(f"lyapunov mean = {est['mean']:.6g} (se {est['se']:.3g})")
    for d, entry in doc["persistence"].items():
        print(f"persistence(I >= {d}) = {entry['frequency']:.4g}")
    print(out / f"{scenario.name}_ensemble.json")
    return EXIT_OK


def cmd_compare(scenario: Scenario) -> int:
    if scenario.preset_name is None:
        raise ScenarioError("preset", "compare requires a literature preset scenario "
                                      "('ex8' or 'ex17')")
    params = {k: v for k, v in scenario.preset_params.items()}
    report = compare_thresholds(scenario.preset_name, **params)
    doc = report.to_dict()
    doc["meta"] = _metadata(scenario)
    print(f"preset {report.preset}: lambda = {report.lam:.6g}")
    for key, value in report.details.items():
        print(f"  {key} = {value}")
    for note in report.notes:
        print(f"  note: {note}")
    _write_json(_out_dir(scenario) / f"{scenario.name}_compare.json", doc)
    return EXIT_OK


def cmd_validate(scenario: Scenario) -> int:
    print(f"scenario '{scenario.name}' is valid "
          f"(m0={scenario.chain.m0}, seed={scenario.sim.seed})")
    return EXIT_OK


_COMMANDS = {
    "lambda": cmd_lambda,
    "simulate": cmd_simulate,
    "ensemble": cmd_ensemble,
    "compare": cmd_compare,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sirswitch",
        description="Regime-switching stochastic SIRS simulation toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, help="scenario YAML file")
        p.add_argument("--out", default=None, help="output directory override")
        p.add_argument("--paths", type=int, default=None, help="n_paths override")
        p.add_argument("--seed", type=int, default=None, help="root seed override")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        scenario = load_scenario(args.scenario,
                                 overrides={"out": args.out, "n_paths": args.paths,
                                            "seed": args.seed})
        return _COMMANDS[args.command](scenario)
    except (ScenarioError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFiniteState, MonteCarloError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
