"""Scenario files: YAML documents describing a model (or literature preset)
plus simulation settings.  Validation errors carry the offending field path
so experiments are reviewable as text diffs."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np
import yaml

from .ctmc import CtmcError, GeneratorMatrix, validate_generator
from .engine import SimConfig
from .model import (
    Incidence,
    ModelError,
    SirsModel,
    SwitchingSde,
    preset_ex8,
    preset_ex17,
)


class ScenarioError(ValueError):
    """Config parse/validation error; message includes the field path."""

    def __init__(self, path: str, message: str):
        self.field_path = path
        super().__init__(f"{path}: {message}")


_SIM_DEFAULTS = dict(dt=1e-3, record_stride=1, n_paths=200, deltas=(),
                     initial_regime=0, log_infected=True)

_EX8_PARAMS = ("mu", "beta", "gamma", "lam", "sigma", "Q")
_EX17_PARAMS = ("Lambda", "mu", "beta", "alpha", "delta", "gamma", "eps", "sigma")


@dataclass(frozen=True)
class Scenario:
    name: str
    sim: SimConfig
    n_paths: int
    deltas: tuple
    init: tuple
    initial_regime: int
    output_dir: Optional[str]
    preset_name: Optional[str] = None
    preset_params: dict = field(default_factory=dict)
    model: Optional[SirsModel] = None
    sde: Optional[SwitchingSde] = None
    chain: Optional[GeneratorMatrix] = None
    source_hash: str = ""

    @property
    def K(self) -> float:
        if self.model is not None:
            return self.model.K
        return self.sde.region_cap if self.sde is not None else 1.0


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ScenarioError(f"{path}.{key}", "missing required field")
    return mapping[key]


def _finite(value, path: str) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise ScenarioError(path, f"not a number: {value!r}") from None
    if not np.isfinite(v):
        raise ScenarioError(path, f"not finite: {value!r}")
    return v


def _positive(value, path: str) -> float:
    v = _finite(value, path)
    if v <= 0:
        raise ScenarioError(path, f"must be positive, got {v}")
    return v


def _build_model(block: dict) -> SirsModel:
    K = _positive(_require(block, "K", "model"), "model.K")
    Q_raw = _require(block, "Q", "model")
    try:
        chain = validate_generator(Q_raw)
    except CtmcError as exc:
        raise ScenarioError("model.Q", str(exc)) from exc
    regimes = _require(block, "regimes", "model")
    if not isinstance(regimes, list) or not regimes:
        raise ScenarioError("model.regimes", "must be a non-empty list")
    rates = {"mu": [], "rho": [], "gamma1": [], "gamma2": []}
    f1, f2 = [], []
    for idx, reg in enumerate(regimes):
        base = f"model.regimes[{idx}]"
        for name in rates:
            rates[name].append(_positive(_require(reg, name, base), f"{base}.{name}"))
        for which, dest in (("f1", f1), ("f2", f2)):
            cfg = _require(reg, which, base)
            try:
                dest.append(Incidence.from_config(cfg))
            except ModelError as exc:
                raise ScenarioError(f"{base}.{which}", str(exc)) from exc
    try:
        return SirsModel(K=K, chain=chain, f1=tuple(f1), f2=tuple(f2), **rates)
    except ModelError as exc:
        raise ScenarioError("model", str(exc)) from exc


def _build_preset(block: dict):
    name = _require(block, "name", "preset")
    params = dict(block.get("params", {}))
    if name == "ex8":
        missing = [k for k in _EX8_PARAMS if k not in params]
        if missing:
            raise ScenarioError("preset.params", f"ex8 requires fields {missing}")
        try:
            chain = validate_generator(params["Q"])
            sde = preset_ex8(params["mu"], params["beta"], params["gamma"],
                             params["lam"], params["sigma"], chain)
        except (CtmcError, ModelError) as exc:
            raise ScenarioError("preset.params", str(exc)) from exc
        return name, params, None, sde, chain
    if name == "ex17":
        missing = [k for k in _EX17_PARAMS if k not in params]
        if missing:
            raise ScenarioError("preset.params", f"ex17 requires fields {missing}")
        try:
            model = preset_ex17(**{k: _finite(params[k], f"preset.params.{k}")
                                   for k in _EX17_PARAMS})
        except ModelError as exc:
            raise ScenarioError("preset.params", str(exc)) from exc
        return name, params, model, None, model.chain
    raise ScenarioError("preset.name", f"unknown preset {name!r} (expected 'ex8' or 'ex17')")


def load_scenario(path, overrides: Optional[dict] = None) -> Scenario:
    """Parse and validate a scenario YAML file."""
    with open(path, "rb") as fh:
        raw = fh.read()
    source_hash = hashlib.sha256(raw).hexdigest()
    try:
        doc = yaml.safe_load(raw)
    except yaml.YAMLError as exc:
        raise ScenarioError(str(path), f"YAML parse error: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioError(str(path), "scenario must be a mapping")
    return build_scenario(doc, source_hash=source_hash, overrides=overrides)


def build_scenario(doc: dict, source_hash: str = "", overrides: Optional[dict] = None) -> Scenario:
    overrides = overrides or {}
    name = doc.get("name")
    if not name:
        raise ScenarioError("name", "missing required field")

    has_model = "model" in doc
    has_preset = "preset" in doc
    if has_model == has_preset:
        raise ScenarioError("model", "exactly one of 'model' or 'preset' is required")
    preset_name, preset_params, model, sde, chain = None, {}, None, None, None
    if has_model:
        model = _build_model(doc["model"])
        chain = model.chain
    else:
        preset_name, preset_params, model, sde, chain = _build_preset(doc["preset"])

    sim_block = dict(doc.get("sim", {}))
    if "seed" in overrides and overrides["seed"] is not None:
        sim_block["seed"] = overrides["seed"]
    if "seed" not in sim_block:
        raise ScenarioError("sim.seed", "missing required field (no silent nondeterminism)")
    if "n_paths" in overrides and overrides["n_paths"] is not None:
        sim_block["n_paths"] = overrides["n_paths"]

    merged = {**_SIM_DEFAULTS, **sim_block}
    dt = _positive(merged["dt"], "sim.dt")
    horizon = _positive(_require(merged, "horizon", "sim"), "sim.horizon")
    try:
        seed = int(merged["seed"])
    except (TypeError, ValueError):
        raise ScenarioError("sim.seed", f"not an integer: {merged['seed']!r}") from None
    stride = int(merged["record_stride"])
    n_paths = int(merged["n_paths"])
    deltas = tuple(_finite(d, f"sim.deltas[{j}]") for j, d in enumerate(merged["deltas"]))
    if any(d < 0 for d in deltas):
        raise ScenarioError("sim.deltas", "thresholds must be nonnegative")
    log_infected = bool(merged["log_infected"])
    initial_regime = int(merged["initial_regime"])
    if not 0 <= initial_regime < chain.m0:
        raise ScenarioError("sim.initial_regime", f"out of range for m0={chain.m0}")

    K = model.K if model is not None else (sde.region_cap or 1.0)
    init_raw = merged.get("init")
    if init_raw is None:
        init = (0.7 * K, 0.2 * K, 0.1 * K)
    else:
        if len(init_raw) != 3:
            raise ScenarioError("sim.init", "expected [S, I, R]")
        init = tuple(_finite(v, f"sim.init[{j}]") for j, v in enumerate(init_raw))
        if any(v < 0 for v in init) or sum(init) > K * (1 + 1e-12):
            raise ScenarioError("sim.init", f"initial state must lie in the simplex with cap K={K}")
    if log_infected and init[1] <= 0:
        log_infected = False  # boundary start: I stays 0, log channel off

    try:
        cfg = SimConfig(dt=dt, horizon=horizon, seed=seed, record_stride=stride,
                        log_infected=log_infected)
    except ValueError as exc:
        raise ScenarioError("sim", str(exc)) from exc
    output_dir = overrides.get("out") or doc.get("output_dir")
    return Scenario(name=str(name), sim=cfg, n_paths=n_paths, deltas=deltas,
                    init=init, initial_regime=initial_regime, output_dir=output_dir,
                    preset_name=preset_name, preset_params=preset_params,
                    model=model, sde=sde, chain=chain, source_hash=source_hash)
