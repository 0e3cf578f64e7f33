"""Readers for the sirswitch artifact formats.

Path CSVs and samples CSVs start with ``# key=value`` metadata comment
lines followed by a header row; ensemble and threshold reports are plain
JSON documents. Every reader validates the columns/keys it needs and
raises :class:`SchemaMismatch` naming the offending column when the file
does not match.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class SchemaMismatch(Exception):
    """Input file does not match the documented artifact schema."""

    def __init__(self, path, column, message):
        self.path = str(path)
        self.column = column
        super().__init__(f"{path}: column '{column}': {message}")


@dataclass(frozen=True)
class PathTable:
    """One simulated trajectory: t, regime, S, I, R and optionally lnI."""

    t: np.ndarray
    regime: np.ndarray
    S: np.ndarray
    I: np.ndarray
    R: np.ndarray
    lnI: np.ndarray | None
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SamplesTable:
    """Per-path ensemble samples (one row per Monte Carlo path)."""

    path: np.ndarray
    lyapunov: np.ndarray
    terminal_I: np.ndarray
    time_average_I: np.ndarray
    occupation: np.ndarray  # shape (n_paths, m0)
    metadata: dict = field(default_factory=dict)


@dataclass(frozen=True)
class EnsembleSummary:
    """Estimator table from an ensemble JSON report."""

    n_paths: int
    horizon: float
    persistence: dict  # delta (str) -> {"frequency": f, "ci95": [lo, hi]}
    estimators: dict
    lam: float | None
    name: str


def _read_commented_csv(source):
    """Split a CSV file into (metadata dict, header list, data rows)."""
    path = Path(source)
    metadata = {}
    rows = []
    header = None
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body:
                    key, _, value = body.partition("=")
                    metadata[key.strip()] = value.strip()
                continue
            if header is None:
                header = next(csv.reader([line]))
            else:
                rows.append(next(csv.reader([line])))
    if header is None:
        raise SchemaMismatch(path, "<header>", "file is empty or has no header row")
    return metadata, header, rows


def _columns(path, header, rows, required):
    if not rows:
        raise SchemaMismatch(path, "<data>", "no data rows")
    index = {}
    for name in required:
        if name not in header:
            raise SchemaMismatch(path, name, "required column is missing")
        index[name] = header.index(name)
    data = {}
    for name, j in index.items():
        try:
            data[name] = np.array([float(r[j]) for r in rows])
        except (ValueError, IndexError):
            raise SchemaMismatch(path, name, "non-numeric or missing value") from None
    return data


def read_path_csv(source) -> PathTable:
    """Parse a trajectory CSV written by ``sirswitch simulate``."""
    metadata, header, rows = _read_commented_csv(source)
    data = _columns(source, header, rows, ["t", "regime", "S", "I", "R"])
    lnI = None
    if "lnI" in header:
        lnI = _columns(source, header, rows, ["lnI"])["lnI"]
    return PathTable(t=data["t"], regime=data["regime"].astype(int),
                     S=data["S"], I=data["I"], R=data["R"], lnI=lnI,
                     metadata=metadata)


def read_samples_csv(source) -> SamplesTable:
    """Parse a per-path samples CSV written by ``sirswitch ensemble``."""
    metadata, header, rows = _read_commented_csv(source)
    data = _columns(source, header, rows,
                    ["path", "lyapunov", "terminal_I", "time_average_I"])
    occ_cols = sorted((c for c in header if c.startswith("occupation_")),
                      key=lambda c: int(c.split("_")[1]))
    if not occ_cols:
        raise SchemaMismatch(source, "occupation_0", "required column is missing")
    occ = _columns(source, header, rows, occ_cols)
    occupation = np.column_stack([occ[c] for c in occ_cols])
    return SamplesTable(path=data["path"].astype(int), lyapunov=data["lyapunov"],
                        terminal_I=data["terminal_I"],
                        time_average_I=data["time_average_I"],
                        occupation=occupation, metadata=metadata)


def read_ensemble_json(source) -> EnsembleSummary:
    """Parse an ensemble summary JSON written by ``sirswitch ensemble``."""
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(path, "<document>", f"not valid JSON ({exc})") from None
    for key in ("n_paths", "horizon", "persistence", "estimators"):
        if key not in doc:
            raise SchemaMismatch(path, key, "required key is missing")
    name = doc.get("meta", {}).get("scenario", path.stem)
    return EnsembleSummary(n_paths=int(doc["n_paths"]), horizon=float(doc["horizon"]),
                           persistence=doc["persistence"], estimators=doc["estimators"],
                           lam=doc.get("lambda"), name=name)


def read_lambda_json(source) -> float:
    """Extract the threshold value from a ``sirswitch lambda`` report."""
    path = Path(source)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(path, "<document>", f"not valid JSON ({exc})") from None
    if "lambda" not in doc:
        raise SchemaMismatch(path, "lambda", "required key is missing")
    return float(doc["lambda"])
