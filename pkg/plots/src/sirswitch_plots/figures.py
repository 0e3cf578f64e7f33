"""Figure construction for the three supported kinds.

All figures are built strictly from artifact files -- nothing is
re-simulated here. ``build_figure`` returns the matplotlib Figure (handy
for tests); ``render`` writes it to disk deterministically: fixed dpi, no
embedded timestamps or software tags, so re-rendering the same inputs
yields byte-identical images.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .io import (
    SchemaMismatch,
    read_ensemble_json,
    read_path_csv,
    read_samples_csv,
)

KINDS = ("trajectory", "lyapunov", "persistence")

_REGIME_COLORS = plt.get_cmap("tab10").colors


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input artifact(s), figure kind, destination image."""

    inputs: tuple
    kind: str
    output: str
    lam: Optional[float] = None  # threshold reference value, if any

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown figure kind '{self.kind}' "
                             f"(expected one of {', '.join(KINDS)})")
        if not self.inputs:
            raise ValueError("at least one input file is required")


def _sniff_csv(source) -> str:
    """Classify a CSV artifact by its header: 'path' or 'samples'."""
    with open(source, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                continue
            header = next(csv.reader([line]))
            if "lyapunov" in header:
                return "samples"
            if "lnI" in header or "I" in header:
                return "path"
            raise SchemaMismatch(source, "<header>",
                                 "neither a trajectory nor a samples table")
    raise SchemaMismatch(source, "<header>", "file is empty or has no header row")


def _shade_regimes(ax, t, regime):
    """One translucent background band per maximal constant-regime run."""
    change = np.nonzero(np.diff(regime))[0]
    starts = np.concatenate(([0], change + 1))
    ends = np.concatenate((change, [len(t) - 1]))
    for s, e in zip(starts, ends):
        ax.axvspan(t[s], t[e], color=_REGIME_COLORS[regime[s] % len(_REGIME_COLORS)],
                   alpha=0.12, linewidth=0, gid="regime_band")


def _lambda_line(ax, lam, horizontal=True):
    draw = ax.axhline if horizontal else ax.axvline
    draw(lam, color="crimson", linestyle="--", linewidth=1.2,
         gid="lambda_ref", label=f"threshold = {lam:.6g}")


def _fig_trajectory(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    table = read_path_csv(spec.inputs[0])
    _shade_regimes(ax, table.t, table.regime)
    ax.plot(table.t, table.S, label="S", color="tab:blue")
    ax.plot(table.t, table.I, label="I", color="tab:red")
    ax.plot(table.t, table.R, label="R", color="tab:green")
    ax.set_xlabel("t")
    ax.set_ylabel("compartment size")
    ax.set_xlim(table.t[0], table.t[-1])
    title = table.metadata.get("scenario", Path(spec.inputs[0]).stem)
    ax.set_title(f"{title}: sample trajectory")
    ax.legend(loc="upper right")
    return fig


def _fig_lyapunov(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    flavor = _sniff_csv(spec.inputs[0])
    if flavor == "samples":
        table = read_samples_csv(spec.inputs[0])
        ax.hist(table.lyapunov, bins=max(10, int(np.sqrt(table.lyapunov.size))),
                color="tab:blue", alpha=0.75)
        ax.set_xlabel("ln I(T) / T")
        ax.set_ylabel("paths")
        if spec.lam is not None:
            _lambda_line(ax, spec.lam, horizontal=False)
        title = table.metadata.get("scenario", Path(spec.inputs[0]).stem)
        ax.set_title(f"{title}: terminal growth-rate samples")
    else:
        for source in spec.inputs:
            table = read_path_csv(source)
            if table.lnI is None:
                raise SchemaMismatch(source, "lnI", "required column is missing")
            positive = table.t > 0
            ax.plot(table.t[positive], table.lnI[positive] / table.t[positive],
                    linewidth=0.9,
                    label=f"path {table.metadata.get('path_index', '?')}")
        ax.set_xlabel("t")
        ax.set_ylabel("ln I(t) / t")
        if spec.lam is not None:
            _lambda_line(ax, spec.lam, horizontal=True)
        title = table.metadata.get("scenario", Path(spec.inputs[0]).stem)
        ax.set_title(f"{title}: growth-rate convergence")
    ax.legend(loc="upper right")
    return fig


def _fig_persistence(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(8, 4.5))
    width = 0.8 / len(spec.inputs)
    labels = None
    for k, source in enumerate(spec.inputs):
        summary = read_ensemble_json(source)
        deltas = sorted(summary.persistence, key=float)
        freqs = [summary.persistence[d]["frequency"] for d in deltas]
        los = [summary.persistence[d]["ci95"][0] for d in deltas]
        his = [summary.persistence[d]["ci95"][1] for d in deltas]
        x = np.arange(len(deltas)) + k * width
        yerr = np.vstack([np.asarray(freqs) - np.asarray(los),
                          np.asarray(his) - np.asarray(freqs)])
        ax.bar(x, freqs, width=width, label=summary.name, gid="persistence_bar")
        ax.errorbar(x, freqs, yerr=yerr, fmt="none", ecolor="black", capsize=4)
        labels = [f"{float(d):g}" for d in deltas]
    ax.set_xticks(np.arange(len(labels)) + 0.4 - width / 2)
    ax.set_xticklabels(labels)
    ax.set_xlabel("threshold level delta")
    ax.set_ylabel("frequency of I(T) >= delta")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("persistence frequency (95% CI)")
    ax.legend(loc="lower right")
    return fig


_BUILDERS = {
    "trajectory": _fig_trajectory,
    "lyapunov": _fig_lyapunov,
    "persistence": _fig_persistence,
}


def build_figure(spec: FigureSpec):
    """Construct (but do not save) the figure for *spec*."""
    for source in spec.inputs:
        if not Path(source).is_file():
            raise FileNotFoundError(source)
    return _BUILDERS[spec.kind](spec)


def render(spec: FigureSpec) -> Path:
    """Build the figure and write it to ``spec.output``; returns the path."""
    fig = build_figure(spec)
    out = Path(spec.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    try:
        # Strip the software tag so identical inputs give identical bytes.
        fig.savefig(out, dpi=120, metadata={"Software": None})
    finally:
        plt.close(fig)
    return out
