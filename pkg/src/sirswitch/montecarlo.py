"""Seeded Monte Carlo ensembles and the estimators that operationalize the
extinction/permanence asymptotics: the Lyapunov exponent of the infected
compartment, persistence frequencies, time-average persistence, and regime
occupation diagnostics."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .ctmc import StationaryDistribution
from .engine import EngineError, HybridPath, SimConfig, path_rng, simulate_path
from .model import SirsModel, SwitchingSde, as_switching_sde


class MonteCarloError(RuntimeError):
    pass


class MissingLogChannel(MonteCarloError):
    pass


class UnknownDelta(MonteCarloError):
    pass


Z_95 = 1.959963984540054  # two-sided 95% normal quantile


@dataclass(frozen=True)
class PathResult:
    """Per-path summaries; mergeable in any order (keyed by path index)."""

    index: int
    lyapunov: Optional[float]  # ln I(T) / T
    terminal_infected: float
    time_average_infected: float
    occupation: np.ndarray
    max_excess: float
    max_negative: float


@dataclass(frozen=True)
class EnsembleStats:
    """Aggregated Monte Carlo summaries over independent per-path streams."""

    n_paths: int
    horizon: float
    deltas: tuple
    lyapunov_samples: Optional[np.ndarray]
    terminal_infected: np.ndarray
    time_average_infected: np.ndarray
    occupation: np.ndarray  # (n_paths, m0)
    max_excess: float
    max_negative: float
    root_seed: int = 0

    @staticmethod
    def from_results(results: Sequence[PathResult], horizon: float,
                     deltas: Sequence[float], root_seed: int = 0) -> "EnsembleStats":
        ordered = sorted(results, key=lambda r: r.index)
        if len(ordered) != len({r.index for r in ordered}):
            raise MonteCarloError("duplicate path indices in merge")
        lyap = None
        if all(r.lyapunov is not None for r in ordered):
            lyap = np.array([r.lyapunov for r in ordered])
        return EnsembleStats(
            n_paths=len(ordered),
            horizon=horizon,
            deltas=tuple(deltas),
            lyapunov_samples=lyap,
            terminal_infected=np.array([r.terminal_infected for r in ordered]),
            time_average_infected=np.array([r.time_average_infected for r in ordered]),
            occupation=np.array([r.occupation for r in ordered]),
            max_excess=max((r.max_excess for r in ordered), default=0.0),
            max_negative=max((r.max_negative for r in ordered), default=0.0),
            root_seed=root_seed,
        )

    def persistence_indicators(self, delta: float) -> np.ndarray:
        if not any(np.isclose(delta, d) for d in self.deltas):
            raise UnknownDelta(f"threshold {delta} was not requested at run time "
                               f"(available: {self.deltas})")
        return (self.terminal_infected >= delta).astype(float)


def _mean_se(samples: np.ndarray) -> tuple:
    mean = float(np.mean(samples))
    se = float(np.std(samples, ddof=1) / np.sqrt(samples.size))
    return mean, se


def summarize_path(path: HybridPath, index: int = 0) -> PathResult:
    """Reduce a simulated path to its ensemble summaries."""
    I = path.states[:, 1]
    T = float(path.times[-1])
    lyap = None
    if path.log_infected is not None:
        lyap = float(path.log_infected[-1]) / T
    time_avg = float(np.trapezoid(I, path.times) / T)
    occ = path.regime_path.occupation_fractions()
    return PathResult(index=index, lyapunov=lyap, terminal_infected=float(I[-1]),
                      time_average_infected=time_avg, occupation=occ,
                      max_excess=path.max_excess, max_negative=path.max_negative)


def run_ensemble(model_or_sde: Union[SirsModel, SwitchingSde], cfg: SimConfig,
                 n_paths: int, deltas: Sequence[float] = (),
                 init=None, initial_regime: int = 0,
                 chain=None) -> EnsembleStats:
    """Simulate ``n_paths`` independent paths; deterministic given cfg.seed.

    Per-path streams are derived from the root seed by the documented
    splitting rule (path index mixed into the seed sequence).
    """
    if n_paths < 2:
        raise MonteCarloError("n_paths must be >= 2 (standard errors undefined otherwise)")
    if isinstance(model_or_sde, SirsModel):
        sde = as_switching_sde(model_or_sde)
        chain = model_or_sde.chain
    else:
        sde = model_or_sde
        if chain is None:
            raise MonteCarloError("a generator matrix is required for a bare SwitchingSde")
    if init is None:
        if sde.region_cap is None:
            raise MonteCarloError("an initial state is required")
        K = sde.region_cap
        init = np.array([0.7 * K, 0.2 * K, 0.1 * K]) if sde.dim == 3 else np.full(sde.dim, K / sde.dim)
    results = []
    for p in range(n_paths):
        rng = path_rng(cfg.seed, p)
        try:
            path = simulate_path(sde, chain, init, initial_regime, cfg, rng)
        except EngineError as exc:
            raise MonteCarloError(f"path {p} failed: {exc}") from exc
        results.append(summarize_path(path, index=p))
    return EnsembleStats.from_results(results, horizon=float(cfg.n_steps * cfg.dt),
                                      deltas=deltas, root_seed=cfg.seed)


def estimate_lyapunov(stats: EnsembleStats) -> tuple:
    """Sample mean and standard error of ln I(T)/T over the ensemble."""
    if stats.lyapunov_samples is None:
        raise MissingLogChannel("ensemble was run without the log-infected channel")
    return _mean_se(stats.lyapunov_samples)


def estimate_persistence(stats: EnsembleStats, delta: float) -> tuple:
    """Empirical frequency of I(T) >= delta with a 95% normal CI."""
    ind = stats.persistence_indicators(delta)
    freq = float(np.mean(ind))
    se = float(np.sqrt(freq * (1.0 - freq) / stats.n_paths))
    return freq, (max(freq - Z_95 * se, 0.0), min(freq + Z_95 * se, 1.0))


def estimate_time_average(stats: EnsembleStats) -> tuple:
    """Ensemble mean and SE of the per-path time average of I."""
    return _mean_se(stats.time_average_infected)


def occupation_check(stats: EnsembleStats, pi: StationaryDistribution) -> float:
    """Max-norm deviation of mean regime occupation fractions from pi."""
    if stats.occupation.shape[1] != len(pi):
        raise MonteCarloError(
            f"occupation has {stats.occupation.shape[1]} regimes, pi has {len(pi)}")
    return float(np.max(np.abs(stats.occupation.mean(axis=0) - pi.pi)))


def classify(stats: EnsembleStats, delta: float, cap: float) -> str:
    """Classify an ensemble as 'extinct' or 'permanent'.

    Extinct when the 95% CI of ln I(T)/T lies entirely below the
    detectability floor -ln(cap/delta)/T: decay any slower cannot have
    carried a path from O(cap) below delta within the horizon, so it is
    indistinguishable from permanence at this T.
    """
    mean, se = estimate_lyapunov(stats)
    floor = -float(np.log(cap / delta)) / stats.horizon
    if mean < 0 and mean + Z_95 * se < floor:
        return "extinct"
    return "permanent"


def stats_to_dict(stats: EnsembleStats, deltas: Optional[Sequence[float]] = None) -> dict:
    """JSON-ready summary: estimator table with mean/SE/95% CI per entry."""
    table = {}
    if stats.lyapunov_samples is not None:
        mean, se = estimate_lyapunov(stats)
        table["lyapunov"] = {"mean": mean, "se": se,
                             "ci95": [mean - Z_95 * se, mean + Z_95 * se]}
    mean, se = estimate_time_average(stats)
    table["time_average_infected"] = {"mean": mean, "se": se,
                                      "ci95": [mean - Z_95 * se, mean + Z_95 * se]}
    persistence = {}
    for d in (deltas if deltas is not None else stats.deltas):
        freq, ci = estimate_persistence(stats, d)
        persistence[repr(float(d))] = {"frequency": freq, "ci95": list(ci)}
    return {
        "n_paths": stats.n_paths,
        "horizon": stats.horizon,
        "root_seed": stats.root_seed,
        "estimators": table,
        "persistence": persistence,
        "occupation_mean": stats.occupation.mean(axis=0).tolist(),
        "max_delta_excess": stats.max_excess,
        "max_negative": stats.max_negative,
    }


def write_summary_json(stats: EnsembleStats, fh, extra: Optional[dict] = None) -> None:
    doc = stats_to_dict(stats)
    if extra:
        doc.update(extra)
    json.dump(doc, fh, indent=2, sort_keys=True)
    fh.write("\n")


def write_samples_csv(stats: EnsembleStats, fh, metadata: Optional[dict] = None) -> None:
    """Flat per-path samples for the plotting component."""
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}={value}\n")
    cols = ["path", "lyapunov", "terminal_I", "time_average_I"]
    cols += [f"occupation_{j}" for j in range(stats.occupation.shape[1])]
    fh.write(",".join(cols) + "\n")
    for p in range(stats.n_paths):
        lyap = stats.lyapunov_samples[p] if stats.lyapunov_samples is not None else float("nan")
        row = [str(p), repr(float(lyap)), repr(float(stats.terminal_infected[p])),
               repr(float(stats.time_average_infected[p]))]
        row += [repr(float(v)) for v in stats.occupation[p]]
        fh.write(",".join(row) + "\n")
