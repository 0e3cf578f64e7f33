"""Pathwise integration of switching SDEs: exact regime-jump times from the
CTMC, Euler-Maruyama between jumps, and an exact logarithmic transform for
the infected coordinate of SIRS instances.

A step that straddles a regime jump is split at the jump time, with
independent Gaussian increments of the correct sub-interval variances, so
the switching law is matched exactly (no O(dt) switching bias).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .ctmc import GeneratorMatrix, RegimePath, sample_regime_path
from .model import SirsModel, SwitchingSde, as_switching_sde, EpidemicState, eval_g


class EngineError(RuntimeError):
    pass


class NonFiniteState(EngineError):
    """State overflowed or became NaN: dt too large or invalid model."""


class InitOutsideRegion(EngineError):
    pass


@dataclass(frozen=True)
class SimConfig:
    """Integration settings. ``record_stride`` records every n-th grid point."""

    dt: float
    horizon: float
    seed: int
    record_stride: int = 1
    log_infected: bool = False

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.horizon < self.dt:
            raise ValueError("horizon must be at least dt")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        # truncate to the largest grid point <= horizon
        return int(math.floor(self.horizon / self.dt + 1e-9))


@dataclass(frozen=True)
class HybridPath:
    """A realized trajectory on the recording grid plus its regime path."""

    regime_path: RegimePath
    times: np.ndarray
    states: np.ndarray  # (n_records, d)
    regimes: np.ndarray  # regime at each record
    max_excess: float  # max over records of (sum - cap)+, 0 if no cap
    max_negative: float  # max over records of (-min coordinate)+
    log_infected: Optional[np.ndarray] = None  # ln I at each record

    @property
    def terminal_log_infected(self) -> float:
        if self.log_infected is None:
            raise EngineError("path was simulated without the log-infected channel")
        return float(self.log_infected[-1])


def path_rng(root_seed: int, path_index: int = 0) -> np.random.Generator:
    """Per-path stream: PCG64 keyed on (root seed, path index).

    This is the documented splitting rule; ensembles are reproducible and
    embarrassingly parallel.
    """
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([root_seed, path_index])))


def em_step(sde: SwitchingSde, state: np.ndarray, regime: int, dt: float, dW: float) -> np.ndarray:
    """One Euler-Maruyama step; clips the sde's nonnegative coordinates at 0."""
    state = np.asarray(state, dtype=float)
    new = state + sde.drift(state, regime) * dt + sde.diffusion(state, regime) * dW
    for j in sde.clip_nonnegative:
        new[j] = np.maximum(new[j], 0.0)
    if not np.all(np.isfinite(new)):
        raise NonFiniteState(f"non-finite state after step at regime {regime}")
    return new


def log_infected_step(model: SirsModel, state: EpidemicState, dt: float, dW: float) -> EpidemicState:
    """Advance one step with I integrated exactly in log scale (I stays > 0)."""
    if state.I <= 0:
        raise EngineError("log-infected step requires I > 0")
    S, I, R, i = state.S, state.I, state.R, state.regime
    F1 = model.f1[i](S, I)
    F2 = model.f2[i](S, I)
    mu, rho, g1, g2 = model.mu[i], model.rho[i], model.gamma1[i], model.gamma2[i]
    S_new = S + (-S * I * F1 + mu * (model.K - S) + g1 * R) * dt - S * I * F2 * dW
    R_new = R + (g2 * I - (mu + g1) * R) * dt
    Y = math.log(I) + eval_g(model, S, I, i) * dt + S * F2 * dW
    S_new = max(S_new, 0.0)
    R_new = max(R_new, 0.0)
    I_new = math.exp(Y)
    if not (np.isfinite(S_new) and np.isfinite(I_new) and np.isfinite(R_new)):
        raise NonFiniteState("non-finite state in log-infected step")
    return EpidemicState(S_new, I_new, R_new, i, state.t + dt)


def _build_subgrid(cfg: SimConfig, regime_path: RegimePath):
    """Merge the uniform dt grid with the regime jump times.

    Returns (dt_sub, regime_sub, record_positions) where record_positions[j]
    is the index in the merged point sequence of the j-th recorded grid point.
    """
    n = cfg.n_steps
    grid = cfg.dt * np.arange(n + 1)
    jumps = regime_path.jump_times
    jumps = jumps[(jumps > 0) & (jumps < grid[-1])]
    # drop jumps that coincide exactly with grid points (measure zero)
    on_grid = np.isclose(jumps / cfg.dt, np.round(jumps / cfg.dt), rtol=0, atol=1e-12)
    jumps = jumps[~on_grid]
    points = np.insert(grid, np.searchsorted(grid, jumps), jumps)
    dt_sub = np.diff(points)
    # regime on each sub-interval = regime at its left endpoint
    regs = regime_path.regimes
    idx = np.searchsorted(regime_path.jump_times, points[:-1], side="right")
    regime_sub = regs[idx]
    rec_grid_idx = np.arange(0, n + 1, cfg.record_stride)
    grid_pos = np.arange(n + 1) + np.searchsorted(jumps, grid, side="left")
    record_positions = grid_pos[rec_grid_idx]
    return dt_sub, regime_sub.astype(np.int64), record_positions.astype(np.int64)


def simulate_path(sde: SwitchingSde, chain: GeneratorMatrix, init, initial_regime: int,
                  cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> HybridPath:
    """Simulate one hybrid trajectory; deterministic given cfg.seed.

    The regime path is sampled first (exact jump times), then the diffusion
    is advanced on the dt grid with steps split at jumps.
    """
    init = np.asarray(init, dtype=float)
    if init.shape != (sde.dim,):
        raise ValueError(f"init must have dimension {sde.dim}")
    if not sde.in_region(init):
        raise InitOutsideRegion(f"initial state {init} outside the admissible region")
    if cfg.log_infected:
        if sde.log_channel is None:
            raise EngineError("log_infected requested but the SDE has no log channel")
        if init[sde.log_channel[0]] <= 0:
            raise InitOutsideRegion("log_infected requires a positive infected coordinate")
    if rng is None:
        rng = path_rng(cfg.seed)
    regime_path = sample_regime_path(chain, initial_regime, cfg.n_steps * cfg.dt, rng)
    dt_sub, regime_sub, rec_pos = _build_subgrid(cfg, regime_path)
    dW = rng.normal(0.0, np.sqrt(dt_sub))

    if cfg.log_infected and sde.model is not None and sde.model.kernel_eligible():
        states, lnI, max_excess, max_neg, ok = _run_sirs_kernel(
            sde.model, init, dt_sub, dW, regime_sub, rec_pos)
        if not ok:
            raise NonFiniteState("non-finite state during kernel integration")
    else:
        states, lnI, max_excess, max_neg = _run_python(
            sde, init, cfg, dt_sub, dW, regime_sub, rec_pos)

    times = cfg.dt * np.arange(0, cfg.n_steps + 1, cfg.record_stride)
    rec_regimes = regime_path.regimes[
        np.searchsorted(regime_path.jump_times, times, side="right")]
    return HybridPath(regime_path=regime_path, times=times, states=states,
                      regimes=rec_regimes, max_excess=max_excess,
                      max_negative=max_neg, log_infected=lnI)


def _run_python(sde: SwitchingSde, init, cfg: SimConfig, dt_sub, dW, regime_sub, rec_pos):
    d = sde.dim
    n_rec = rec_pos.size
    states = np.empty((n_rec, d))
    use_log = cfg.log_infected and sde.log_channel is not None
    lnI = np.empty(n_rec) if use_log else None
    if use_log:
        li, growth, noise = sde.log_channel
        Y = math.log(init[li])
    state = init.copy()
    cap = sde.region_cap
    max_excess = 0.0
    max_neg = 0.0
    ptr = 0
    n_sub = dt_sub.size
    for k in range(n_sub + 1):
        if ptr < n_rec and rec_pos[ptr] == k:
            states[ptr] = state
            if use_log:
                lnI[ptr] = Y
            if cap is not None:
                max_excess = max(max_excess, state.sum() - cap)
            max_neg = max(max_neg, -state.min())
            ptr += 1
        if k == n_sub:
            break
        i = int(regime_sub[k])
        h = dt_sub[k]
        w = dW[k]
        if use_log:
            drift = sde.drift(state, i)
            diff = sde.diffusion(state, i)
            Y = Y + growth(state, i) * h + noise(state, i) * w
            new = state + drift * h + diff * w
            for j in sde.clip_nonnegative:
                new[j] = max(new[j], 0.0)
            new[li] = math.exp(Y)
            if not np.all(np.isfinite(new)):
                raise NonFiniteState("non-finite state during integration")
            state = new
        else:
            state = em_step(sde, state, i, h, w)
    return states, lnI, max(max_excess, 0.0), max(max_neg, 0.0)


def _run_sirs_kernel(model: SirsModel, init, dt_sub, dW, regime_sub, rec_pos):
    (f1c, f1p), (f2c, f2p) = model.kernel_params()
    return _sirs_log_kernel(
        init[0], init[1], init[2], model.K,
        model.mu, model.rho, model.gamma1, model.gamma2,
        f1c, f1p, f2c, f2p, dt_sub, dW, regime_sub, rec_pos)


@njit(cache=True)
def _inc_eval(code, params, S, I):
    beta = params[0]
    if code == 0:
        return beta
    if code == 1:
        return beta / (1.0 + params[1] * I)
    if code == 2:
        return beta / (1.0 + params[1] * S)
    return beta / (1.0 + params[1] * S + params[2] * I)


@njit(cache=True)
def _sirs_log_kernel(S0, I0, R0, K, mu, rho, g1, g2,
                     f1c, f1p, f2c, f2p, dt_sub, dW, regime_sub, rec_pos):
    n_sub = dt_sub.size
    n_rec = rec_pos.size
    states = np.empty((n_rec, 3))
    lnI = np.empty(n_rec)
    S = S0
    I = I0
    R = R0
    Y = np.log(I0)
    max_excess = 0.0
    max_neg = 0.0
    ptr = 0
    ok = True
    for k in range(n_sub + 1):
        if ptr < n_rec and rec_pos[ptr] == k:
            states[ptr, 0] = S
            states[ptr, 1] = I
            states[ptr, 2] = R
            lnI[ptr] = Y
            excess = S + I + R - K
            if excess > max_excess:
                max_excess = excess
            neg = -min(S, min(I, R))
            if neg > max_neg:
                max_neg = neg
            if not (np.isfinite(S) and np.isfinite(I) and np.isfinite(R)):
                ok = False
                break
            ptr += 1
        if k == n_sub:
            break
        r = regime_sub[k]
        h = dt_sub[k]
        w = dW[k]
        F1 = _inc_eval(f1c[r], f1p[r], S, I)
        F2 = _inc_eval(f2c[r], f2p[r], S, I)
        g = F1 * S - (mu[r] + rho[r] + g2[r] + 0.5 * F2 * F2 * S * S)
        S_new = S + (-S * I * F1 + mu[r] * (K - S) + g1[r] * R) * h - S * I * F2 * w
        R_new = R + (g2[r] * I - (mu[r] + g1[r]) * R) * h
        Y = Y + g * h + S * F2 * w
        if S_new < 0.0:
            S_new = 0.0
        if R_new < 0.0:
            R_new = 0.0
        S = S_new
        R = R_new
        I = np.exp(Y)
    return states, lnI, max_excess, max_neg, ok


def simulate_sirs_path(model: SirsModel, init, initial_regime: int, cfg: SimConfig,
                       rng: Optional[np.random.Generator] = None) -> HybridPath:
    """Convenience wrapper: simulate the SIRS model with its SDE form."""
    return simulate_path(as_switching_sde(model), model.chain, init, initial_regime, cfg, rng)


CSV_FIELDS = ("t", "regime", "S", "I", "R")


def write_path_csv(path: HybridPath, fh, metadata: Optional[dict] = None) -> None:
    """Stream a 3-dimensional path as CSV: t, regime, S, I, R (and lnI).

    Metadata is emitted as '# key=value' comment lines before the header.
    """
    if path.states.shape[1] != 3:
        raise EngineError("CSV export is defined for 3-dimensional paths")
    for key, value in (metadata or {}).items():
        fh.write(f"# {key}={value}\n")
    fields = list(CSV_FIELDS) + (["lnI"] if path.log_infected is not None else [])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(fields)
    for j, t in enumerate(path.times):
        row = [repr(float(t)), int(path.regimes[j])] + [repr(float(v)) for v in path.states[j]]
        if path.log_infected is not None:
            row.append(repr(float(path.log_infected[j])))
        writer.writerow(row)
