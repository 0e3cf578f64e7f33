"""Finite-state continuous-time Markov chains: validation, stationary
distribution, and exact (event-driven) path sampling."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class CtmcError(ValueError):
    """Base class for generator-matrix and sampling errors."""


class NegativeOffDiagonal(CtmcError):
    pass


class RowSumNonzero(CtmcError):
    pass


class NotIrreducible(CtmcError):
    pass


class SingularSystem(CtmcError):
    pass


@dataclass(frozen=True)
class GeneratorMatrix:
    """Validated transition-rate matrix Q of an irreducible chain.

    Off-diagonal entries are jump rates (1/time), rows sum to zero.
    Immutable; safe to share across workers.
    """

    rates: np.ndarray
    row_sum_tol: float = 1e-12

    def __post_init__(self):
        rates = np.asarray(self.rates, dtype=float)
        rates.setflags(write=False)
        object.__setattr__(self, "rates", rates)

    @property
    def m0(self) -> int:
        return self.rates.shape[0]


@dataclass(frozen=True)
class StationaryDistribution:
    """Probability vector pi with pi @ Q = 0."""

    pi: np.ndarray

    def __post_init__(self):
        pi = np.asarray(self.pi, dtype=float)
        pi.setflags(write=False)
        object.__setattr__(self, "pi", pi)

    def __len__(self) -> int:
        return len(self.pi)


@dataclass(frozen=True)
class RegimePath:
    """One realization of the switching process on [0, horizon].

    ``jump_times`` / ``new_regimes`` list the switches in order; the chain
    is right-continuous, so the regime at a jump time is the new one.
    """

    initial: int
    jump_times: np.ndarray
    new_regimes: np.ndarray
    horizon: float
    m0: int = field(default=0)

    def __post_init__(self):
        jt = np.asarray(self.jump_times, dtype=float)
        nr = np.asarray(self.new_regimes, dtype=np.int64)
        jt.setflags(write=False)
        nr.setflags(write=False)
        object.__setattr__(self, "jump_times", jt)
        object.__setattr__(self, "new_regimes", nr)
        if jt.size != nr.size:
            raise CtmcError("jump_times and new_regimes must have equal length")
        if jt.size and (np.any(np.diff(jt) <= 0) or jt[-1] > self.horizon or jt[0] <= 0):
            raise CtmcError("jump times must be strictly increasing in (0, horizon]")

    @property
    def regimes(self) -> np.ndarray:
        """Regime sequence including the initial one (length n_jumps + 1)."""
        return np.concatenate(([self.initial], self.new_regimes))

    def regime_at(self, t: float) -> int:
        k = int(np.searchsorted(self.jump_times, t, side="right"))
        return int(self.regimes[k])

    def occupation_fractions(self, m0: int | None = None, horizon: float | None = None) -> np.ndarray:
        """Fraction of [0, horizon] spent in each regime."""
        m0 = m0 if m0 is not None else (self.m0 or int(self.regimes.max()) + 1)
        T = self.horizon if horizon is None else horizon
        edges = np.concatenate(([0.0], self.jump_times, [T]))
        occ = np.zeros(m0)
        np.add.at(occ, self.regimes, np.diff(edges))
        return occ / T


def validate_generator(rates, row_sum_tol: float = 1e-12) -> GeneratorMatrix:
    """Check the three generator invariants and return the validated matrix.

    Raises NegativeOffDiagonal, RowSumNonzero, or NotIrreducible.
    """
    Q = np.asarray(rates, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise CtmcError(f"generator must be square, got shape {Q.shape}")
    if not np.all(np.isfinite(Q)):
        raise CtmcError("generator entries must be finite")
    m0 = Q.shape[0]
    off = Q[~np.eye(m0, dtype=bool)]
    if off.size and off.min() < 0:
        raise NegativeOffDiagonal(f"negative off-diagonal rate {off.min()}")
    row_sums = Q.sum(axis=1)
    bad = np.abs(row_sums) > row_sum_tol
    if np.any(bad):
        k = int(np.argmax(np.abs(row_sums)))
        raise RowSumNonzero(f"row {k} sums to {row_sums[k]:.3e} (tol {row_sum_tol:.1e})")
    if not _strongly_connected(Q):
        raise NotIrreducible("positive-rate digraph is not strongly connected")
    return GeneratorMatrix(Q, row_sum_tol=row_sum_tol)


def _reachable(adj: np.ndarray, start: int) -> np.ndarray:
    seen = np.zeros(adj.shape[0], dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        k = stack.pop()
        for l in np.flatnonzero(adj[k]):
            if not seen[l]:
                seen[l] = True
                stack.append(int(l))
    return seen


def _strongly_connected(Q: np.ndarray) -> bool:
    m0 = Q.shape[0]
    if m0 == 1:
        return True
    adj = (Q > 0) & ~np.eye(m0, dtype=bool)
    return bool(_reachable(adj, 0).all() and _reachable(adj.T, 0).all())


def stationary_distribution(Q: GeneratorMatrix, residual_tol: float = 1e-10) -> StationaryDistribution:
    """Solve pi @ Q = 0 with sum(pi) = 1 by dense least squares.

    Raises SingularSystem when the augmented system is rank deficient or the
    solution fails the residual/positivity checks (an invalid generator that
    slipped validation).
    """
    m0 = Q.m0
    if m0 == 1:
        return StationaryDistribution(np.array([1.0]))
    A = np.vstack([Q.rates.T, np.ones(m0)])
    b = np.zeros(m0 + 1)
    b[-1] = 1.0
    pi, _, rank, _ = np.linalg.lstsq(A, b, rcond=None)
    if rank < m0:
        raise SingularSystem(f"augmented system rank {rank} < {m0}")
    residual = pi @ Q.rates
    if np.max(np.abs(residual)) > residual_tol:
        raise SingularSystem(f"piQ residual {np.max(np.abs(residual)):.3e} exceeds {residual_tol:.1e}")
    if np.any(pi <= 0):
        raise SingularSystem("stationary solution has nonpositive entries")
    return StationaryDistribution(pi)


def sample_regime_path(Q: GeneratorMatrix, initial: int, horizon: float,
                       rng: np.random.Generator) -> RegimePath:
    """Exact CTMC simulation: exponential holding times, embedded-chain jumps.

    Deterministic given the generator state of ``rng``.
    """
    if horizon <= 0:
        raise CtmcError("horizon must be positive")
    if not 0 <= initial < Q.m0:
        raise CtmcError(f"initial regime {initial} out of range for m0={Q.m0}")
    jump_times: list[float] = []
    regimes: list[int] = []
    rates_out = -np.diag(Q.rates)
    probs = np.maximum(Q.rates, 0.0)
    np.fill_diagonal(probs, 0.0)
    cum = np.cumsum(probs, axis=1)
    k = initial
    t = 0.0
    while True:
        rate = rates_out[k]
        if rate <= 0.0:
            break  # absorbing; only possible for m0 == 1
        t += rng.exponential(1.0 / rate)
        if t > horizon:
            break
        row = cum[k]
        k = int(np.searchsorted(row, rng.random() * row[-1], side="right"))
        jump_times.append(t)
        regimes.append(k)
    return RegimePath(initial=initial, jump_times=np.array(jump_times),
                      new_regimes=np.array(regimes, dtype=np.int64),
                      horizon=horizon, m0=Q.m0)
