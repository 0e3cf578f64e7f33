"""SIRS model data, drift/diffusion evaluation, the growth rate g, the
extinction/permanence threshold, and the literature presets used for
threshold comparison."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .ctmc import GeneratorMatrix, stationary_distribution, validate_generator


class ModelError(ValueError):
    pass


# incidence family codes shared with the fast engine kernel
FAM_CONSTANT = 0
FAM_SATURATED_I = 1
FAM_SATURATED_S = 2
FAM_BEDDINGTON_DEANGELIS = 3
FAM_CUSTOM = 4

_FAMILY_NAMES = {
    "constant": FAM_CONSTANT,
    "saturated_in_i": FAM_SATURATED_I,
    "saturated_in_s": FAM_SATURATED_S,
    "beddington_deangelis": FAM_BEDDINGTON_DEANGELIS,
}


@dataclass(frozen=True)
class Incidence:
    """One member of the closed incidence-function catalog.

    family codes: constant beta; beta/(1+a1*I); beta/(1+a1*S);
    beta/(1+a1*S+a2*I); or a user-supplied positive locally-Lipschitz rule.
    """

    family: int
    beta: float = 0.0
    a1: float = 0.0
    a2: float = 0.0
    func: Optional[Callable[[float, float], float]] = None

    def __post_init__(self):
        if self.family == FAM_CUSTOM:
            if self.func is None:
                raise ModelError("custom incidence requires an evaluation rule")
            return
        if self.beta <= 0:
            raise ModelError(f"incidence beta must be positive, got {self.beta}")
        if self.a1 < 0 or self.a2 < 0:
            raise ModelError("incidence saturation constants must be nonnegative")

    def __call__(self, S, I):
        f = self.family
        if f == FAM_CONSTANT:
            return self.beta * np.ones_like(np.asarray(S, dtype=float)) if np.ndim(S) else self.beta
        if f == FAM_SATURATED_I:
            return self.beta / (1.0 + self.a1 * I)
        if f == FAM_SATURATED_S:
            return self.beta / (1.0 + self.a1 * S)
        if f == FAM_BEDDINGTON_DEANGELIS:
            return self.beta / (1.0 + self.a1 * S + self.a2 * I)
        return self.func(S, I)

    @staticmethod
    def constant(beta: float) -> "Incidence":
        return Incidence(FAM_CONSTANT, beta=beta)

    @staticmethod
    def saturated_in_i(beta: float, a: float) -> "Incidence":
        return Incidence(FAM_SATURATED_I, beta=beta, a1=a)

    @staticmethod
    def saturated_in_s(beta: float, a: float) -> "Incidence":
        return Incidence(FAM_SATURATED_S, beta=beta, a1=a)

    @staticmethod
    def beddington_deangelis(beta: float, a1: float, a2: float) -> "Incidence":
        return Incidence(FAM_BEDDINGTON_DEANGELIS, beta=beta, a1=a1, a2=a2)

    @staticmethod
    def custom(func: Callable[[float, float], float]) -> "Incidence":
        return Incidence(FAM_CUSTOM, func=func)

    @staticmethod
    def from_config(cfg: dict) -> "Incidence":
        """Build from a scenario-file mapping: {family, beta, a?, a1?, a2?}."""
        name = cfg.get("family")
        if name not in _FAMILY_NAMES:
            raise ModelError(f"unknown incidence family {name!r}; "
                             f"expected one of {sorted(_FAMILY_NAMES)}")
        fam = _FAMILY_NAMES[name]
        beta = float(cfg.get("beta", 0.0))
        a1 = float(cfg.get("a1", cfg.get("a", 0.0)))
        a2 = float(cfg.get("a2", 0.0))
        return Incidence(fam, beta=beta, a1=a1, a2=a2)


def eval_incidence(f: Incidence, S: float, I: float) -> float:
    """Evaluate an incidence function at (S, I) >= 0."""
    return f(S, I)


@dataclass(frozen=True)
class EpidemicState:
    """Point state of the epidemic: compartments, regime, time."""

    S: float
    I: float
    R: float
    regime: int = 0
    t: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.S, self.I, self.R])


@dataclass(frozen=True)
class SirsModel:
    """Regime-switching SIRS model with carrying capacity K.

    Per-regime rates (1/time): mu = disease-free death, rho = excess death of
    infectives, gamma1 = immunity loss, gamma2 = recovery.  f1/f2 are the
    transmission and noise-intensity incidence functions per regime.
    """

    K: float
    mu: np.ndarray
    rho: np.ndarray
    gamma1: np.ndarray
    gamma2: np.ndarray
    f1: tuple
    f2: tuple
    chain: GeneratorMatrix
    positivity_grid: int = 50

    def __post_init__(self):
        for name in ("mu", "rho", "gamma1", "gamma2"):
            v = np.asarray(getattr(self, name), dtype=float)
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "f1", tuple(self.f1))
        object.__setattr__(self, "f2", tuple(self.f2))
        if self.K <= 0:
            raise ModelError("carrying capacity K must be positive")
        m0 = self.chain.m0
        for name in ("mu", "rho", "gamma1", "gamma2"):
            v = getattr(self, name)
            if v.shape != (m0,):
                raise ModelError(f"{name} must have one entry per regime (m0={m0})")
            if np.any(v <= 0):
                raise ModelError(f"{name} entries must be strictly positive")
        if len(self.f1) != m0 or len(self.f2) != m0:
            raise ModelError(f"f1/f2 must have one incidence function per regime (m0={m0})")
        self._check_positivity()

    def _check_positivity(self):
        # cheap grid check over [0, K]^2 catches bad custom rules early
        grid = np.linspace(0.0, self.K, self.positivity_grid)
        S, I = np.meshgrid(grid, grid)
        for which, funcs in (("f1", self.f1), ("f2", self.f2)):
            for i, f in enumerate(funcs):
                vals = np.broadcast_to(np.asarray(f(S, I), dtype=float), S.shape)
                if not np.all(vals > 0):
                    raise ModelError(f"{which}[{i}] is not strictly positive on the grid over [0,K]^2")

    @property
    def m0(self) -> int:
        return self.chain.m0

    def kernel_eligible(self) -> bool:
        """True when all incidence functions are from the closed catalog."""
        return all(f.family != FAM_CUSTOM for f in self.f1 + self.f2)

    def kernel_params(self):
        """Encode incidence functions as (codes, params) arrays for the njit kernel."""
        if not self.kernel_eligible():
            raise ModelError("custom incidence functions cannot be kernel-encoded")
        def enc(funcs):
            codes = np.array([f.family for f in funcs], dtype=np.int64)
            params = np.array([[f.beta, f.a1, f.a2] for f in funcs], dtype=float)
            return codes, params
        return enc(self.f1), enc(self.f2)


def eval_g(model: SirsModel, x: float, y: float, i: int) -> float:
    """Per-regime exponential growth/decay rate of ln I at (S, I) = (x, y)."""
    F1 = model.f1[i](x, y)
    F2 = model.f2[i](x, y)
    return F1 * x - (model.mu[i] + model.rho[i] + model.gamma2[i] + 0.5 * F2 * F2 * x * x)


def compute_lambda(model: SirsModel) -> float:
    """Threshold: stationary-weighted growth rate at the disease-free point (K, 0).

    Negative -> extinction (ln I(t)/t converges to this value); positive ->
    strong stochastic permanence.
    """
    pi = stationary_distribution(model.chain).pi
    gvals = np.array([eval_g(model, model.K, 0.0, i) for i in range(model.m0)])
    return float(pi @ gvals)


def sirs_drift(model: SirsModel, state: EpidemicState) -> np.ndarray:
    """Drift vector of the switching SIRS diffusion at the given state."""
    x, y, z, i = state.S, state.I, state.R, state.regime
    F1 = model.f1[i](x, y)
    mu, rho, g1, g2 = model.mu[i], model.rho[i], model.gamma1[i], model.gamma2[i]
    return np.array([
        -x * y * F1 + mu * (model.K - x) + g1 * z,
        x * y * F1 - (mu + rho + g2) * y,
        g2 * y - (mu + g1) * z,
    ])


def sirs_diffusion(model: SirsModel, state: EpidemicState) -> np.ndarray:
    """Diffusion vector (coefficient of the scalar Brownian increment)."""
    x, y, i = state.S, state.I, state.regime
    F2 = model.f2[i](x, y)
    return np.array([-x * y * F2, x * y * F2, 0.0])


@dataclass(frozen=True)
class SwitchingSde:
    """d-dimensional switching diffusion driven by one scalar Brownian motion.

    ``drift``/``diffusion`` map (state vector, regime) to d-vectors.
    ``clip_nonnegative`` lists coordinates clipped at 0 after each step.
    ``log_channel``, when present, is (growth_rate, noise_coeff) maps for the
    coordinate integrated exactly in log scale (the infected compartment).
    """

    dim: int
    m0: int
    drift: Callable[[np.ndarray, int], np.ndarray]
    diffusion: Callable[[np.ndarray, int], np.ndarray]
    clip_nonnegative: tuple = ()
    region_cap: Optional[float] = None  # simplex bound: sum(state) <= cap
    log_channel: Optional[tuple] = None  # (index, g(state, i), noise(state, i))
    model: Optional[SirsModel] = None

    def in_region(self, state: np.ndarray) -> bool:
        state = np.asarray(state, dtype=float)
        if self.region_cap is None:
            return bool(np.all(np.isfinite(state)))
        return bool(np.all(state >= 0) and state.sum() <= self.region_cap * (1 + 1e-12))


def as_switching_sde(model: SirsModel) -> SwitchingSde:
    """Wrap a SirsModel as a generic 3-dimensional switching SDE."""

    def drift(v, i):
        return sirs_drift(model, EpidemicState(v[0], v[1], v[2], i))

    def diffusion(v, i):
        return sirs_diffusion(model, EpidemicState(v[0], v[1], v[2], i))

    def growth(v, i):
        return eval_g(model, v[0], v[1], i)

    def noise(v, i):
        return v[0] * model.f2[i](v[0], v[1])

    return SwitchingSde(dim=3, m0=model.m0, drift=drift, diffusion=diffusion,
                        clip_nonnegative=(0, 2), region_cap=model.K,
                        log_channel=(1, growth, noise), model=model)


def preset_ex8(mu: Sequence[float], beta: Sequence[float], gamma: Sequence[float],
               lam: Sequence[float], sigma: Sequence[float],
               chain: GeneratorMatrix) -> SwitchingSde:
    """Regime-switching SIR(S) variant with recruitment mu and unit capacity.

    Distinct from the main SIRS form: the susceptible drift carries an extra
    -sigma*S*I*(S+I) term and recruitment is constant mu rather than
    mu*(K - S).  gamma = immunity loss, lam = recovery.
    """
    mu, beta, gamma, lam, sigma = (np.asarray(v, dtype=float)
                                   for v in (mu, beta, gamma, lam, sigma))
    m0 = chain.m0
    for name, v in (("mu", mu), ("beta", beta), ("gamma", gamma), ("lam", lam), ("sigma", sigma)):
        if v.shape != (m0,):
            raise ModelError(f"{name} must have one entry per regime (m0={m0})")
        if np.any(v <= 0):
            raise ModelError(f"{name} entries must be positive")

    def drift(v, i):
        S, I, R = v
        return np.array([
            mu[i] - beta[i] * S * I - mu[i] * S + gamma[i] * R
            - sigma[i] * S * I * (S + I),
            beta[i] * S * I - (mu[i] + lam[i]) * I,
            lam[i] * I - (mu[i] + gamma[i]) * R,
        ])

    def diffusion(v, i):
        S, I = v[0], v[1]
        return np.array([-sigma[i] * S * I, sigma[i] * S * I, 0.0])

    def growth(v, i):
        S = v[0]
        return beta[i] * S - (mu[i] + lam[i]) - 0.5 * sigma[i] ** 2 * S * S

    def noise(v, i):
        return sigma[i] * v[0]

    return SwitchingSde(dim=3, m0=m0, drift=drift, diffusion=diffusion,
                        clip_nonnegative=(0, 2), region_cap=1.0,
                        log_channel=(1, growth, noise))


def preset_ex17(Lambda: float, mu: float, beta: float, alpha: float,
                delta: float, gamma: float, eps: float, sigma: float) -> SirsModel:
    """Single-regime saturated-incidence SIRS model with recruitment Lambda.

    Maps onto the main form with K = Lambda/mu; immunity loss delta,
    recovery gamma, excess death eps; incidence beta/(1+alpha*I) and noise
    intensity sigma/(1+alpha*I).
    """
    for name, v in (("Lambda", Lambda), ("mu", mu), ("beta", beta), ("delta", delta),
                    ("gamma", gamma), ("eps", eps), ("sigma", sigma)):
        if v <= 0:
            raise ModelError(f"{name} must be positive")
    if alpha < 0:
        raise ModelError("alpha must be nonnegative")
    chain = validate_generator([[0.0]])
    return SirsModel(K=Lambda / mu, mu=[mu], rho=[eps], gamma1=[delta], gamma2=[gamma],
                     f1=(Incidence.saturated_in_i(beta, alpha),),
                     f2=(Incidence.saturated_in_i(sigma, alpha),),
                     chain=chain)


@dataclass(frozen=True)
class ThresholdReport:
    """Side-by-side comparison of our threshold with literature quantities."""

    preset: str
    lam: float
    details: dict = field(default_factory=dict)
    notes: tuple = ()

    def to_dict(self) -> dict:
        return {"preset": self.preset, "lambda": self.lam,
                "details": dict(self.details), "notes": list(self.notes)}


def compare_thresholds(preset: str, **params) -> ThresholdReport:
    """Build a ThresholdReport for the 'ex8' or 'ex17' preset parameters."""
    if preset == "ex8":
        return _compare_ex8(**params)
    if preset == "ex17":
        return _compare_ex17(**params)
    raise ModelError(f"compare requires a literature preset ('ex8' or 'ex17'), got {preset!r}")


def _compare_ex8(mu, beta, gamma, lam, sigma, Q) -> ThresholdReport:
    chain = Q if isinstance(Q, GeneratorMatrix) else validate_generator(Q)
    mu, beta, gamma, lam_rec, sigma = (np.asarray(v, dtype=float)
                                       for v in (mu, beta, gamma, lam, sigma))
    m0 = chain.m0
    for name, v in (("mu", mu), ("beta", beta), ("gamma", gamma), ("lam", lam_rec)):
        if v.shape != (m0,):
            raise ModelError(f"{name} must have one entry per regime (m0={m0})")
        if np.any(v <= 0):
            raise ModelError(f"{name} entries must be positive")
    if sigma.shape != (m0,) or np.any(sigma < 0):
        raise ModelError("sigma must be nonnegative with one entry per regime")
    pi = stationary_distribution(chain).pi
    C = beta - mu - lam_rec - 0.5 * sigma ** 2
    lam_ours = float(pi @ C)
    beta_ge_sigma_sq = beta >= sigma ** 2
    if np.any(sigma == 0):
        quad = None
        notes = ("quadratic-criterion quantity not applicable: some sigma_j = 0",)
    else:
        quad = float(pi @ ((beta ** 2 - 2 * mu * sigma ** 2) / (2 * sigma ** 2)))
        notes = ()
    details = {
        "C": C.tolist(),
        "pi": pi.tolist(),
        "sum_pi_C": float(pi @ C),
        "quadratic_criterion": quad,
        "beta_ge_sigma_sq": beta_ge_sigma_sq.tolist(),
    }
    return ThresholdReport(preset="ex8", lam=lam_ours, details=details, notes=notes)


def _compare_ex17(Lambda, mu, beta, alpha, delta, gamma, eps, sigma) -> ThresholdReport:
    if sigma == 0:
        # allow the deterministic limit in the report even though the model
        # type requires positive noise
        lam_ours = beta * Lambda / mu - (mu + gamma + eps)
    else:
        model = preset_ex17(Lambda, mu, beta, alpha, delta, gamma, eps, sigma)
        lam_ours = compute_lambda(model)
    denom = mu + gamma + eps
    r0_printed = beta * Lambda / (mu * denom) - sigma ** 2 * Lambda ** 2 / (mu ** 2 * denom)
    r0_internal = lam_ours / denom + 1.0
    details = {
        "R0_printed": float(r0_printed),
        "R0_internal": float(r0_internal),
        "deterministic_R0": float(beta * Lambda / (mu * denom)),
    }
    notes = ("R0_printed uses the full noise term sigma^2*K^2; our threshold "
             "carries the Ito factor 1/2 on that term, so R0_internal = "
             "lambda/(mu+gamma+eps) + 1 is the internally consistent quantity",)
    return ThresholdReport(preset="ex17", lam=float(lam_ours), details=details, notes=notes)
