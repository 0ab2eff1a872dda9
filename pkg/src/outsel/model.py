"""Model definition: prior configuration, parameter state, log densities.

The model for row i of a LongDesign is

    y_i = nu[k_i] + alpha[j_i] + beta[k_i] * exposure_i + gamma[k_i] * z_i + e_i

with e_i ~ N(0, sigma[k_i]^2), outcome index k_i, individual index j_i, and
random intercepts alpha_j ~ N(0, sigma_r^2).  The slope block beta gets one
of five priors (regimes):

- "ssvs_mu":      beta_k ~ (1 - I_k) spike + I_k N(mu, tau^2), the spike a
                  narrow normal at zero; indicators I_k ~ Bernoulli(p_k).
                  The slab center mu is estimated, so selected outcomes
                  share a common nonzero effect.
- "ssvs_zero":    the classical variant; slab is N(0, tau^2).
- "hierarchical": beta_k ~ N(mu, tau^2) for every outcome, no selection.
- "laplace":      beta_k ~ Laplace(0, scale), no selection and no shared
                  location/scale pair.
- "subset":       hierarchical on a fixed include mask; excluded outcomes
                  have beta pinned at exactly zero (they stay in the
                  likelihood with their own intercepts and noise scales).

Spike shape comes in two modes: "ratio" uses variance tau^2 / spike_ratio,
so the spike tightens with the slab; "fixed" uses the constant
spike_variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import LongDesign
from .errors import DimensionError, ValidationError

__all__ = [
    "REGIMES",
    "SELECTION_REGIMES",
    "PriorConfig",
    "ParameterState",
    "simulation_priors",
    "application_priors",
    "normal_logpdf",
    "lognormal_logpdf",
    "laplace_logpdf",
    "log_beta_prior",
    "log_joint",
]

REGIMES = ("ssvs_mu", "ssvs_zero", "hierarchical", "laplace", "subset")
SELECTION_REGIMES = ("ssvs_mu", "ssvs_zero")
SPIKE_MODES = ("ratio", "fixed")

_LOG_2PI = math.log(2.0 * math.pi)


def normal_logpdf(x, mean=0.0, sd=1.0):
    x = np.asarray(x, dtype=float)
    return -0.5 * _LOG_2PI - np.log(sd) - 0.5 * np.square((x - mean) / sd)


def lognormal_logpdf(x, loc=0.0, scale=1.0):
    """Log density of X when log X ~ N(loc, scale^2); -inf for x <= 0."""
    x = np.asarray(x, dtype=float)
    good = x > 0
    lx = np.log(np.where(good, x, 1.0))
    out = -lx - math.log(scale) - 0.5 * _LOG_2PI - 0.5 * np.square((lx - loc) / scale)
    return np.where(good, out, -np.inf)


def laplace_logpdf(x, loc=0.0, scale=1.0):
    x = np.asarray(x, dtype=float)
    return -math.log(2.0 * scale) - np.abs(x - loc) / scale


@dataclass(frozen=True)
class PriorConfig:
    """Prior regime and hyperparameters for one model fit.

    inclusion_prior is a length-K vector of prior inclusion probabilities
    in (0, 1]; it is only consulted by the selection regimes.  For the
    subset regime, subset_include marks the outcomes that receive the
    hierarchical slope prior; the rest have their slope pinned at zero.
    tau_logprior and sigma_logprior are (loc, scale) of the log of the
    scale parameter, i.e. log-normal priors.
    """

    regime: str
    inclusion_prior: np.ndarray
    spike_mode: str = "ratio"
    spike_ratio: float = 100.0
    spike_variance: float = 0.04
    mu_prior_sd: float = 10.0
    tau_logprior: tuple[float, float] = (0.0, 1.0)
    sigma_logprior: tuple[float, float] = (0.0, 10.0)
    nu_prior_sd: float = math.sqrt(1000.0)
    gamma_prior_sd: float = 10.0
    laplace_scale: float = 1.0
    subset_include: np.ndarray | None = None

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValidationError(f"unknown regime {self.regime!r}; expected one of {REGIMES}")
        if self.spike_mode not in SPIKE_MODES:
            raise ValidationError(f"unknown spike_mode {self.spike_mode!r}; expected one of {SPIKE_MODES}")
        probs = np.array(self.inclusion_prior, dtype=float).reshape(-1)
        if probs.size < 1:
            raise ValidationError("inclusion_prior must have length K >= 1")
        if ((probs <= 0) | (probs > 1)).any() or not np.isfinite(probs).all():
            raise ValidationError("inclusion probabilities must lie in (0, 1]")
        probs.setflags(write=False)
        object.__setattr__(self, "inclusion_prior", probs)
        for label, value in (("spike_ratio", self.spike_ratio),
                             ("spike_variance", self.spike_variance),
                             ("mu_prior_sd", self.mu_prior_sd),
                             ("nu_prior_sd", self.nu_prior_sd),
                             ("gamma_prior_sd", self.gamma_prior_sd),
                             ("laplace_scale", self.laplace_scale)):
            if not (np.isfinite(value) and value > 0):
                raise ValidationError(f"{label} must be a positive finite number, got {value}")
        for label, pair in (("tau_logprior", self.tau_logprior),
                            ("sigma_logprior", self.sigma_logprior)):
            loc, scale = pair
            if not (np.isfinite(loc) and np.isfinite(scale) and scale > 0):
                raise ValidationError(f"{label} must be (finite loc, positive scale), got {pair}")
            object.__setattr__(self, label, (float(loc), float(scale)))
        if self.regime == "subset":
            if self.subset_include is None:
                raise ValidationError("subset regime needs a subset_include mask")
            mask = np.array(self.subset_include, dtype=bool).reshape(-1)
            if mask.shape != probs.shape:
                raise DimensionError("subset_include must match inclusion_prior in length")
            if not mask.any():
                raise ValidationError("subset_include excludes every outcome")
            mask.setflags(write=False)
            object.__setattr__(self, "subset_include", mask)
        elif self.subset_include is not None:
            raise ValidationError("subset_include is only meaningful for the subset regime")

    @property
    def K(self) -> int:
        return self.inclusion_prior.shape[0]

    @property
    def has_selection(self) -> bool:
        return self.regime in SELECTION_REGIMES

    @property
    def has_mu(self) -> bool:
        """Whether the slab/pooling center mu is a free parameter."""
        return self.regime in ("ssvs_mu", "hierarchical", "subset")

    @property
    def has_tau(self) -> bool:
        """Whether the shared slope scale tau is a free parameter."""
        return self.regime != "laplace"

    def active_mask(self) -> np.ndarray:
        """Outcomes whose slope is a free parameter (all except masked subset)."""
        if self.regime == "subset":
            return np.array(self.subset_include)
        return np.ones(self.K, dtype=bool)

    def slab_mean(self, mu: float) -> float:
        return mu if self.regime != "ssvs_zero" else 0.0

    def spike_var(self, tau: float) -> float:
        if self.spike_mode == "ratio":
            return tau * tau / self.spike_ratio
        return self.spike_variance


def _base_prior(K: int, regime: str, inclusion, subset_include, **overrides) -> PriorConfig:
    probs = np.asarray(inclusion, dtype=float)
    if probs.ndim == 0:
        probs = np.full(K, float(probs))
    if regime == "subset" and subset_include is not None:
        subset_include = np.asarray(subset_include, dtype=bool)
    base = PriorConfig(regime=regime, inclusion_prior=probs, subset_include=subset_include)
    return replace(base, **overrides) if overrides else base


def simulation_priors(K: int, regime: str = "ssvs_mu", inclusion=0.5,
                      subset_include=None, **overrides) -> PriorConfig:
    """Weakly informative defaults sized for synthetic studies.

    mu ~ N(0, 100), tau ~ log-normal(0, 1), sigma scales ~ log-normal(0, 10),
    intercepts ~ N(0, 1000), confounder slopes ~ N(0, 100), ratio spike
    with spike_ratio 100.
    """
    overrides.setdefault("mu_prior_sd", 10.0)
    return _base_prior(K, regime, inclusion, subset_include, **overrides)


def application_priors(K: int, regime: str = "ssvs_mu", inclusion=0.5,
                       subset_include=None, **overrides) -> PriorConfig:
    """Defaults for standardized real data: tighter mu ~ N(0, 1)."""
    overrides.setdefault("mu_prior_sd", 1.0)
    return _base_prior(K, regime, inclusion, subset_include, **overrides)


@dataclass
class ParameterState:
    """One full set of model parameters (mutable; the sampler edits in place).

    Sentinels keep the layout identical across regimes: indicators are all
    True wherever selection does not apply (except masked subset outcomes,
    which are False), mu is 0.0 under ssvs_zero, and tau is 1.0 under the
    laplace regime.
    """

    beta: np.ndarray
    indicators: np.ndarray
    mu: float
    tau: float
    nu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray
    sigma: np.ndarray
    sigma_r: float

    def __post_init__(self):
        self.beta = np.array(self.beta, dtype=float).reshape(-1)
        self.indicators = np.array(self.indicators, dtype=bool).reshape(-1)
        self.nu = np.array(self.nu, dtype=float).reshape(-1)
        self.gamma = np.array(self.gamma, dtype=float).reshape(-1)
        self.alpha = np.array(self.alpha, dtype=float).reshape(-1)
        self.sigma = np.array(self.sigma, dtype=float).reshape(-1)
        self.mu = float(self.mu)
        self.tau = float(self.tau)
        self.sigma_r = float(self.sigma_r)
        K = self.beta.shape[0]
        for label, arr in (("indicators", self.indicators), ("nu", self.nu),
                           ("gamma", self.gamma), ("sigma", self.sigma)):
            if arr.shape[0] != K:
                raise DimensionError(f"{label} has length {arr.shape[0]}, expected K={K}")

    @property
    def K(self) -> int:
        return self.beta.shape[0]

    @property
    def n(self) -> int:
        return self.alpha.shape[0]

    def copy(self) -> "ParameterState":
        return ParameterState(self.beta.copy(), self.indicators.copy(), self.mu,
                              self.tau, self.nu.copy(), self.gamma.copy(),
                              self.alpha.copy(), self.sigma.copy(), self.sigma_r)

    def validate(self, prior: PriorConfig) -> None:
        """Check finiteness, positivity, and the regime's structural pins."""
        if self.K != prior.K:
            raise DimensionError(f"state has K={self.K}, prior has K={prior.K}")
        for label, arr in (("beta", self.beta), ("nu", self.nu),
                           ("gamma", self.gamma), ("alpha", self.alpha)):
            if not np.isfinite(arr).all():
                raise ValidationError(f"{label} contains non-finite values")
        if not (np.isfinite(self.sigma).all() and (self.sigma > 0).all()):
            raise ValidationError("sigma must be positive and finite")
        for label, value in (("mu", self.mu), ("tau", self.tau), ("sigma_r", self.sigma_r)):
            if not np.isfinite(value):
                raise ValidationError(f"{label} is not finite")
        if self.tau <= 0 or self.sigma_r <= 0:
            raise ValidationError("tau and sigma_r must be positive")
        if prior.regime == "ssvs_zero" and self.mu != 0.0:
            raise ValidationError("mu must stay 0 under the ssvs_zero regime")
        if prior.regime == "subset":
            masked = ~prior.subset_include
            if self.beta[masked].any():
                raise ValidationError("masked subset outcomes must have beta == 0")
            if self.indicators[masked].any() or not self.indicators[~masked].all():
                raise ValidationError("subset indicators must equal the include mask")
        elif not prior.has_selection and not self.indicators.all():
            raise ValidationError(f"indicators must be all True under {prior.regime}")


def log_beta_prior(beta: np.ndarray, indicators: np.ndarray, mu: float,
                   tau: float, prior: PriorConfig) -> float:
    """Log density of the slope block given the indicators.

    Each unmasked coefficient contributes its selected mixture component
    (spike where the indicator is False, slab where True); masked subset
    coefficients are point masses at zero and contribute nothing, but a
    nonzero masked value is a structural error.
    """
    beta = np.asarray(beta, dtype=float)
    indicators = np.asarray(indicators, dtype=bool)
    if beta.shape != indicators.shape or beta.shape[0] != prior.K:
        raise DimensionError("beta and indicators must both have length K")
    if prior.regime == "laplace":
        return float(laplace_logpdf(beta, 0.0, prior.laplace_scale).sum())
    active = prior.active_mask()
    if prior.regime == "subset" and beta[~active].any():
        raise ValidationError("masked subset outcomes must have beta == 0")
    slab = normal_logpdf(beta, prior.slab_mean(mu), tau)
    spike = normal_logpdf(beta, 0.0, math.sqrt(prior.spike_var(tau)))
    per_k = np.where(indicators, slab, spike)
    return float(per_k[active].sum())


def log_joint(state: ParameterState, design: LongDesign, prior: PriorConfig) -> float:
    """Log of the unnormalized posterior density at ``state``.

    Includes the likelihood, the random-intercept level, the slope block,
    the Bernoulli indicator mass (selection regimes only), and every
    hyperprior the regime uses.  Structurally invalid states raise; states
    with zero density (e.g. an excluded indicator whose prior probability
    is 1) return -inf.
    """
    state.validate(prior)
    if state.K != design.K:
        raise DimensionError(f"state has K={state.K}, design has K={design.K}")
    if state.n != design.n:
        raise DimensionError(f"state has n={state.n}, design has n={design.n}")
    k_idx = design.outcome
    resid = (design.y - state.nu[k_idx] - state.alpha[design.individual]
             - state.beta[k_idx] * design.exposure - state.gamma[k_idx] * design.confounder)
    lp = float(normal_logpdf(resid, 0.0, state.sigma[k_idx]).sum())
    lp += float(normal_logpdf(state.alpha, 0.0, state.sigma_r).sum())
    lp += log_beta_prior(state.beta, state.indicators, state.mu, state.tau, prior)
    if prior.has_selection:
        probs = prior.inclusion_prior
        with np.errstate(divide="ignore"):
            mass = np.where(state.indicators, np.log(probs), np.log1p(-probs))
        lp += float(mass.sum())
    if prior.has_mu:
        lp += float(normal_logpdf(state.mu, 0.0, prior.mu_prior_sd))
    if prior.has_tau:
        lp += float(lognormal_logpdf(state.tau, *prior.tau_logprior))
    lp += float(lognormal_logpdf(state.sigma, *prior.sigma_logprior).sum())
    lp += float(lognormal_logpdf(state.sigma_r, *prior.sigma_logprior))
    lp += float(normal_logpdf(state.nu, 0.0, prior.nu_prior_sd).sum())
    lp += float(normal_logpdf(state.gamma, 0.0, prior.gamma_prior_sd).sum())
    return lp
