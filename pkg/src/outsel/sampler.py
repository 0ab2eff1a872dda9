"""Blocked Gibbs sampler for the outcome-selection mixed model.

One sweep updates, in order:

1. the slope block: under a selection regime each (indicator, slope) pair
   is redrawn jointly, with the slope integrated out of the indicator draw
   so a tight spike cannot trap the chain; under the other regimes the
   slopes are redrawn from their normal conditionals (or slice-sampled
   against the Laplace prior);
2. the shared slope center mu (conjugate normal);
3. the linear block: per-outcome intercepts, per-outcome confounder
   slopes, and per-individual random intercepts (conjugate normals);
4. the scales tau, sigma (per outcome), and sigma_r, each slice-sampled on
   the log scale because the log-normal priors are not conjugate.

All indexed updates are vectorized: the (indicator, slope) pairs are
conditionally independent across outcomes given the rest of the state, as
are the intercept and confounder coefficients across outcomes and the
random intercepts across individuals, so each block is one batched draw.
Chains are therefore sequential but cheap per sweep.

Each chain gets its own generator spawned from (seed, chain index), so a
chain's draws do not depend on how many chains run, and rerunning with the
same seed reproduces every draw bit for bit.
"""

from __future__ import annotations

import re
import time
from dataclasses import dataclass

import numpy as np

from .data import LongDesign
from .errors import (DimensionError, NonFiniteStateError, SliceStepError,
                     ValidationError)
from .model import ParameterState, PriorConfig

__all__ = [
    "SamplerConfig",
    "ChainDraws",
    "ChainOutput",
    "GibbsSampler",
    "slice_sample",
    "run_chain",
]

_MAX_SHRINK = 1000


@dataclass(frozen=True)
class SamplerConfig:
    """Chain layout and tuning constants.

    n_samples sweeps run after n_burnin; every thinning-th state is kept,
    so each chain retains n_samples // thinning draws.  slice_width is the
    initial bracket for every slice update and max_slice_steps caps the
    stepping-out expansion per side.
    """

    n_chains: int = 4
    n_burnin: int = 5000
    n_samples: int = 5000
    thinning: int = 5
    seed: int = 0
    slice_width: float = 1.0
    max_slice_steps: int = 100

    def __post_init__(self):
        if self.n_chains < 1:
            raise ValidationError("n_chains must be >= 1")
        if self.n_burnin < 0:
            raise ValidationError("n_burnin must be >= 0")
        if self.thinning < 1:
            raise ValidationError("thinning must be >= 1")
        if self.n_samples < self.thinning:
            raise ValidationError("n_samples must be >= thinning (need at least one draw)")
        if not (np.isfinite(self.slice_width) and self.slice_width > 0):
            raise ValidationError("slice_width must be positive")
        if self.max_slice_steps < 1:
            raise ValidationError("max_slice_steps must be >= 1")

    @property
    def draws_per_chain(self) -> int:
        return self.n_samples // self.thinning


def slice_sample(x0, log_density, rng, width, max_steps, labels="parameter"):
    """One slice-sampling update for a batch of independent scalars.

    ``log_density`` maps a batch vector to per-component log densities (up
    to constants).  Uses the stepping-out procedure with a uniformly
    positioned initial bracket of ``width``, growing at most ``max_steps``
    times per side, then shrinks toward the current point on rejection.
    Components are treated independently; ``labels`` names them in errors.
    """
    x0 = np.asarray(x0, dtype=float)
    f0 = np.asarray(log_density(x0), dtype=float)
    if not np.isfinite(f0).all():
        raise NonFiniteStateError(f"slice start for {labels} has non-finite log density")
    level = f0 - rng.exponential(size=x0.shape)
    left = x0 - width * rng.random(x0.shape)
    right = left + width

    def _names(mask) -> str:
        if isinstance(labels, str):
            return labels
        return ", ".join(np.asarray(labels)[mask])

    grow = np.asarray(log_density(left)) > level
    for _ in range(max_steps):
        if not grow.any():
            break
        left = np.where(grow, left - width, left)
        grow = grow & (np.asarray(log_density(left)) > level)
    if grow.any():
        raise SliceStepError(
            f"stepping out exceeded {max_steps} steps (left) for {_names(grow)}")
    grow = np.asarray(log_density(right)) > level
    for _ in range(max_steps):
        if not grow.any():
            break
        right = np.where(grow, right + width, right)
        grow = grow & (np.asarray(log_density(right)) > level)
    if grow.any():
        raise SliceStepError(
            f"stepping out exceeded {max_steps} steps (right) for {_names(grow)}")

    x_new = np.array(x0)
    pending = np.ones(x0.shape, dtype=bool)
    for _ in range(_MAX_SHRINK):
        prop = left + rng.random(x0.shape) * (right - left)
        accept = pending & (np.asarray(log_density(prop)) > level)
        x_new = np.where(accept, prop, x_new)
        pending &= ~accept
        if not pending.any():
            return x_new
        shrink_left = pending & (prop < x0)
        left = np.where(shrink_left, prop, left)
        right = np.where(pending & (prop >= x0), prop, right)
    raise SliceStepError(f"shrinkage failed to accept for {_names(pending)}")


@dataclass
class ChainDraws:
    """Retained draws of one chain; arrays are (draws,) or (draws, dim)."""

    chain_index: int
    beta: np.ndarray
    indicators: np.ndarray
    mu: np.ndarray
    tau: np.ndarray
    sigma: np.ndarray
    sigma_r: np.ndarray
    nu: np.ndarray
    gamma: np.ndarray
    alpha: np.ndarray

    @property
    def n_draws(self) -> int:
        return self.mu.shape[0]


_INDEXED = ("beta", "I", "sigma", "nu", "gamma", "alpha")
_SCALARS = ("mu", "tau", "sigma_r")
_NAME_RE = re.compile(r"^([a-zA-Z_]+)\[(\d+)\]$")


@dataclass
class ChainOutput:
    """All chains of one fit plus the configuration that produced them."""

    chains: tuple[ChainDraws, ...]
    n: int
    K: int
    outcome_names: tuple[str, ...]
    prior: PriorConfig
    config: SamplerConfig
    wall_time_s: float = float("nan")

    def __post_init__(self):
        self.chains = tuple(self.chains)
        self.outcome_names = tuple(str(s) for s in self.outcome_names)
        if not self.chains:
            raise ValidationError("ChainOutput needs at least one chain")
        counts = {c.n_draws for c in self.chains}
        if len(counts) != 1:
            raise ValidationError(f"chains disagree on draw counts: {sorted(counts)}")

    @property
    def n_chains(self) -> int:
        return len(self.chains)

    @property
    def draws_per_chain(self) -> int:
        return self.chains[0].n_draws

    def scalar_series(self, name: str) -> np.ndarray:
        """(n_chains, draws) matrix for one scalar, e.g. "mu" or "beta[3]".

        Bracketed indices are 1-based, matching file columns and reports.
        Indicator series ("I[k]") are returned as 0/1 floats.
        """
        if name in _SCALARS:
            return np.stack([getattr(c, name) for c in self.chains])
        m = _NAME_RE.match(name)
        if m and m.group(1) in _INDEXED:
            base, idx = m.group(1), int(m.group(2)) - 1
            field = "indicators" if base == "I" else base
            dim = self.n if base == "alpha" else self.K
            if not 0 <= idx < dim:
                raise ValidationError(f"index out of range in {name!r} (1..{dim})")
            return np.stack([getattr(c, field)[:, idx].astype(float) for c in self.chains])
        raise ValidationError(f"unknown series name {name!r}")

    def pooled(self, name: str) -> np.ndarray:
        """All chains' draws of one scalar concatenated, length chains*draws."""
        return self.scalar_series(name).reshape(-1)


def _logit(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(p) - np.log1p(-p)


def _expit(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    with np.errstate(over="ignore"):
        out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
        e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


class GibbsSampler:
    """Sampler bound to one design, prior, and chain configuration.

    The public update_* methods perform a single conditional update in
    place and are the building blocks of ``sweep``; they are exposed so
    tests can exercise each conditional on its own.
    """

    def __init__(self, design: LongDesign, prior: PriorConfig, config: SamplerConfig):
        if prior.K != design.K:
            raise DimensionError(f"prior has K={prior.K}, design has K={design.K}")
        self.design = design
        self.prior = prior
        self.config = config
        self.n = design.n
        self.K = design.K
        self.m = design.n_rows
        self.y = np.array(design.y)
        self.k_idx = design.outcome
        self.j_idx = design.individual
        self.x = design.exposure
        self.z = design.confounder
        self.rows_k = np.bincount(self.k_idx, minlength=self.K)
        self.rows_j = np.bincount(self.j_idx, minlength=self.n)
        self.sxx = np.bincount(self.k_idx, weights=self.x * self.x, minlength=self.K)
        self.szz = np.bincount(self.k_idx, weights=self.z * self.z, minlength=self.K)
        self.active = prior.active_mask()
        self._scale_labels = np.array(["tau"] + [f"sigma[{k + 1}]" for k in range(self.K)]
                                      + ["sigma_r"])
        self._beta_labels = np.array([f"beta[{k + 1}]" for k in range(self.K)])

    # ----- plumbing -------------------------------------------------------

    def set_outcomes(self, y: np.ndarray) -> None:
        """Swap in a new outcome vector of the same layout.

        Only the response values change; indices and covariates stay.  This
        supports simulation-based sampler checking, where observed values
        are repeatedly redrawn from the model.
        """
        y = np.asarray(y, dtype=float).reshape(-1)
        if y.shape[0] != self.m:
            raise DimensionError(f"expected {self.m} outcome values, got {y.shape[0]}")
        if not np.isfinite(y).all():
            raise ValidationError("outcome values must be finite")
        self.y = y

    def simulate_outcomes(self, state: ParameterState, rng) -> np.ndarray:
        """Draw a response vector from the model at ``state``."""
        mean = (state.nu[self.k_idx] + state.alpha[self.j_idx]
                + state.beta[self.k_idx] * self.x + state.gamma[self.k_idx] * self.z)
        return mean + state.sigma[self.k_idx] * rng.standard_normal(self.m)

    def _residuals(self, state: ParameterState) -> np.ndarray:
        return (self.y - state.nu[self.k_idx] - state.alpha[self.j_idx]
                - state.beta[self.k_idx] * self.x - state.gamma[self.k_idx] * self.z)

    def _check_state(self, state: ParameterState) -> None:
        ok = (np.isfinite(state.beta).all() and np.isfinite(state.nu).all()
              and np.isfinite(state.gamma).all() and np.isfinite(state.alpha).all()
              and np.isfinite(state.sigma).all() and np.isfinite(state.mu)
              and np.isfinite(state.tau) and np.isfinite(state.sigma_r))
        if not ok:
            raise NonFiniteStateError("sampler state contains non-finite values")

    # ----- slope block ----------------------------------------------------

    def _slope_stats(self, state: ParameterState, resid: np.ndarray):
        """Partial residuals excluding the slope term, and sufficient stats."""
        pr = resid + state.beta[self.k_idx] * self.x
        sxr = np.bincount(self.k_idx, weights=self.x * pr, minlength=self.K)
        w = 1.0 / np.square(state.sigma)
        return pr, sxr * w, self.sxx * w

    @staticmethod
    def _log_evidence(prior_mean, prior_var, b, a):
        """Log integral of exp(b*beta - a*beta^2/2) against N(prior_mean, prior_var)."""
        q = prior_var * a
        num = 2.0 * prior_mean * b + prior_var * b * b - prior_mean * prior_mean * a
        return num / (2.0 * (1.0 + q)) - 0.5 * np.log1p(q)

    def _selection_logits(self, state: ParameterState, resid: np.ndarray) -> np.ndarray:
        _, b, a = self._slope_stats(state, resid)
        slab_mean = self.prior.slab_mean(state.mu)
        d_slab = self._log_evidence(slab_mean, state.tau ** 2, b, a)
        d_spike = self._log_evidence(0.0, self.prior.spike_var(state.tau), b, a)
        return _logit(self.prior.inclusion_prior) + d_slab - d_spike

    def indicator_probabilities(self, state: ParameterState) -> np.ndarray:
        """P(indicator_k = 1 | everything else) with the slope integrated out."""
        if not self.prior.has_selection:
            raise ValidationError(f"regime {self.prior.regime!r} has no indicators to update")
        return _expit(self._selection_logits(state, self._residuals(state)))

    def _draw_slopes_given(self, indicators, state, pr, b, a, rng) -> np.ndarray:
        slab_mean = self.prior.slab_mean(state.mu)
        m0 = np.where(indicators, slab_mean, 0.0)
        v0 = np.where(indicators, state.tau ** 2, self.prior.spike_var(state.tau))
        denom = 1.0 + v0 * a
        mean = (m0 + v0 * b) / denom
        sd = np.sqrt(v0 / denom)
        beta = mean + sd * rng.standard_normal(self.K)
        beta[~self.active] = 0.0
        return beta

    def slope_conditional_moments(self, state: ParameterState):
        """Posterior (mean, variance) of each slope given current indicators."""
        resid = self._residuals(state)
        _, b, a = self._slope_stats(state, resid)
        m0 = np.where(state.indicators, self.prior.slab_mean(state.mu), 0.0)
        v0 = np.where(state.indicators, state.tau ** 2, self.prior.spike_var(state.tau))
        denom = 1.0 + v0 * a
        return (m0 + v0 * b) / denom, v0 / denom

    def _step_slopes(self, state: ParameterState, rng, resid: np.ndarray) -> np.ndarray:
        if self.prior.regime == "laplace":
            return self._step_slopes_laplace(state, rng, resid)
        pr, b, a = self._slope_stats(state, resid)
        if self.prior.has_selection:
            p1 = _expit(_logit(self.prior.inclusion_prior)
                        + self._log_evidence(self.prior.slab_mean(state.mu),
                                             state.tau ** 2, b, a)
                        - self._log_evidence(0.0, self.prior.spike_var(state.tau), b, a))
            state.indicators = rng.random(self.K) < p1
        state.beta = self._draw_slopes_given(state.indicators, state, pr, b, a, rng)
        return pr - state.beta[self.k_idx] * self.x

    def _step_slopes_laplace(self, state: ParameterState, rng, resid: np.ndarray) -> np.ndarray:
        pr, b, a = self._slope_stats(state, resid)
        scale = self.prior.laplace_scale

        def logf(beta):
            return b * beta - 0.5 * a * np.square(beta) - np.abs(beta) / scale

        state.beta = slice_sample(state.beta, logf, rng, self.config.slice_width,
                                  self.config.max_slice_steps, self._beta_labels)
        return pr - state.beta[self.k_idx] * self.x

    def update_indicators(self, state: ParameterState, rng) -> None:
        """Joint redraw of all (indicator, slope) pairs, slope marginalized."""
        if not self.prior.has_selection:
            raise ValidationError(f"regime {self.prior.regime!r} has no indicators to update")
        self._step_slopes(state, rng, self._residuals(state))

    def update_slopes(self, state: ParameterState, rng) -> None:
        """Redraw slopes from their normal conditionals, indicators fixed."""
        resid = self._residuals(state)
        pr, b, a = self._slope_stats(state, resid)
        if self.prior.regime == "laplace":
            self._step_slopes_laplace(state, rng, resid)
        else:
            state.beta = self._draw_slopes_given(state.indicators, state, pr, b, a, rng)

    # ----- shared center --------------------------------------------------

    def update_mu(self, state: ParameterState, rng) -> None:
        """Conjugate draw of the shared slope center, where the regime has one.

        Pools the slab members: the currently included outcomes under
        selection, every active outcome otherwise.
        """
        if not self.prior.has_mu:
            return
        pool = state.indicators & self.active
        tau2 = state.tau ** 2
        prec = pool.sum() / tau2 + 1.0 / self.prior.mu_prior_sd ** 2
        var = 1.0 / prec
        mean = var * state.beta[pool].sum() / tau2
        state.mu = mean + np.sqrt(var) * rng.standard_normal()

    # ----- linear block ----------------------------------------------------

    def _step_intercepts(self, state, rng, resid):
        pr = resid + state.nu[self.k_idx]
        w = 1.0 / np.square(state.sigma)
        prec = 1.0 / self.prior.nu_prior_sd ** 2 + self.rows_k * w
        mean = np.bincount(self.k_idx, weights=pr, minlength=self.K) * w / prec
        state.nu = mean + np.sqrt(1.0 / prec) * rng.standard_normal(self.K)
        return pr - state.nu[self.k_idx]

    def _step_confounder(self, state, rng, resid):
        pr = resid + state.gamma[self.k_idx] * self.z
        w = 1.0 / np.square(state.sigma)
        prec = 1.0 / self.prior.gamma_prior_sd ** 2 + self.szz * w
        mean = np.bincount(self.k_idx, weights=self.z * pr, minlength=self.K) * w / prec
        state.gamma = mean + np.sqrt(1.0 / prec) * rng.standard_normal(self.K)
        return pr - state.gamma[self.k_idx] * self.z

    def _step_random_intercepts(self, state, rng, resid):
        pr = resid + state.alpha[self.j_idx]
        w_row = 1.0 / np.square(state.sigma)[self.k_idx]
        prec = 1.0 / state.sigma_r ** 2 + np.bincount(self.j_idx, weights=w_row,
                                                      minlength=self.n)
        mean = np.bincount(self.j_idx, weights=w_row * pr, minlength=self.n) / prec
        state.alpha = mean + np.sqrt(1.0 / prec) * rng.standard_normal(self.n)
        return pr - state.alpha[self.j_idx]

    def update_linear_block(self, state: ParameterState, rng) -> None:
        """Conjugate draws of intercepts, confounder slopes, random intercepts."""
        resid = self._residuals(state)
        resid = self._step_intercepts(state, rng, resid)
        resid = self._step_confounder(state, rng, resid)
        self._step_random_intercepts(state, rng, resid)

    # ----- scales -----------------------------------------------------------

    def _slice_log_scale(self, current, n_terms, sum_sq, loc, scale, rng, labels):
        """Slice update for scales with log-normal priors.

        The conditional of a scale s with n_terms attached normal terms and
        sum of squared deviations sum_sq is, on the log scale u = log s,
        proportional to -n_terms*u - sum_sq*exp(-2u)/2 plus the normal prior
        on u (the log-normal Jacobian cancels against the 1/s of the prior
        density).  The exponent clamp keeps exp finite far left of the mass;
        a zero sum_sq then contributes exactly nothing there.
        """
        n_terms = np.asarray(n_terms, dtype=float)
        sum_sq = np.asarray(sum_sq, dtype=float)
        loc = np.asarray(loc, dtype=float)
        inv_scale = 1.0 / np.asarray(scale, dtype=float)

        def logf(u):
            quad = sum_sq * np.exp(np.minimum(-2.0 * u, 700.0))
            return -n_terms * u - 0.5 * quad - 0.5 * np.square((u - loc) * inv_scale)

        u_new = slice_sample(np.log(current), logf, rng, self.config.slice_width,
                             self.config.max_slice_steps, labels)
        return np.exp(u_new)

    def _tau_stats(self, state: ParameterState) -> tuple[int, float]:
        """Count of normal terms hanging off tau and their sum of squares."""
        slab = state.indicators & self.active
        dev = state.beta - self.prior.slab_mean(state.mu)
        ss = float(np.square(dev[slab]).sum())
        n_terms = int(slab.sum())
        if self.prior.has_selection and self.prior.spike_mode == "ratio":
            spiked = self.active & ~state.indicators
            ss += self.prior.spike_ratio * float(np.square(state.beta[spiked]).sum())
            n_terms += int(spiked.sum())
        return n_terms, ss

    def _step_scales(self, state: ParameterState, rng, resid: np.ndarray) -> None:
        """Joint slice update of tau, all sigmas, and sigma_r.

        The three conditionals share one functional form and are mutually
        independent given the rest of the state (tau sees only the slopes,
        each sigma only its outcome's residuals, sigma_r only the random
        intercepts), so they form a single batched draw.
        """
        ssr = np.bincount(self.k_idx, weights=resid * resid, minlength=self.K)
        ss_alpha = float(np.square(state.alpha).sum())
        sloc, sscale = self.prior.sigma_logprior
        if self.prior.has_tau:
            t_terms, t_ss = self._tau_stats(state)
            tloc, tscale = self.prior.tau_logprior
            current = np.concatenate(([state.tau], state.sigma, [state.sigma_r]))
            n_terms = np.concatenate(([t_terms], self.rows_k, [self.n]))
            sum_sq = np.concatenate(([t_ss], ssr, [ss_alpha]))
            loc = np.concatenate(([tloc], np.full(self.K, sloc), [sloc]))
            scale = np.concatenate(([tscale], np.full(self.K, sscale), [sscale]))
            new = self._slice_log_scale(current, n_terms, sum_sq, loc, scale,
                                        rng, self._scale_labels)
            state.tau = float(new[0])
            state.sigma = new[1:-1]
        else:
            current = np.concatenate((state.sigma, [state.sigma_r]))
            n_terms = np.concatenate((self.rows_k, [self.n]))
            sum_sq = np.concatenate((ssr, [ss_alpha]))
            new = self._slice_log_scale(current, n_terms, sum_sq, sloc, sscale,
                                        rng, self._scale_labels[1:])
            state.sigma = new[:-1]
        state.sigma_r = float(new[-1])

    def update_scales(self, state: ParameterState, rng) -> None:
        """Slice update of tau, the per-outcome sigmas, and sigma_r."""
        self._step_scales(state, rng, self._residuals(state))

    # ----- sweep and chains -------------------------------------------------

    def sweep(self, state: ParameterState, rng) -> None:
        """One full scan over all conditionals, mutating ``state``."""
        resid = self._residuals(state)
        resid = self._step_slopes(state, rng, resid)
        self.update_mu(state, rng)
        resid = self._step_intercepts(state, rng, resid)
        resid = self._step_confounder(state, rng, resid)
        resid = self._step_random_intercepts(state, rng, resid)
        self._step_scales(state, rng, resid)
        self._check_state(state)

    def initial_state(self) -> ParameterState:
        """Deterministic start from per-outcome least squares.

        Slopes and intercepts come from a univariate fit per outcome,
        noise scales from the fit residuals, the slope center and scale
        from the spread of the fitted slopes; indicators start at their
        structural values (all on, or the subset mask).
        """
        cnt = np.maximum(self.rows_k, 1)
        ybar = np.bincount(self.k_idx, weights=self.y, minlength=self.K) / cnt
        xbar = np.bincount(self.k_idx, weights=self.x, minlength=self.K) / cnt
        sxy = np.bincount(self.k_idx, weights=self.x * self.y, minlength=self.K) \
            - self.rows_k * xbar * ybar
        sxx = self.sxx - self.rows_k * xbar * xbar
        safe = sxx > 1e-10
        slope = np.where(safe, sxy / np.where(safe, sxx, 1.0), 0.0)
        slope[~self.active] = 0.0
        nu0 = ybar - slope * xbar
        resid = self.y - nu0[self.k_idx] - slope[self.k_idx] * self.x
        ssr = np.bincount(self.k_idx, weights=resid * resid, minlength=self.K)
        sigma0 = np.sqrt(ssr / np.maximum(self.rows_k - 1, 1))
        sigma0[self.rows_k == 0] = 1.0
        sigma0 = np.maximum(sigma0, 1e-2)
        mu0 = float(slope[self.active].mean()) if self.prior.has_mu else 0.0
        tau0 = max(float(slope[self.active].std()), 0.1) if self.prior.has_tau else 1.0
        return ParameterState(
            beta=slope,
            indicators=self.active.copy(),
            mu=mu0,
            tau=tau0,
            nu=nu0,
            gamma=np.zeros(self.K),
            alpha=np.zeros(self.n),
            sigma=sigma0,
            sigma_r=0.5,
        )

    def _run_one_chain(self, chain_index: int) -> ChainDraws:
        cfg = self.config
        rng = np.random.default_rng(np.random.SeedSequence(cfg.seed,
                                                           spawn_key=(chain_index,)))
        state = self.initial_state()
        keep = cfg.draws_per_chain
        out = ChainDraws(
            chain_index=chain_index,
            beta=np.empty((keep, self.K)),
            indicators=np.empty((keep, self.K), dtype=bool),
            mu=np.empty(keep),
            tau=np.empty(keep),
            sigma=np.empty((keep, self.K)),
            sigma_r=np.empty(keep),
            nu=np.empty((keep, self.K)),
            gamma=np.empty((keep, self.K)),
            alpha=np.empty((keep, self.n)),
        )
        stored = 0
        for t in range(cfg.n_burnin + cfg.n_samples):
            try:
                self.sweep(state, rng)
            except (NonFiniteStateError, SliceStepError) as err:
                phase = "burn-in" if t < cfg.n_burnin else "sampling"
                raise type(err)(f"chain {chain_index}, {phase} sweep {t}: {err}") from None
            t_sample = t - cfg.n_burnin + 1
            if t_sample >= 1 and t_sample % cfg.thinning == 0:
                out.beta[stored] = state.beta
                out.indicators[stored] = state.indicators
                out.mu[stored] = state.mu
                out.tau[stored] = state.tau
                out.sigma[stored] = state.sigma
                out.sigma_r[stored] = state.sigma_r
                out.nu[stored] = state.nu
                out.gamma[stored] = state.gamma
                out.alpha[stored] = state.alpha
                stored += 1
        return out

    def run(self) -> ChainOutput:
        """Run all configured chains sequentially and collect their draws."""
        t0 = time.perf_counter()
        chains = tuple(self._run_one_chain(c) for c in range(self.config.n_chains))
        return ChainOutput(
            chains=chains,
            n=self.n,
            K=self.K,
            outcome_names=self.design.outcome_names,
            prior=self.prior,
            config=self.config,
            wall_time_s=time.perf_counter() - t0,
        )


def run_chain(design: LongDesign, prior: PriorConfig, config: SamplerConfig) -> ChainOutput:
    """Fit the model: run every configured chain on the given design."""
    return GibbsSampler(design, prior, config).run()
