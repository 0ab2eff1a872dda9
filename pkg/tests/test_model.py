"""Prior configuration, parameter-state invariants, and the joint density.

The joint density is checked term by term against an independent
reimplementation built on scipy.stats, and the slope mixture prior is
checked to integrate to one by quadrature.
"""

import numpy as np
import pytest
from scipy import integrate, stats

from outsel import (DimensionError, ParameterState, PriorConfig,
                    ValidationError, application_priors, log_beta_prior,
                    log_joint, simulation_priors)

from conftest import make_design


def oracle_log_joint(state, design, prior):
    """Independent joint log density using scipy distributions."""
    k, j = design.outcome, design.individual
    mean = (state.nu[k] + state.alpha[j] + state.beta[k] * design.exposure
            + state.gamma[k] * design.confounder)
    lp = stats.norm.logpdf(design.y, mean, state.sigma[k]).sum()
    lp += stats.norm.logpdf(state.alpha, 0.0, state.sigma_r).sum()
    if prior.regime == "laplace":
        lp += stats.laplace.logpdf(state.beta, 0.0, prior.laplace_scale).sum()
    else:
        slab_mean = 0.0 if prior.regime == "ssvs_zero" else state.mu
        if prior.spike_mode == "ratio":
            spike_sd = state.tau / np.sqrt(prior.spike_ratio)
        else:
            spike_sd = np.sqrt(prior.spike_variance)
        for idx in range(prior.K):
            if not prior.active_mask()[idx]:
                continue
            if state.indicators[idx]:
                lp += stats.norm.logpdf(state.beta[idx], slab_mean, state.tau)
            else:
                lp += stats.norm.logpdf(state.beta[idx], 0.0, spike_sd)
    if prior.regime in ("ssvs_mu", "ssvs_zero"):
        p = prior.inclusion_prior
        lp += np.where(state.indicators, np.log(p), np.log1p(-p)).sum()
    if prior.regime in ("ssvs_mu", "hierarchical", "subset"):
        lp += stats.norm.logpdf(state.mu, 0.0, prior.mu_prior_sd)
    if prior.regime != "laplace":
        loc, scale = prior.tau_logprior
        lp += stats.lognorm.logpdf(state.tau, s=scale, scale=np.exp(loc))
    loc, scale = prior.sigma_logprior
    lp += stats.lognorm.logpdf(state.sigma, s=scale, scale=np.exp(loc)).sum()
    lp += stats.lognorm.logpdf(state.sigma_r, s=scale, scale=np.exp(loc))
    lp += stats.norm.logpdf(state.nu, 0.0, prior.nu_prior_sd).sum()
    lp += stats.norm.logpdf(state.gamma, 0.0, prior.gamma_prior_sd).sum()
    return float(lp)


def random_state(prior, design, seed=0):
    rng = np.random.default_rng(seed)
    K, n = prior.K, design.n
    active = prior.active_mask()
    if prior.regime in ("ssvs_mu", "ssvs_zero"):
        indicators = rng.random(K) < 0.5
    else:
        indicators = np.array(active)
    beta = rng.normal(size=K)
    beta[~active] = 0.0
    return ParameterState(
        beta=beta,
        indicators=indicators,
        mu=0.0 if prior.regime in ("ssvs_zero", "laplace") else rng.normal(),
        tau=1.0 if prior.regime == "laplace" else float(rng.uniform(0.5, 2.0)),
        nu=rng.normal(size=K),
        gamma=rng.normal(size=K),
        alpha=rng.normal(size=n) * 0.3,
        sigma=rng.uniform(0.5, 2.0, size=K),
        sigma_r=float(rng.uniform(0.3, 1.5)),
    )


class TestPriorConfig:
    def test_builders_have_documented_defaults(self):
        sim = simulation_priors(4)
        app = application_priors(4)
        assert sim.mu_prior_sd == 10.0 and app.mu_prior_sd == 1.0
        assert sim.regime == "ssvs_mu"
        assert np.allclose(sim.inclusion_prior, 0.5)
        assert sim.tau_logprior == (0.0, 1.0)
        assert sim.sigma_logprior == (0.0, 10.0)
        assert sim.spike_mode == "ratio" and sim.spike_ratio == 100.0

    def test_inclusion_prior_bounds(self):
        with pytest.raises(ValidationError):
            simulation_priors(2, inclusion=0.0)
        with pytest.raises(ValidationError):
            simulation_priors(2, inclusion=1.2)
        simulation_priors(2, inclusion=1.0)  # closed at one

    def test_vector_inclusion(self):
        p = simulation_priors(3, inclusion=[0.1, 0.5, 0.9])
        assert p.inclusion_prior.tolist() == [0.1, 0.5, 0.9]
        assert p.K == 3

    def test_subset_requires_mask(self):
        with pytest.raises(ValidationError):
            simulation_priors(3, regime="subset")
        with pytest.raises(ValidationError):
            simulation_priors(3, regime="subset",
                              subset_include=[False, False, False])
        with pytest.raises(ValidationError):
            simulation_priors(3, subset_include=[True, True, False])
        ok = simulation_priors(3, regime="subset",
                               subset_include=[True, False, True])
        assert ok.active_mask().tolist() == [True, False, True]

    def test_unknown_regime_or_spike_mode(self):
        with pytest.raises(ValidationError):
            simulation_priors(2, regime="lasso")
        with pytest.raises(ValidationError):
            simulation_priors(2, spike_mode="wide")

    def test_regime_flags(self):
        flags = {r: (simulation_priors(2, regime=r,
                                       subset_include=[True, False]
                                       if r == "subset" else None))
                 for r in ("ssvs_mu", "ssvs_zero", "hierarchical", "laplace",
                           "subset")}
        assert [flags[r].has_selection for r in flags] == [True, True, False,
                                                           False, False]
        assert flags["ssvs_mu"].has_mu and flags["hierarchical"].has_mu
        assert flags["subset"].has_mu
        assert not flags["ssvs_zero"].has_mu and not flags["laplace"].has_mu
        assert not flags["laplace"].has_tau and flags["ssvs_zero"].has_tau

    def test_spike_variance_modes(self):
        ratio = simulation_priors(2, spike_ratio=25.0)
        assert ratio.spike_var(2.0) == pytest.approx(4.0 / 25.0)
        fixed = simulation_priors(2, spike_mode="fixed", spike_variance=0.09)
        assert fixed.spike_var(2.0) == 0.09

    def test_slab_mean_is_zero_for_classical_variant(self):
        assert simulation_priors(2, regime="ssvs_zero").slab_mean(3.0) == 0.0
        assert simulation_priors(2).slab_mean(3.0) == 3.0


class TestParameterState:
    def test_sentinels_enforced(self, design):
        prior = simulation_priors(design.K, regime="ssvs_zero")
        state = random_state(prior, design)
        state.mu = 1.0
        with pytest.raises(ValidationError):
            state.validate(prior)

    def test_subset_masked_slopes_must_be_zero(self, design):
        prior = simulation_priors(design.K, regime="subset",
                                  subset_include=[True, False, True])
        state = random_state(prior, design)
        state.beta[1] = 0.5
        with pytest.raises(ValidationError):
            state.validate(prior)

    def test_non_selection_requires_full_indicators(self, design):
        prior = simulation_priors(design.K, regime="hierarchical")
        state = random_state(prior, design)
        state.indicators = np.array([True, False, True])
        with pytest.raises(ValidationError):
            state.validate(prior)

    def test_copy_is_deep(self, design):
        prior = simulation_priors(design.K)
        state = random_state(prior, design)
        clone = state.copy()
        clone.beta[0] += 1.0
        assert state.beta[0] != clone.beta[0]


class TestLogJoint:
    @pytest.mark.parametrize("regime", ["ssvs_mu", "ssvs_zero", "hierarchical",
                                        "laplace", "subset"])
    def test_matches_scipy_oracle(self, design, regime):
        kwargs = {"subset_include": [True, False, True]} if regime == "subset" else {}
        prior = simulation_priors(design.K, regime=regime, inclusion=0.3,
                                  **kwargs)
        for seed in range(3):
            state = random_state(prior, design, seed=seed)
            got = log_joint(state, design, prior)
            want = oracle_log_joint(state, design, prior)
            assert got == pytest.approx(want, abs=1e-10)

    def test_fixed_spike_matches_oracle(self, design):
        prior = simulation_priors(design.K, spike_mode="fixed",
                                  spike_variance=0.25)
        state = random_state(prior, design, seed=9)
        assert log_joint(state, design, prior) == pytest.approx(
            oracle_log_joint(state, design, prior), abs=1e-10)

    def test_hierarchical_equals_always_included_ssvs(self, design):
        """With inclusion prior 1 and all indicators on, the SSVS joint is the
        hierarchical joint: the Bernoulli mass at p=1 is log(1)=0."""
        ssvs = simulation_priors(design.K, regime="ssvs_mu", inclusion=1.0)
        hier = simulation_priors(design.K, regime="hierarchical")
        state = random_state(hier, design, seed=4)
        assert log_joint(state, design, ssvs) == pytest.approx(
            log_joint(state, design, hier), abs=1e-12)

    def test_missing_rows_change_only_likelihood(self):
        """Dropping one observed cell removes exactly its likelihood term."""
        full = make_design(n=10, K=3, seed=11)
        holed = make_design(n=10, K=3, seed=11, missing=[(2, 1)])
        prior = simulation_priors(3)
        state = random_state(prior, full, seed=2)
        gap = log_joint(state, full, prior) - log_joint(state, holed, prior)
        row = np.flatnonzero((full.individual == 2) & (full.outcome == 1))[0]
        mean = (state.nu[1] + state.alpha[2] + state.beta[1] * full.exposure[row]
                + state.gamma[1] * full.confounder[row])
        assert gap == pytest.approx(
            float(stats.norm.logpdf(full.y[row], mean, state.sigma[1])), abs=1e-10)

    def test_dimension_mismatch_raises(self, design):
        prior = simulation_priors(design.K + 1)
        state = random_state(prior, design)
        with pytest.raises(DimensionError):
            log_joint(state, design, prior)


class TestLogBetaPrior:
    def test_mixture_component_normalizes(self):
        """Each slope's conditional prior integrates to one."""
        prior = simulation_priors(1, inclusion=0.4)
        for included in (True, False):
            def dens(b):
                return np.exp(log_beta_prior(
                    np.array([b]), np.array([included]), 0.7, 0.9, prior))
            total, _ = integrate.quad(dens, -np.inf, np.inf)
            assert total == pytest.approx(1.0, abs=1e-8)

    def test_nonzero_masked_slope_rejected(self):
        prior = simulation_priors(2, regime="subset",
                                  subset_include=[True, False])
        with pytest.raises(ValidationError):
            log_beta_prior(np.array([0.5, 0.1]), np.array([True, False]),
                           0.0, 1.0, prior)

    def test_laplace_matches_scipy(self):
        prior = simulation_priors(3, regime="laplace", laplace_scale=0.8)
        beta = np.array([-1.0, 0.0, 2.5])
        got = log_beta_prior(beta, np.ones(3, dtype=bool), 0.0, 1.0, prior)
        assert got == pytest.approx(
            stats.laplace.logpdf(beta, scale=0.8).sum(), abs=1e-12)
