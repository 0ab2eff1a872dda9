"""Synthetic generators and the replication grid.

Generator laws are verified by Monte Carlo against their stated moments;
the grid is verified for determinism, shared datasets across regimes,
and failure isolation.
"""

import numpy as np
import pytest

from outsel import (SliceStepError, Study1Params, Study2Params, TruthRecord,
                    ValidationError, gen_exposure, generate_study1,
                    generate_study2, run_replication_grid)
import outsel.simulate as simulate_mod

from conftest import quick_config


class TestGenExposure:
    def test_marginal_moments(self):
        rng = np.random.default_rng(0)
        x, z = gen_exposure(1_000_000, rng)
        # mixture: N(0, 0.25) with prob 1/2, N(1, 1) with prob 1/2
        assert x.mean() == pytest.approx(0.5, abs=0.005)
        true_var = 0.5 * 0.25 + 0.5 * (1 + 1) - 0.25
        assert x.var() == pytest.approx(true_var, rel=0.01)
        assert z.mean() == pytest.approx(0.0, abs=0.005)
        assert z.var() == pytest.approx(1.0, rel=0.01)

    def test_branches_follow_confounder_sign(self):
        rng = np.random.default_rng(1)
        x, z = gen_exposure(200_000, rng)
        low, high = x[z < 0], x[z >= 0]
        assert low.mean() == pytest.approx(0.0, abs=0.01)
        assert low.std() == pytest.approx(0.5, abs=0.01)
        assert high.mean() == pytest.approx(1.0, abs=0.01)
        assert high.std() == pytest.approx(1.0, abs=0.01)

    def test_exposure_correlates_with_confounder(self):
        rng = np.random.default_rng(2)
        x, z = gen_exposure(200_000, rng)
        assert np.corrcoef(x, z)[0, 1] > 0.3


class TestTruthRecord:
    def test_zero_outside_relevant_enforced(self):
        with pytest.raises(ValidationError):
            TruthRecord(np.array([1.0, 0.5]), np.array([True, False]), 1.0, {})

    def test_zero_effect_inside_relevant_allowed(self):
        rec = TruthRecord(np.array([0.0, 0.0]), np.array([True, False]), 0.0, {})
        assert rec.k1 == 1


class TestStudy1:
    def test_shapes_and_truth(self):
        data, truth = generate_study1(Study1Params(n=40, K=8, k1=3,
                                                   mu_true=-2.0, seed=5))
        assert data.outcomes.shape == (40, 8)
        assert data.outcome_names == tuple(f"y{k}" for k in range(1, 9))
        assert truth.relevant.tolist() == [True] * 3 + [False] * 5
        assert (truth.beta[3:] == 0).all() and (truth.beta[:3] != 0).all()
        assert truth.implied_mu == -2.0
        assert truth.params["k1"] == 3

    def test_determinism(self):
        p = Study1Params(n=20, K=5, k1=2, mu_true=-3.0, seed=9)
        d1, t1 = generate_study1(p)
        d2, t2 = generate_study1(p)
        assert np.array_equal(d1.outcomes, d2.outcomes)
        assert np.array_equal(t1.beta, t2.beta)
        d3, _ = generate_study1(Study1Params(n=20, K=5, k1=2, mu_true=-3.0,
                                             seed=10))
        assert not np.array_equal(d1.outcomes, d3.outcomes)

    def test_slope_law(self):
        """Relevant slopes are N(mu, (0.1 mu)^2) across replications."""
        draws = np.concatenate([
            generate_study1(Study1Params(K=10, k1=10, mu_true=-3.0,
                                         seed=s))[1].beta
            for s in range(300)])
        assert draws.mean() == pytest.approx(-3.0, abs=0.02)
        assert draws.std() == pytest.approx(0.3, rel=0.05)

    def test_outcome_regression_recovers_truth(self):
        """Pooled least squares on a big replication sits near the true
        slope for a relevant outcome and near zero for an irrelevant one."""
        data, truth = generate_study1(Study1Params(n=20000, K=4, k1=2,
                                                   mu_true=-3.0, seed=3))
        X = np.column_stack([np.ones(data.n), data.exposure, data.confounder])
        for k, target in ((0, truth.beta[0]), (3, 0.0)):
            coef, *_ = np.linalg.lstsq(X, data.outcomes[:, k], rcond=None)
            assert coef[1] == pytest.approx(target, abs=0.05)

    def test_noise_variance_law(self):
        """Residual variance beyond the random intercept matches the
        truncated N(1.5, 0.3) variance draw in aggregate."""
        total = []
        for s in range(200):
            data, truth = generate_study1(Study1Params(n=50, K=6, k1=0 + 1,
                                                       mu_true=-1.0, seed=s))
            resid = data.outcomes[:, -1]  # irrelevant outcome
            X = np.column_stack([np.ones(50), data.exposure, data.confounder])
            coef, *_ = np.linalg.lstsq(X, resid, rcond=None)
            total.append(np.var(resid - X @ coef, ddof=3))
        # noise variance ~ N(1.5, 0.3) (>0.05) plus random-intercept variance 1
        assert np.mean(total) == pytest.approx(2.5, abs=0.1)


class TestStudy2:
    def test_truth_is_loading_times_omega(self):
        data, truth = generate_study2(Study2Params(n=30, K=6, k1=2,
                                                   omega=-2.5, seed=7))
        assert (truth.beta[2:] == 0).all()
        assert truth.relevant.tolist() == [True, True] + [False] * 4
        loadings = truth.beta[:2] / -2.5
        assert truth.implied_mu == pytest.approx(-2.5 * loadings.mean())
        assert data.outcomes.shape == (30, 6)

    def test_implied_mu_centers_on_omega(self):
        implied = [generate_study2(Study2Params(k1=10, omega=-3.0,
                                                seed=s))[1].implied_mu
                   for s in range(300)]
        # per-rep sd 0.3, so the 300-rep mean has se ~ 0.017; allow 3 se
        assert np.mean(implied) == pytest.approx(-3.0, abs=0.052)
        # loading sd sqrt(0.1) over a mean of 10 loadings
        assert np.std(implied) == pytest.approx(3 * np.sqrt(0.1 / 10), rel=0.15)

    def test_exposure_effect_present_only_in_relevant_block(self):
        data, truth = generate_study2(Study2Params(n=20000, K=4, k1=2,
                                                   omega=-3.0, seed=11))
        X = np.column_stack([np.ones(data.n), data.exposure, data.confounder])
        for k in range(4):
            coef, *_ = np.linalg.lstsq(X, data.outcomes[:, k], rcond=None)
            assert coef[1] == pytest.approx(truth.beta[k], abs=0.06)

    def test_determinism(self):
        p = Study2Params(n=15, K=4, k1=2, omega=-1.0, seed=3)
        assert np.array_equal(generate_study2(p)[0].outcomes,
                              generate_study2(p)[0].outcomes)


class TestReplicationGrid:
    def grid(self, **kwargs):
        base = dict(study=1, regimes=("ssvs_mu", "hierarchical"), reps=2,
                    sampler_config=quick_config(), effects=(-3.0,),
                    k1_values=(2,), n=25, K=4, master_seed=5)
        base.update(kwargs)
        return run_replication_grid(**base)

    def test_layout_and_metrics(self):
        grid = self.grid()
        assert len(grid.cells) == 2
        cell = grid.cell(-3.0, 2, "ssvs_mu")
        assert cell is not None and len(cell.reps) == 2
        for rep in cell.reps:
            assert rep.ok and rep.metrics is not None
            assert rep.metrics.n_identified == (rep.metrics.n_correct
                                                + rep.metrics.n_false_positive)
            assert np.isfinite(rep.max_rhat)
        assert grid.cell(-3.0, 2, "laplace") is None

    def test_same_dataset_across_regimes(self):
        """Regimes of one replication share the dataset: the implied truth
        agrees across regimes and differs across replications."""
        grid = self.grid(study=2, regimes=("ssvs_mu", "subset"))
        a = grid.cell(-3.0, 2, "ssvs_mu")
        b = grid.cell(-3.0, 2, "subset")
        for rep in range(2):
            assert a.reps[rep].implied_mu == b.reps[rep].implied_mu
        assert a.reps[0].implied_mu != a.reps[1].implied_mu

    def test_grid_determinism(self):
        g1, g2 = self.grid(), self.grid()
        r1 = g1.cell(-3.0, 2, "ssvs_mu").reps[0]
        r2 = g2.cell(-3.0, 2, "ssvs_mu").reps[0]
        assert r1.metrics.mse == r2.metrics.mse
        assert r1.metrics.mu_hat == r2.metrics.mu_hat
        assert r1.max_rhat == r2.max_rhat

    def test_failure_is_isolated(self, monkeypatch):
        calls = {"count": 0}
        real = simulate_mod.run_chain

        def flaky(design, prior, config):
            calls["count"] += 1
            if calls["count"] == 2:
                raise SliceStepError("bracket expansion hit the cap")
            return real(design, prior, config)

        monkeypatch.setattr(simulate_mod, "run_chain", flaky)
        grid = self.grid()
        results = [r for cell in grid.cells for r in cell.reps]
        failed = [r for r in results if not r.ok]
        assert len(failed) == 1
        assert "SliceStepError" in failed[0].error
        assert failed[0].metrics is None
        assert sum(r.ok for r in results) == 3

    def test_bad_arguments(self):
        with pytest.raises(ValidationError):
            self.grid(study=3)
        with pytest.raises(ValidationError):
            self.grid(reps=0)
        with pytest.raises(ValidationError):
            self.grid(regimes=("ssvs_mu", "ridge"))

    def test_subset_uses_true_mask(self):
        grid = self.grid(regimes=("subset",))
        cell = grid.cell(-3.0, 2, "subset")
        for rep in cell.reps:
            assert rep.ok
            # masked outcomes can never be identified, so every find is
            # inside the true relevant block of size 2
            assert rep.metrics.n_false_positive == 0
            assert rep.metrics.n_identified <= 2
