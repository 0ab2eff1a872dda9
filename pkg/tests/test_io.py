"""File formats: dataset CSV, chain files, grid results, fit summaries.

The load-bearing property is losslessness: every format must restore
exactly what was written, floats included, and must reject truncated or
incompatible files with a useful message.
"""

import json
import math
import os

import numpy as np
import pytest

from outsel import (SamplerConfig, SchemaError, FitSummary, read_chain,
                    read_dataset, read_fit_summary, read_grid_results,
                    run_chain, simulation_priors, write_chain, write_dataset,
                    write_fit_summary, write_grid_results)
from outsel.io import (atomic_write_text, prior_from_dict, prior_to_dict,
                       sampler_config_from_dict, sampler_config_to_dict,
                       write_manifest)
from outsel.metrics import ScalarDiag
from outsel.sampler import ChainDraws, ChainOutput
from outsel.simulate import run_replication_grid

from conftest import make_dataset, make_design, quick_config


class TestDatasetCsv:
    def test_round_trip(self, tmp_path):
        data = make_dataset(n=9, K=3, seed=1, missing=[(0, 1), (5, 2)])
        path = tmp_path / "d.csv"
        write_dataset(data, str(path))
        back = read_dataset(str(path))
        assert back.outcome_names == data.outcome_names
        assert back.ids == data.ids
        assert np.array_equal(back.exposure, data.exposure)
        assert np.array_equal(back.confounder, data.confounder)
        assert np.array_equal(np.isnan(back.outcomes), np.isnan(data.outcomes))
        assert np.array_equal(back.outcomes[back.observed],
                              data.outcomes[data.observed])

    def test_outcome_column_selection(self, tmp_path):
        path = tmp_path / "d.csv"
        write_dataset(make_dataset(n=5, K=3, seed=2), str(path))
        back = read_dataset(str(path), outcome_columns=["y3", "y1"])
        assert back.outcome_names == ("y3", "y1")
        with pytest.raises(SchemaError, match="y9"):
            read_dataset(str(path), outcome_columns=["y9"])

    def write_text(self, tmp_path, text):
        path = tmp_path / "x.csv"
        path.write_text(text)
        return str(path)

    def test_missing_required_column(self, tmp_path):
        path = self.write_text(tmp_path, "id,exposure,y1\n1,0.5,2.0\n")
        with pytest.raises(SchemaError, match="'z'"):
            read_dataset(path)

    def test_non_numeric_cell_names_coordinates(self, tmp_path):
        path = self.write_text(
            tmp_path, "id,exposure,z,y1\n1,0.5,0.1,2.0\n2,0.5,0.1,oops\n")
        with pytest.raises(SchemaError, match=r"row 2.*'y1'"):
            read_dataset(path)

    def test_empty_covariate_cell_rejected(self, tmp_path):
        path = self.write_text(tmp_path, "id,exposure,z,y1\n1,,0.1,2.0\n")
        with pytest.raises(SchemaError, match=r"row 1.*'exposure'"):
            read_dataset(path)

    def test_empty_outcome_cell_is_missing(self, tmp_path):
        path = self.write_text(
            tmp_path, "id,exposure,z,y1,y2\n1,0.5,0.1,,2.0\n2,1.5,0.2,3.0,\n")
        data = read_dataset(path)
        assert np.isnan(data.outcomes[0, 0]) and np.isnan(data.outcomes[1, 1])
        assert data.outcomes[1, 0] == 3.0

    def test_duplicate_id(self, tmp_path):
        path = self.write_text(
            tmp_path, "id,exposure,z,y1\na,0.5,0.1,2.0\na,0.6,0.2,3.0\n")
        with pytest.raises(SchemaError, match="duplicate id 'a'"):
            read_dataset(path)

    def test_ragged_row(self, tmp_path):
        path = self.write_text(tmp_path, "id,exposure,z,y1\n1,0.5,0.1\n")
        with pytest.raises(SchemaError, match="row 1"):
            read_dataset(path)

    def test_empty_file_and_header_only(self, tmp_path):
        with pytest.raises(SchemaError, match="empty"):
            read_dataset(self.write_text(tmp_path, ""))
        with pytest.raises(SchemaError, match="no data rows"):
            read_dataset(self.write_text(tmp_path, "id,exposure,z,y1\n"))

    def test_no_outcome_columns(self, tmp_path):
        with pytest.raises(SchemaError, match="no outcome columns"):
            read_dataset(self.write_text(tmp_path, "id,exposure,z\n1,0.5,0.1\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(Exception, match="cannot read"):
            read_dataset(str(tmp_path / "nope.csv"))


def same_float(x, y):
    """Equality where NaN matches NaN (bit-exact round trips)."""
    try:
        return bool(x == y) or (math.isnan(x) and math.isnan(y))
    except TypeError:
        return x == y


def tiny_fit(seed=3, **prior_kwargs):
    design = make_design(n=8, K=2, seed=4, missing=[(0, 1)])
    prior = simulation_priors(2, **prior_kwargs)
    config = quick_config(n_chains=2, n_burnin=20, n_samples=20,
                          thinning=4, seed=seed)
    return run_chain(design, prior, config)


class TestChainFiles:
    def test_round_trip_is_bit_exact(self, tmp_path):
        out = tiny_fit()
        path = str(tmp_path / "chains.csv")
        write_chain(out, path)
        back = read_chain(path)
        assert back.n == out.n and back.K == out.K
        assert back.outcome_names == out.outcome_names
        assert back.config == out.config
        assert back.prior.regime == out.prior.regime
        assert np.array_equal(back.prior.inclusion_prior,
                              out.prior.inclusion_prior)
        for a, b in zip(back.chains, out.chains):
            assert a.chain_index == b.chain_index
            for field in ("beta", "indicators", "mu", "tau", "sigma",
                          "sigma_r", "nu", "gamma", "alpha"):
                assert np.array_equal(getattr(a, field), getattr(b, field)), field
        # wall time is intentionally not stored
        assert math.isnan(back.wall_time_s)
        # writing the reread output reproduces the file byte for byte
        second = str(tmp_path / "again.csv")
        write_chain(back, second)
        assert open(path).read() == open(second).read()

    def test_same_seed_same_file(self, tmp_path):
        p1, p2 = str(tmp_path / "a.csv"), str(tmp_path / "b.csv")
        write_chain(tiny_fit(seed=5), p1)
        write_chain(tiny_fit(seed=5), p2)
        assert open(p1).read() == open(p2).read()
        p3 = str(tmp_path / "c.csv")
        write_chain(tiny_fit(seed=6), p3)
        assert open(p1).read() != open(p3).read()

    def test_subset_prior_round_trips(self, tmp_path):
        out = tiny_fit(regime="subset", subset_include=[True, False])
        path = str(tmp_path / "chains.csv")
        write_chain(out, path)
        back = read_chain(path)
        assert back.prior.subset_include.tolist() == [True, False]

    def test_zero_draw_file_is_valid(self, tmp_path):
        out = tiny_fit()
        empty = ChainOutput(
            chains=tuple(ChainDraws(
                chain_index=c.chain_index, beta=c.beta[:0],
                indicators=c.indicators[:0], mu=c.mu[:0], tau=c.tau[:0],
                sigma=c.sigma[:0], sigma_r=c.sigma_r[:0], nu=c.nu[:0],
                gamma=c.gamma[:0], alpha=c.alpha[:0]) for c in out.chains),
            n=out.n, K=out.K, outcome_names=out.outcome_names,
            prior=out.prior, config=out.config)
        path = str(tmp_path / "empty.csv")
        write_chain(empty, path)
        back = read_chain(path)
        assert back.draws_per_chain == 0 and back.n_chains == 2

    def test_version_mismatch(self, tmp_path):
        path = str(tmp_path / "chains.csv")
        write_chain(tiny_fit(), path)
        lines = open(path).read().splitlines()
        lines[0] = "# outsel-chain-file v9"
        bad = str(tmp_path / "bad.csv")
        open(bad, "w").write("\n".join(lines) + "\n")
        with pytest.raises(SchemaError, match="v1"):
            read_chain(bad)

    def test_truncated_file(self, tmp_path):
        path = str(tmp_path / "chains.csv")
        write_chain(tiny_fit(), path)
        lines = open(path).read().splitlines()
        open(path, "w").write("\n".join(lines[:-3]) + "\n")
        with pytest.raises(SchemaError, match="truncated"):
            read_chain(path)

    def test_wrong_columns(self, tmp_path):
        path = str(tmp_path / "chains.csv")
        write_chain(tiny_fit(), path)
        text = open(path).read().replace("beta[2]", "beta[7]")
        open(path, "w").write(text)
        with pytest.raises(SchemaError, match="columns"):
            read_chain(path)

    def test_not_a_chain_file(self, tmp_path):
        path = str(tmp_path / "other.csv")
        open(path, "w").write("id,exposure\n1,2\n")
        with pytest.raises(SchemaError, match="not a chain file"):
            read_chain(path)


class TestGridResults:
    def make_grid(self):
        return run_replication_grid(
            1, ("ssvs_mu", "laplace"), 2, quick_config(),
            effects=(-3.0,), k1_values=(2,), n=20, K=4, master_seed=9)

    def test_round_trip(self, tmp_path):
        grid = self.make_grid()
        path = str(tmp_path / "results.csv")
        write_grid_results(grid, path)
        back = read_grid_results(path)
        assert (back.study, back.n, back.K) == (grid.study, grid.n, grid.K)
        assert back.effects == grid.effects
        assert back.k1_values == grid.k1_values
        assert back.regimes == grid.regimes
        assert back.master_seed == grid.master_seed
        for cell in grid.cells:
            twin = back.cell(cell.effect, cell.k1, cell.regime)
            assert twin is not None
            for a, b in zip(twin.reps, cell.reps):
                assert a.rep == b.rep and a.error == b.error
                assert a.implied_mu == b.implied_mu
                assert same_float(a.max_rhat, b.max_rhat)
                if b.metrics is None:
                    assert a.metrics is None
                else:
                    for field in ("n_identified", "n_correct",
                                  "n_false_positive", "mse", "mu_hat"):
                        assert same_float(getattr(a.metrics, field),
                                          getattr(b.metrics, field)), field

    def test_error_rows_round_trip(self, tmp_path):
        grid = self.make_grid()
        grid.cells[0].reps[1].metrics = None
        grid.cells[0].reps[1].error = "SliceStepError: cap, at \"sigma[1]\""
        grid.cells[0].reps[1].max_rhat = float("nan")
        path = str(tmp_path / "results.csv")
        write_grid_results(grid, path)
        back = read_grid_results(path)
        rep = back.cells[0].reps[1]
        assert rep.error == 'SliceStepError: cap, at "sigma[1]"'
        assert rep.metrics is None and not rep.ok

    def test_rejects_foreign_file(self, tmp_path):
        path = str(tmp_path / "x.csv")
        open(path, "w").write("hello\n")
        with pytest.raises(SchemaError, match="not a grid results file"):
            read_grid_results(path)


class TestFitSummaryFile:
    def test_round_trip_with_nans(self, tmp_path):
        summary = FitSummary(
            label="demo", regime="laplace", outcome_names=("a", "b"),
            inclusion_probs=np.array([np.nan, np.nan]),
            relevant=np.array([True, False]),
            beta_hat=np.array([-2.0, 0.1]),
            masked=np.array([False, False]),
            mu_mean=float("nan"), mu_sd=float("nan"), tau_mean=float("nan"),
            diagnostics={"beta[1]": ScalarDiag(1.01, 321.5)})
        path = str(tmp_path / "s.json")
        write_fit_summary(summary, path)
        back = read_fit_summary(path)
        assert back.label == "demo" and back.regime == "laplace"
        assert np.isnan(back.inclusion_probs).all()
        assert back.relevant.tolist() == [True, False]
        assert np.array_equal(back.beta_hat, summary.beta_hat)
        assert math.isnan(back.mu_mean)
        assert back.diagnostics["beta[1]"].ess == 321.5
        # the file itself is strict JSON (no bare NaN tokens)
        json.load(open(path))

    def test_version_check(self, tmp_path):
        path = str(tmp_path / "s.json")
        open(path, "w").write(json.dumps({"version": "other v2"}))
        with pytest.raises(SchemaError, match="version"):
            read_fit_summary(path)
        open(path, "w").write("{broken")
        with pytest.raises(SchemaError, match="JSON"):
            read_fit_summary(path)


class TestConfigEcho:
    def test_prior_round_trip(self):
        prior = simulation_priors(3, regime="subset", inclusion=[0.2, 0.5, 0.9],
                                  subset_include=[True, False, True],
                                  spike_mode="fixed", spike_variance=1 / 3,
                                  tau_logprior=(0.1, 2.0))
        back = prior_from_dict(prior_to_dict(prior))
        assert prior_to_dict(back) == prior_to_dict(prior)

    def test_sampler_config_round_trip(self):
        config = SamplerConfig(n_chains=3, n_burnin=11, n_samples=22,
                               thinning=2, seed=77, slice_width=0.7,
                               max_slice_steps=31)
        assert sampler_config_from_dict(sampler_config_to_dict(config)) == config

    def test_bad_echo(self):
        with pytest.raises(SchemaError):
            prior_from_dict({"regime": "ssvs_mu"})
        with pytest.raises(SchemaError):
            sampler_config_from_dict({"n_chains": 2, "bogus": 1})


class TestAtomicWrites:
    def test_no_temp_file_left_behind(self, tmp_path):
        path = str(tmp_path / "out.txt")
        atomic_write_text(path, "payload")
        assert open(path).read() == "payload"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_manifest_is_sorted_json(self, tmp_path):
        path = str(tmp_path / "manifest.json")
        write_manifest(path, {"b": 1, "a": {"z": 2, "y": 3}})
        text = open(path).read()
        assert text.index('"a"') < text.index('"b"')
        assert json.load(open(path)) == {"b": 1, "a": {"z": 2, "y": 3}}
