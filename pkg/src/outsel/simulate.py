"""Synthetic data generators and the replication grid.

Study 1 draws data straight from the fitted model family (correct
specification): per-outcome intercepts, confounder slopes, noise scales,
a shared random intercept per individual, and slopes clustered tightly
around a common effect for the relevant outcomes.

Study 2 generates misspecified data from a two-factor structure: the first
factor carries the exposure effect into the first K1 outcomes through
positive loadings, the second factor adds correlation across all outcomes.
The implied per-outcome effect is loading times omega, so the implied
common effect is the mean loading of the relevant block times omega.

Every generator consumes one seeded generator in a frozen draw order, so
a (params, seed) pair pins the dataset exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, stack_long
from .errors import OutselError, ValidationError
from .metrics import (CellResult, GridResults, RepResult, convergence,
                      rep_metrics)
from .model import simulation_priors
from .sampler import SamplerConfig, run_chain

__all__ = [
    "Study1Params",
    "Study2Params",
    "TruthRecord",
    "gen_exposure",
    "generate_study1",
    "generate_study2",
    "run_replication_grid",
    "DEFAULT_EFFECTS",
    "DEFAULT_K1_VALUES",
]

DEFAULT_EFFECTS = {1: (-0.1, -3.0), 2: (-0.5, -3.0)}
DEFAULT_K1_VALUES = (5, 10, 15)
GRID_REGIMES = ("ssvs_mu", "ssvs_zero", "hierarchical", "subset", "laplace")


@dataclass(frozen=True)
class Study1Params:
    """Settings for the correctly specified generator."""

    n: int = 100
    K: int = 20
    k1: int = 10
    mu_true: float = -3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 1 <= self.k1 <= self.K:
            raise ValidationError(f"need 1 <= K1 <= K, got K1={self.k1}, K={self.K}")


@dataclass(frozen=True)
class Study2Params:
    """Settings for the two-factor (misspecified) generator."""

    n: int = 100
    K: int = 20
    k1: int = 10
    omega: float = -3.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValidationError("n must be >= 1")
        if not 1 <= self.k1 <= self.K:
            raise ValidationError(f"need 1 <= K1 <= K, got K1={self.k1}, K={self.K}")


@dataclass(frozen=True)
class TruthRecord:
    """Generating truth for one synthetic dataset.

    ``beta`` holds the true (or implied) per-outcome effect, ``relevant``
    the outcomes constructed to carry the exposure, and ``implied_mu`` the
    target for estimates of the common effect: the nominal value in study
    1, loading-weighted in study 2.  Outcomes outside the relevant set
    always have exactly zero effect; a relevant outcome may still have a
    zero effect in the degenerate case of a zero common effect.
    """

    beta: np.ndarray
    relevant: np.ndarray
    implied_mu: float
    params: dict

    def __post_init__(self):
        beta = np.array(self.beta, dtype=float).reshape(-1)
        relevant = np.array(self.relevant, dtype=bool).reshape(-1)
        if beta.shape != relevant.shape:
            raise ValidationError("beta and relevant must have equal length")
        if beta[~relevant].any():
            raise ValidationError("outcomes outside the relevant set must have beta == 0")
        beta.setflags(write=False)
        relevant.setflags(write=False)
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "relevant", relevant)

    @property
    def k1(self) -> int:
        return int(self.relevant.sum())


def gen_exposure(n: int, rng) -> tuple[np.ndarray, np.ndarray]:
    """Draw the confounder z ~ N(0,1) and the exposure from its mixture.

    Given z < 0 the exposure is N(0, 0.5^2); otherwise N(1, 1).  Returns
    (exposure, confounder).
    """
    if n < 1:
        raise ValidationError("n must be >= 1")
    z = rng.standard_normal(n)
    shock = rng.standard_normal(n)
    x = np.where(z < 0, 0.5 * shock, 1.0 + shock)
    return x, z


def _outcome_names(K: int) -> list[str]:
    return [f"y{k + 1}" for k in range(K)]


def generate_study1(p: Study1Params) -> tuple[Dataset, TruthRecord]:
    """Correctly specified data: the fitted model family is the generator.

    Intercepts ~ N(0,1); noise variances ~ N(1.5, 0.3) redrawn until above
    0.05; relevant slopes ~ N(mu_true, (0.1 mu_true)^2); confounder slopes
    ~ N(0,1); random intercepts ~ N(0,1).  Draw order is fixed: intercepts,
    variances, slopes, confounder slopes, exposure pair, random intercepts,
    noise.
    """
    rng = np.random.default_rng(p.seed)
    nu = rng.normal(0.0, 1.0, p.K)
    var = rng.normal(1.5, math.sqrt(0.3), p.K)
    bad = var <= 0.05
    while bad.any():
        var[bad] = rng.normal(1.5, math.sqrt(0.3), int(bad.sum()))
        bad = var <= 0.05
    beta = np.zeros(p.K)
    beta[:p.k1] = rng.normal(p.mu_true, 0.1 * abs(p.mu_true), p.k1)
    gamma = rng.normal(0.0, 1.0, p.K)
    x, z = gen_exposure(p.n, rng)
    alpha = rng.standard_normal(p.n)
    noise = rng.standard_normal((p.n, p.K)) * np.sqrt(var)
    y = nu + np.outer(x, beta) + alpha[:, None] + np.outer(z, gamma) + noise
    data = Dataset(y, x, z, _outcome_names(p.K))
    relevant = np.arange(p.K) < p.k1
    truth = TruthRecord(beta, relevant, p.mu_true,
                        {"study": 1, "n": p.n, "K": p.K, "k1": p.k1,
                         "mu_true": p.mu_true, "seed": p.seed})
    return data, truth


def generate_study2(p: Study2Params) -> tuple[Dataset, TruthRecord]:
    """Two-factor data: the exposure acts only through the first factor.

    Loadings on the exposure factor ~ N(1, 0.1) for the first K1 outcomes
    (zero after), loadings on the nuisance factor ~ N(1, 0.2) everywhere;
    intercepts ~ N(0, 100); unit-variance diagonal noise.  The implied
    slope of outcome k is loading[k] * omega.  Draw order is fixed:
    exposure loadings, nuisance loadings, intercepts, exposure pair, first
    factor shock, second factor, noise.
    """
    rng = np.random.default_rng(p.seed)
    load_x = np.zeros(p.K)
    load_x[:p.k1] = rng.normal(1.0, math.sqrt(0.1), p.k1)
    load_n = rng.normal(1.0, math.sqrt(0.2), p.K)
    nu = rng.normal(0.0, 10.0, p.K)
    x, z = gen_exposure(p.n, rng)
    factor_x = p.omega * x + 0.1 * z + rng.standard_normal(p.n)
    factor_n = rng.standard_normal(p.n)
    noise = rng.standard_normal((p.n, p.K))
    y = nu + np.outer(factor_x, load_x) + np.outer(factor_n, load_n) + noise
    data = Dataset(y, x, z, _outcome_names(p.K))
    relevant = np.arange(p.K) < p.k1
    truth = TruthRecord(load_x * p.omega, relevant,
                        float(p.omega * load_x[:p.k1].mean()),
                        {"study": 2, "n": p.n, "K": p.K, "k1": p.k1,
                         "omega": p.omega, "seed": p.seed})
    return data, truth


def _subseed(master_seed: int, *key: int) -> int:
    """Deterministic child seed for a grid coordinate."""
    ss = np.random.SeedSequence(master_seed, spawn_key=tuple(int(v) for v in key))
    return int(ss.generate_state(1, np.uint64)[0])


def _rhat_gate_monitored(prior) -> list[str]:
    names = []
    if prior.has_mu:
        names.append("mu")
    if prior.has_tau:
        names.append("tau")
    names.extend(f"beta[{k + 1}]" for k in range(prior.K))
    return names


def run_replication_grid(study: int, regimes, reps: int,
                         sampler_config: SamplerConfig, *,
                         effects=None, k1_values=None, n: int = 100,
                         K: int = 20, master_seed: int = 0,
                         inclusion: float = 0.5) -> GridResults:
    """Fit every (effect, K1, regime) cell on ``reps`` independent datasets.

    All regimes of a cell see the same replication dataset; the subset
    regime is given the true relevant set as its include mask.  Dataset
    and fit seeds derive deterministically from the master seed and the
    cell coordinates, so equal arguments reproduce the grid exactly.  A
    sampler failure is recorded on its replication (with the error text)
    without aborting the rest of the grid.
    """
    if study not in (1, 2):
        raise ValidationError("study must be 1 or 2")
    if reps < 1:
        raise ValidationError("reps must be >= 1")
    regimes = tuple(regimes)
    for r in regimes:
        if r not in GRID_REGIMES:
            raise ValidationError(f"unknown regime {r!r}; expected one of {GRID_REGIMES}")
    effects = tuple(effects) if effects is not None else DEFAULT_EFFECTS[study]
    k1_values = tuple(k1_values) if k1_values is not None else DEFAULT_K1_VALUES
    grid = GridResults(study=study, n=n, K=K, n_reps=reps, master_seed=master_seed,
                       effects=effects, k1_values=k1_values, regimes=regimes)
    cells = {(e, k1, r): CellResult(study, e, k1, r)
             for e in effects for k1 in k1_values for r in regimes}
    grid.cells = list(cells.values())
    for ei, effect in enumerate(effects):
        for ki, k1 in enumerate(k1_values):
            for rep in range(reps):
                data_seed = _subseed(master_seed, study, ei, ki, rep)
                if study == 1:
                    data, truth = generate_study1(
                        Study1Params(n=n, K=K, k1=k1, mu_true=effect, seed=data_seed))
                else:
                    data, truth = generate_study2(
                        Study2Params(n=n, K=K, k1=k1, omega=effect, seed=data_seed))
                design = stack_long(data)
                for regime in regimes:
                    ridx = GRID_REGIMES.index(regime)
                    fit_seed = _subseed(master_seed, study, ei, ki, rep, 100 + ridx)
                    cfg = replace(sampler_config, seed=fit_seed)
                    result = RepResult(rep=rep, regime=regime,
                                       implied_mu=truth.implied_mu)
                    try:
                        prior = simulation_priors(
                            K, regime=regime, inclusion=inclusion,
                            subset_include=truth.relevant if regime == "subset" else None)
                        out = run_chain(design, prior, cfg)
                        result.metrics = rep_metrics(out, truth)
                        if cfg.n_chains >= 2:
                            diags = convergence(out, _rhat_gate_monitored(prior))
                            result.max_rhat = max(d.rhat for d in diags.values())
                    except OutselError as err:
                        result.error = f"{type(err).__name__}: {err}"
                    cells[(effect, k1, regime)].reps.append(result)
    return grid
