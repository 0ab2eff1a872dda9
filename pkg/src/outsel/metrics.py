"""Posterior summaries, selection metrics, diagnostics, and table rendering.

Classification follows the strict rule: an outcome is relevant when the
posterior mean of its indicator exceeds 0.5 (ties are irrelevant).  Point
estimates for selection regimes are conditional means: the average of the
slope draws over the sweeps where the outcome was included, zeroed when the
outcome is classified irrelevant.  The Laplace regime has no indicators, so
its point estimate is the plain posterior mean and relevance means zero
falls outside the central 95% interval.

Convergence checks use split-chain potential scale reduction (each chain
halved, so within-chain drift shows up between halves) and effective sample
size from pairwise-summed autocorrelations truncated at the first
nonpositive, monotone-decreasing pair.  Constant series (structurally
pinned parameters such as a masked slope) report R-hat 1 and full ESS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DimensionError, MissingCellError, TooFewDrawsError,
                     ValidationError)
from .sampler import ChainOutput

__all__ = [
    "ScalarDiag",
    "MuSummary",
    "RepMetrics",
    "RepResult",
    "CellResult",
    "GridResults",
    "FitSummary",
    "RenderedTable",
    "inclusion_probabilities",
    "classify_outcomes",
    "laplace_relevance",
    "point_estimates",
    "mse",
    "detection_counts",
    "rep_metrics",
    "mu_summary",
    "split_rhat",
    "effective_sample_size",
    "convergence",
    "default_monitored",
    "fit_summary",
    "render_tables",
]

RHAT_FLAG_LEVEL = 1.05

REGIME_LABELS = {
    "ssvs_mu": "SSVS mu-unknown",
    "ssvs_zero": "SSVS mu=0",
    "hierarchical": "No selection",
    "subset": "Subset",
    "laplace": "Laplace",
}


# ----- selection and point estimates ---------------------------------------


def _pooled_indicators(out: ChainOutput) -> np.ndarray:
    """(total draws, K) indicator draws across chains; errors under laplace."""
    if out.prior.regime == "laplace":
        raise ValidationError("the laplace regime has no selection indicators; "
                              "use laplace_relevance for interval-based relevance")
    return np.concatenate([c.indicators for c in out.chains], axis=0)


def _pooled_beta(out: ChainOutput) -> np.ndarray:
    return np.concatenate([c.beta for c in out.chains], axis=0)


def inclusion_probabilities(out: ChainOutput) -> np.ndarray:
    """Posterior mean of each indicator, length K."""
    return _pooled_indicators(out).mean(axis=0)


def classify_outcomes(out: ChainOutput) -> np.ndarray:
    """Relevant outcomes: posterior inclusion probability strictly above 0.5."""
    return inclusion_probabilities(out) > 0.5


def laplace_relevance(out: ChainOutput, level: float = 0.95) -> np.ndarray:
    """Relevance without indicators: zero outside the central credible interval."""
    if not 0 < level < 1:
        raise ValidationError("level must be in (0, 1)")
    beta = _pooled_beta(out)
    lo, hi = np.quantile(beta, [(1 - level) / 2, (1 + level) / 2], axis=0)
    return (lo > 0) | (hi < 0)


def point_estimates(out: ChainOutput) -> np.ndarray:
    """Per-outcome slope estimates under the fit's own reporting rule.

    Selection regimes: mean of the slope draws over sweeps with the
    indicator on, zeroed where the outcome is classified irrelevant.
    Laplace: plain posterior mean.
    """
    beta = _pooled_beta(out)
    if out.prior.regime == "laplace":
        return beta.mean(axis=0)
    ind = _pooled_indicators(out)
    relevant = ind.mean(axis=0) > 0.5
    n_in = ind.sum(axis=0)
    if (relevant & (n_in == 0)).any():
        raise ValidationError("classified-relevant outcome has no included draws")
    cond_mean = np.where(n_in > 0, (beta * ind).sum(axis=0) / np.maximum(n_in, 1), 0.0)
    return np.where(relevant, cond_mean, 0.0)


def _truth_beta(truth) -> np.ndarray:
    return np.asarray(getattr(truth, "beta", truth), dtype=float).reshape(-1)


def _truth_relevant(truth) -> np.ndarray:
    return np.asarray(getattr(truth, "relevant", truth), dtype=bool).reshape(-1)


def mse(estimates: np.ndarray, truth) -> float:
    """Mean squared error of the slope estimates against the true slopes."""
    estimates = np.asarray(estimates, dtype=float).reshape(-1)
    true_beta = _truth_beta(truth)
    if estimates.shape != true_beta.shape:
        raise DimensionError(f"estimates have length {estimates.shape[0]}, "
                             f"truth has {true_beta.shape[0]}")
    return float(np.mean(np.square(estimates - true_beta)))


def detection_counts(classified: np.ndarray, truth) -> tuple[int, int, int]:
    """(n_identified, n_correct, n_false_positive) against the true relevant set."""
    classified = np.asarray(classified, dtype=bool).reshape(-1)
    relevant = _truth_relevant(truth)
    if classified.shape != relevant.shape:
        raise DimensionError(f"classified has length {classified.shape[0]}, "
                             f"truth has {relevant.shape[0]}")
    n_correct = int((classified & relevant).sum())
    n_fp = int((classified & ~relevant).sum())
    return n_correct + n_fp, n_correct, n_fp


@dataclass(frozen=True)
class RepMetrics:
    """Per-replication evaluation against a known truth."""

    n_identified: int
    n_correct: int
    n_false_positive: int
    mse: float
    mu_hat: float

    def __post_init__(self):
        if self.n_correct < 0 or self.n_false_positive < 0:
            raise ValidationError("detection counts must be non-negative")
        if self.n_identified != self.n_correct + self.n_false_positive:
            raise ValidationError("n_identified must equal n_correct + n_false_positive")
        if self.mse < 0:
            raise ValidationError("mse must be non-negative")


def rep_metrics(out: ChainOutput, truth) -> RepMetrics:
    """Evaluate one fitted replication against its generating truth."""
    if out.prior.regime == "laplace":
        classified = laplace_relevance(out)
    else:
        classified = classify_outcomes(out)
    est = point_estimates(out)
    n_id, n_corr, n_fp = detection_counts(classified, truth)
    mu_hat = float("nan") if out.prior.regime == "laplace" else float(out.pooled("mu").mean())
    return RepMetrics(n_id, n_corr, n_fp, mse(est, truth), mu_hat)


@dataclass(frozen=True)
class MuSummary:
    """Across-replication summary of the estimated common effect."""

    mean: float
    sd: float
    sem: float
    n_reps: int
    spread_defined: bool


def mu_summary(per_rep_mu) -> MuSummary:
    values = np.asarray(list(per_rep_mu), dtype=float)
    if values.size == 0:
        raise ValidationError("mu_summary needs at least one replication")
    if values.size == 1:
        return MuSummary(float(values[0]), 0.0, 0.0, 1, spread_defined=False)
    sd = float(values.std(ddof=1))
    return MuSummary(float(values.mean()), sd, sd / math.sqrt(values.size),
                     int(values.size), spread_defined=True)


# ----- convergence diagnostics ----------------------------------------------


def _split_chains(series: np.ndarray) -> np.ndarray:
    """Halve each chain; (m, S) becomes (2m, S//2).  Odd tails are dropped."""
    m, s = series.shape
    half = s // 2
    if half < 4:
        raise TooFewDrawsError(f"need at least 4 draws per split half, have {half}")
    return np.concatenate([series[:, :half], series[:, half:2 * half]], axis=0)


def split_rhat(series: np.ndarray) -> float:
    """Split-chain potential scale reduction for one scalar.

    ``series`` is (chains, draws) with at least two chains.  A series that
    is constant everywhere is reported as exactly 1 by convention (pinned
    parameters mix trivially).
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2 or series.shape[0] < 2:
        raise ValidationError("split_rhat needs a (chains, draws) matrix with >= 2 chains")
    halves = _split_chains(series)
    if np.all(halves == halves.flat[0]):
        return 1.0
    n = halves.shape[1]
    within = halves.var(axis=1, ddof=1).mean()
    between = n * halves.mean(axis=1).var(ddof=1)
    if within == 0:
        return math.inf
    return float(math.sqrt((between / within + n - 1) / n))


def _autocov(x: np.ndarray) -> np.ndarray:
    """Biased autocovariance of one chain via FFT, lags 0..n-1."""
    n = x.shape[0]
    xd = x - x.mean()
    f = np.fft.rfft(xd, 2 * n)
    acov = np.fft.irfft(f * np.conj(f), 2 * n)[:n]
    return acov / n


def effective_sample_size(series: np.ndarray) -> float:
    """Autocorrelation-based effective sample size for one scalar.

    Operates on split chains.  Sums autocorrelations in adjacent pairs,
    truncating at the first nonpositive pair and enforcing a decreasing
    sequence, so noisy tails cannot inflate the estimate.  Constant series
    report the total draw count by convention.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim != 2:
        raise ValidationError("effective_sample_size needs a (chains, draws) matrix")
    total = series.size
    halves = _split_chains(series)
    if np.all(halves == halves.flat[0]):
        return float(total)
    m, n = halves.shape
    acov = np.stack([_autocov(c) for c in halves])
    mean_var = acov[:, 0].mean() * n / (n - 1)
    var_plus = mean_var * (n - 1) / n
    if m > 1:
        var_plus += halves.mean(axis=1).var(ddof=1)
    rho = 1.0 - (mean_var - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    pair_sums = []
    t = 0
    while 2 * t + 1 < n:
        p = rho[2 * t] + rho[2 * t + 1]
        if p <= 0:
            break
        if pair_sums and p > pair_sums[-1]:
            p = pair_sums[-1]
        pair_sums.append(p)
        t += 1
    tau = max(-1.0 + 2.0 * sum(pair_sums), 1e-12)
    return float(total / tau)


@dataclass(frozen=True)
class ScalarDiag:
    """Convergence diagnostics for one monitored scalar."""

    rhat: float
    ess: float

    @property
    def flagged(self) -> bool:
        return not (self.rhat <= RHAT_FLAG_LEVEL)


def default_monitored(out: ChainOutput) -> list[str]:
    """The scalars worth watching for a fit: mu, tau (where free), sigma_r,
    and every slope."""
    names = []
    if out.prior.has_mu:
        names.append("mu")
    if out.prior.has_tau:
        names.append("tau")
    names.append("sigma_r")
    names.extend(f"beta[{k + 1}]" for k in range(out.K))
    return names


def convergence(out: ChainOutput, monitored=None) -> dict[str, ScalarDiag]:
    """Split R-hat and effective sample size per monitored scalar name."""
    if out.n_chains < 2:
        raise ValidationError("convergence diagnostics need at least 2 chains")
    if monitored is None:
        monitored = default_monitored(out)
    diags = {}
    for name in monitored:
        series = out.scalar_series(name)
        diags[name] = ScalarDiag(split_rhat(series), effective_sample_size(series))
    return diags


# ----- per-fit summary -------------------------------------------------------


@dataclass
class FitSummary:
    """Reporting bundle for one fitted model.

    inclusion_probs is NaN under the laplace regime (no indicators), and
    mu/tau fields are NaN wherever the regime has no such parameter.
    ``masked`` marks outcomes structurally excluded by a subset fit, which
    reports render as blanks.
    """

    label: str
    regime: str
    outcome_names: tuple[str, ...]
    inclusion_probs: np.ndarray
    relevant: np.ndarray
    beta_hat: np.ndarray
    masked: np.ndarray
    mu_mean: float
    mu_sd: float
    tau_mean: float
    diagnostics: dict[str, ScalarDiag] = field(default_factory=dict)

    def __post_init__(self):
        self.outcome_names = tuple(str(s) for s in self.outcome_names)
        K = len(self.outcome_names)
        self.inclusion_probs = np.asarray(self.inclusion_probs, dtype=float).reshape(-1)
        self.relevant = np.asarray(self.relevant, dtype=bool).reshape(-1)
        self.beta_hat = np.asarray(self.beta_hat, dtype=float).reshape(-1)
        self.masked = np.asarray(self.masked, dtype=bool).reshape(-1)
        for lbl, arr in (("inclusion_probs", self.inclusion_probs),
                         ("relevant", self.relevant), ("beta_hat", self.beta_hat),
                         ("masked", self.masked)):
            if arr.shape[0] != K:
                raise DimensionError(f"{lbl} has length {arr.shape[0]}, expected {K}")
        probs = self.inclusion_probs
        ok = np.isnan(probs) | ((probs >= 0) & (probs <= 1))
        if not ok.all():
            raise ValidationError("inclusion probabilities must lie in [0, 1]")
        if self.regime != "laplace" and self.beta_hat[~self.relevant].any():
            raise ValidationError("irrelevant outcomes must have zero point estimates")

    @property
    def flagged(self) -> list[str]:
        """Monitored scalars whose split R-hat exceeds the 1.05 gate."""
        return [name for name, d in self.diagnostics.items() if d.flagged]

    @property
    def max_rhat(self) -> float:
        if not self.diagnostics:
            return float("nan")
        return max(d.rhat for d in self.diagnostics.values())


def fit_summary(out: ChainOutput, monitored=None, label: str | None = None) -> FitSummary:
    """Summarize one fit: classification, point estimates, mu/tau, diagnostics."""
    regime = out.prior.regime
    if regime == "laplace":
        probs = np.full(out.K, np.nan)
        relevant = laplace_relevance(out)
        mu_mean = mu_sd = tau_mean = float("nan")
    else:
        probs = inclusion_probabilities(out)
        relevant = probs > 0.5
        pooled_mu = out.pooled("mu")
        mu_mean = float(pooled_mu.mean())
        mu_sd = float(pooled_mu.std(ddof=1))
        tau_mean = float(out.pooled("tau").mean())
    masked = ~out.prior.active_mask()
    diags = convergence(out, monitored) if out.n_chains >= 2 else {}
    return FitSummary(
        label=label or REGIME_LABELS[regime],
        regime=regime,
        outcome_names=out.outcome_names,
        inclusion_probs=probs,
        relevant=relevant,
        beta_hat=point_estimates(out),
        masked=masked,
        mu_mean=mu_mean,
        mu_sd=mu_sd,
        tau_mean=tau_mean,
        diagnostics=diags,
    )


# ----- replication-grid containers -------------------------------------------


@dataclass
class RepResult:
    """Outcome of one (dataset replication, regime) fit inside a grid."""

    rep: int
    regime: str
    implied_mu: float
    metrics: RepMetrics | None = None
    max_rhat: float = float("nan")
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and self.metrics is not None


@dataclass
class CellResult:
    """All replications of one (effect size, K1, regime) grid cell."""

    study: int
    effect: float
    k1: int
    regime: str
    reps: list[RepResult] = field(default_factory=list)

    def ok_reps(self) -> list[RepResult]:
        return [r for r in self.reps if r.ok]

    def mean_metric(self, name: str) -> float:
        vals = [getattr(r.metrics, name) for r in self.ok_reps()]
        return float(np.mean(vals)) if vals else float("nan")

    def mu_estimates(self) -> list[float]:
        return [r.metrics.mu_hat for r in self.ok_reps()]

    def implied_mu_mean(self) -> float:
        vals = [r.implied_mu for r in self.ok_reps()]
        return float(np.mean(vals)) if vals else float("nan")


@dataclass
class GridResults:
    """Full replication-grid output: one CellResult per (effect, K1, regime)."""

    study: int
    n: int
    K: int
    n_reps: int
    master_seed: int
    effects: tuple[float, ...]
    k1_values: tuple[int, ...]
    regimes: tuple[str, ...]
    cells: list[CellResult] = field(default_factory=list)

    def cell(self, effect: float, k1: int, regime: str) -> CellResult | None:
        for c in self.cells:
            if c.k1 == k1 and c.regime == regime and math.isclose(c.effect, effect):
                return c
        return None


# ----- table rendering --------------------------------------------------------


@dataclass(frozen=True)
class RenderedTable:
    """A rendered report: aligned text plus comma-separated machine output."""

    layout: str
    text: str
    csv: str

    def __str__(self) -> str:
        return self.text


def _fmt(value: float, decimals: int) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return f"{value:.{decimals}f}"


def _text_table(header: list[str], rows: list[list[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    def line(cells):
        return "  ".join(c.ljust(w) if i == 0 else c.rjust(w)
                         for i, (c, w) in enumerate(zip(cells, widths))).rstrip()
    sep = "-" * (sum(widths) + 2 * (len(widths) - 1))
    return "\n".join([line(header), sep] + [line(r) for r in rows]) + "\n"


def _csv_table(header: list[str], rows: list[list[str]]) -> str:
    return "\n".join([",".join(header)] + [",".join(r) for r in rows]) + "\n"


def _grid_cells(grid: GridResults, regimes) -> list[str]:
    present = [r for r in regimes if any(c.regime == r for c in grid.cells)]
    if not grid.cells or not present:
        raise MissingCellError(
            f"grid has no cells for any of {list(regimes)}; cannot render")
    return present


def _render_table1(grid: GridResults) -> RenderedTable:
    regimes = _grid_cells(grid, ("ssvs_mu", "ssvs_zero"))
    header = ["effect", "K1"]
    for metric_label in ("identified", "correct", "incorrect"):
        header += [f"{metric_label} {REGIME_LABELS[r]}" for r in regimes]
    rows_t, rows_c = [], []
    for effect in grid.effects:
        for k1 in grid.k1_values:
            cells = {r: grid.cell(effect, k1, r) for r in regimes}
            if all(c is None for c in cells.values()):
                continue
            row = [f"{effect:g}", str(k1)]
            for name in ("n_identified", "n_correct", "n_false_positive"):
                for r in regimes:
                    c = cells[r]
                    row.append(_fmt(c.mean_metric(name), 1) if c else "")
            rows_t.append(row)
            rows_c.append(row)
    if not rows_t:
        raise MissingCellError("no (effect, K1) cells available for table1")
    return RenderedTable("table1", _text_table(header, rows_t),
                         _csv_table(header, rows_c))


def _render_table2(grid: GridResults) -> RenderedTable:
    regimes = _grid_cells(grid, ("ssvs_mu", "ssvs_zero", "hierarchical"))
    header = ["K1"]
    for r in regimes:
        header += [f"mse {REGIME_LABELS[r]} effect={e:g}" for e in grid.effects]
    rows = []
    for k1 in grid.k1_values:
        row = [str(k1)]
        any_cell = False
        for r in regimes:
            for e in grid.effects:
                c = grid.cell(e, k1, r)
                any_cell = any_cell or c is not None
                row.append(_fmt(c.mean_metric("mse"), 3) if c else "")
        if any_cell:
            rows.append(row)
    if not rows:
        raise MissingCellError("no (effect, K1) cells available for table2")
    return RenderedTable("table2", _text_table(header, rows), _csv_table(header, rows))


def _mu_table(grid: GridResults, layout: str, with_implied: bool) -> RenderedTable:
    regimes = _grid_cells(grid, ("ssvs_mu", "hierarchical", "subset"))
    header = ["effect", "K1"]
    if with_implied:
        header.append("implied mu")
    header += [REGIME_LABELS[r] for r in regimes]
    rows_t, rows_c = [], []
    csv_header = header + [f"sd {REGIME_LABELS[r]}" for r in regimes] \
        + [f"sem {REGIME_LABELS[r]}" for r in regimes]
    for effect in grid.effects:
        for k1 in grid.k1_values:
            cells = {r: grid.cell(effect, k1, r) for r in regimes}
            if all(c is None for c in cells.values()):
                continue
            summaries = {r: (mu_summary(c.mu_estimates())
                             if c is not None and c.ok_reps() else None)
                         for r, c in cells.items()}
            row = [f"{effect:g}", str(k1)]
            if with_implied:
                implied = [c.implied_mu_mean() for c in cells.values() if c is not None]
                implied = [v for v in implied if not math.isnan(v)]
                row.append(_fmt(float(np.mean(implied)) if implied else float("nan"), 3))
            means = [_fmt(s.mean, 3) if s else "" for s in summaries.values()]
            sds = [(f"({_fmt(s.sd, 3)})" if s.spread_defined else "(n/a)") if s else ""
                   for s in summaries.values()]
            rows_t.append(row + means)
            rows_t.append([""] * len(row) + sds)
            rows_c.append(row + means
                          + [_fmt(s.sd, 6) if s and s.spread_defined else ""
                             for s in summaries.values()]
                          + [_fmt(s.sem, 6) if s and s.spread_defined else ""
                             for s in summaries.values()])
    if not rows_t:
        raise MissingCellError(f"no (effect, K1) cells available for {layout}")
    return RenderedTable(layout, _text_table(header, rows_t),
                         _csv_table(csv_header, rows_c))


def _as_summaries(obj) -> list[FitSummary]:
    if isinstance(obj, FitSummary):
        return [obj]
    if isinstance(obj, (list, tuple)) and obj and all(isinstance(s, FitSummary) for s in obj):
        summaries = list(obj)
        names = {s.outcome_names for s in summaries}
        if len(names) != 1:
            raise ValidationError("fit summaries disagree on outcome names")
        return summaries
    raise ValidationError("this layout needs a FitSummary (or a list of them)")


def _render_table5(obj) -> RenderedTable:
    summaries = _as_summaries(obj)
    header = ["outcome"] + [s.label for s in summaries]
    rows_t, rows_c = [], []
    for k, name in enumerate(summaries[0].outcome_names):
        row_t, row_c = [name], [name]
        for s in summaries:
            if s.regime == "laplace":
                row_t.append("1" if s.relevant[k] else "0")
                row_c.append("1" if s.relevant[k] else "0")
            elif s.masked[k]:
                row_t.append("")
                row_c.append("")
            else:
                mark = "*" if s.relevant[k] else ""
                row_t.append(_fmt(s.inclusion_probs[k], 3) + mark)
                row_c.append(_fmt(s.inclusion_probs[k], 6))
        rows_t.append(row_t)
        rows_c.append(row_c)
    return RenderedTable("table5", _text_table(header, rows_t),
                         _csv_table(header, rows_c))


def _render_table6(obj) -> RenderedTable:
    summaries = _as_summaries(obj)
    header = ["outcome"] + [s.label for s in summaries]
    rows = []
    for k, name in enumerate(summaries[0].outcome_names):
        row = [name]
        for s in summaries:
            row.append("" if s.masked[k] else _fmt(s.beta_hat[k], 3))
        rows.append(row)
    rows.append(["mu"] + [_fmt(s.mu_mean, 3) for s in summaries])
    rows.append(["tau"] + [_fmt(s.tau_mean, 3) for s in summaries])
    return RenderedTable("table6", _text_table(header, rows), _csv_table(header, rows))


_GRID_LAYOUTS = {
    "table1": _render_table1,
    "table2": _render_table2,
    "table3": lambda g: _mu_table(g, "table3", with_implied=False),
    "table4": lambda g: _mu_table(g, "table4", with_implied=True),
}


def render_tables(obj, layout: str) -> RenderedTable:
    """Render grid results (table1-table4) or fit summaries (table5-table6).

    Averages in table1 are shown to 1 decimal, everything else to 3; the
    comma-separated twin carries extra spread columns at higher precision.
    """
    if layout in _GRID_LAYOUTS:
        if not isinstance(obj, GridResults):
            raise ValidationError(f"layout {layout!r} needs GridResults")
        if not obj.cells:
            raise MissingCellError("grid contains no cells")
        return _GRID_LAYOUTS[layout](obj)
    if layout == "table5":
        return _render_table5(obj)
    if layout == "table6":
        return _render_table6(obj)
    raise ValidationError(f"unknown layout {layout!r}; expected table1..table6")
