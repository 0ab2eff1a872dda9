"""File formats: dataset CSV, chain files, grid results, fit summaries.

All writes are atomic (write to a temp file in the target directory, then
rename) and all formats are versioned, delimited text with a commented
metadata header, so a chain or results file is self-describing and
round-trips exactly.  Floats serialize with 17 significant digits, which
restores the same doubles bit for bit.
"""

from __future__ import annotations

import csv
import io as _io
import json
import math
import os
from dataclasses import asdict

import numpy as np

from .data import Dataset
from .errors import SchemaError, ValidationError
from .metrics import (CellResult, FitSummary, GridResults, RepMetrics,
                      RepResult, ScalarDiag)
from .model import PriorConfig
from .sampler import ChainDraws, ChainOutput, SamplerConfig

__all__ = [
    "read_dataset",
    "write_dataset",
    "write_chain",
    "read_chain",
    "write_grid_results",
    "read_grid_results",
    "write_fit_summary",
    "read_fit_summary",
    "write_manifest",
    "atomic_write_text",
    "prior_to_dict",
    "prior_from_dict",
    "sampler_config_to_dict",
    "sampler_config_from_dict",
]

CHAIN_FILE_VERSION = "outsel-chain-file v1"
GRID_FILE_VERSION = "outsel-grid-results v1"
FIT_SUMMARY_VERSION = "outsel-fit-summary v1"
_FLOAT_FMT = "%.17g"


# ----- primitives -------------------------------------------------------------


def atomic_write_text(path: str, text: str) -> None:
    """Write text so the target never exists half-written."""
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _ffmt(value: float) -> str:
    return _FLOAT_FMT % float(value)


def _nan_to_none(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _none_to_nan(value) -> float:
    return float("nan") if value is None else float(value)


# ----- prior / sampler-config echo ---------------------------------------------


def prior_to_dict(prior: PriorConfig) -> dict:
    return {
        "regime": prior.regime,
        "inclusion_prior": [float(v) for v in prior.inclusion_prior],
        "spike_mode": prior.spike_mode,
        "spike_ratio": prior.spike_ratio,
        "spike_variance": prior.spike_variance,
        "mu_prior_sd": prior.mu_prior_sd,
        "tau_logprior": list(prior.tau_logprior),
        "sigma_logprior": list(prior.sigma_logprior),
        "nu_prior_sd": prior.nu_prior_sd,
        "gamma_prior_sd": prior.gamma_prior_sd,
        "laplace_scale": prior.laplace_scale,
        "subset_include": (None if prior.subset_include is None
                           else [bool(v) for v in prior.subset_include]),
    }


def prior_from_dict(raw: dict) -> PriorConfig:
    try:
        return PriorConfig(
            regime=raw["regime"],
            inclusion_prior=np.array(raw["inclusion_prior"], dtype=float),
            spike_mode=raw["spike_mode"],
            spike_ratio=float(raw["spike_ratio"]),
            spike_variance=float(raw["spike_variance"]),
            mu_prior_sd=float(raw["mu_prior_sd"]),
            tau_logprior=tuple(raw["tau_logprior"]),
            sigma_logprior=tuple(raw["sigma_logprior"]),
            nu_prior_sd=float(raw["nu_prior_sd"]),
            gamma_prior_sd=float(raw["gamma_prior_sd"]),
            laplace_scale=float(raw["laplace_scale"]),
            subset_include=(None if raw.get("subset_include") is None
                            else np.array(raw["subset_include"], dtype=bool)),
        )
    except KeyError as missing:
        raise SchemaError(f"prior echo is missing field {missing}") from None


def sampler_config_to_dict(config: SamplerConfig) -> dict:
    return asdict(config)


def sampler_config_from_dict(raw: dict) -> SamplerConfig:
    try:
        return SamplerConfig(**raw)
    except (TypeError, KeyError) as err:
        raise SchemaError(f"bad sampler-config echo: {err}") from None


# ----- dataset CSV --------------------------------------------------------------


def read_dataset(path: str, outcome_columns=None) -> Dataset:
    """Read a wide dataset: columns id, exposure, z, then outcome columns.

    Empty outcome cells are missing values.  ``outcome_columns`` restricts
    (and orders) which outcome columns are used; the default is every
    column after the three required ones, in file order.
    """
    try:
        fh = open(path, "r", encoding="utf-8", newline="")
    except OSError as err:
        raise ValidationError(f"cannot read dataset: {err}") from None
    with fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError("dataset file is empty (no header row)")
    header = [h.strip() for h in rows[0]]
    for required in ("id", "exposure", "z"):
        if required not in header:
            raise SchemaError(f"dataset is missing required column {required!r}")
    remaining = [h for h in header if h not in ("id", "exposure", "z")]
    if outcome_columns is None:
        outcome_names = remaining
    else:
        outcome_names = [str(c) for c in outcome_columns]
        for name in outcome_names:
            if name not in remaining:
                raise SchemaError(f"requested outcome column {name!r} not in file")
    if not outcome_names:
        raise SchemaError("dataset has no outcome columns")
    col_of = {name: header.index(name) for name in header}

    def parse_cell(text: str, row_no: int, col: str, allow_empty: bool) -> float:
        text = text.strip()
        if text == "":
            if allow_empty:
                return float("nan")
            raise SchemaError(f"empty value at data row {row_no}, column {col!r}")
        try:
            return float(text)
        except ValueError:
            raise SchemaError(
                f"non-numeric value {text!r} at data row {row_no}, column {col!r}"
            ) from None

    ids, exposure, confounder, outcomes = [], [], [], []
    seen = set()
    for row_no, row in enumerate(rows[1:], start=1):
        if not any(cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"data row {row_no} has {len(row)} cells, "
                              f"header has {len(header)}")
        ident = row[col_of["id"]].strip()
        if ident in seen:
            raise SchemaError(f"duplicate id {ident!r} at data row {row_no}")
        seen.add(ident)
        ids.append(ident)
        exposure.append(parse_cell(row[col_of["exposure"]], row_no, "exposure", False))
        confounder.append(parse_cell(row[col_of["z"]], row_no, "z", False))
        outcomes.append([parse_cell(row[col_of[name]], row_no, name, True)
                         for name in outcome_names])
    if not ids:
        raise SchemaError("dataset has a header but no data rows")
    return Dataset(np.array(outcomes, dtype=float), np.array(exposure),
                   np.array(confounder), tuple(outcome_names), tuple(ids))


def write_dataset(data: Dataset, path: str) -> None:
    """Write a Dataset in the same CSV schema read_dataset expects."""
    buf = _io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "exposure", "z", *data.outcome_names])
    for i in range(data.n):
        cells = [data.ids[i], _ffmt(data.exposure[i]), _ffmt(data.confounder[i])]
        for k in range(data.K):
            v = data.outcomes[i, k]
            cells.append("" if math.isnan(v) else _ffmt(v))
        writer.writerow(cells)
    atomic_write_text(path, buf.getvalue())


# ----- chain files ----------------------------------------------------------------


def _chain_columns(K: int, n: int) -> list[str]:
    cols = ["chain"]
    cols += [f"beta[{k}]" for k in range(1, K + 1)]
    cols += [f"I[{k}]" for k in range(1, K + 1)]
    cols += ["mu", "tau"]
    cols += [f"sigma[{k}]" for k in range(1, K + 1)]
    cols += ["sigma_r"]
    cols += [f"nu[{k}]" for k in range(1, K + 1)]
    cols += [f"gamma[{k}]" for k in range(1, K + 1)]
    cols += [f"alpha[{j}]" for j in range(1, n + 1)]
    return cols


def write_chain(out: ChainOutput, path: str) -> None:
    """Persist every stored draw of every chain to one delimited file.

    The commented header carries the sampler configuration (including the
    seed), the prior echo, the layout sizes, and the chain indices; data
    rows follow in chain-major order with an explicit chain column.  Wall
    time is deliberately not stored: equal seeds must give equal files.
    """
    meta = {
        "n": out.n,
        "K": out.K,
        "outcome_names": list(out.outcome_names),
        "n_chains": out.n_chains,
        "draws_per_chain": out.draws_per_chain,
        "chain_indices": [c.chain_index for c in out.chains],
        "sampler_config": sampler_config_to_dict(out.config),
        "prior": prior_to_dict(out.prior),
    }
    lines = [f"# {CHAIN_FILE_VERSION}"]
    lines += [f"# {key}: {json.dumps(value)}" for key, value in meta.items()]
    lines.append(",".join(_chain_columns(out.K, out.n)))
    for c in out.chains:
        blocks = [np.full((c.n_draws, 1), float(c.chain_index)),
                  c.beta, c.indicators.astype(float),
                  c.mu[:, None], c.tau[:, None], c.sigma, c.sigma_r[:, None],
                  c.nu, c.gamma, c.alpha]
        matrix = np.concatenate(blocks, axis=1)
        for row in matrix:
            lines.append(",".join(_FLOAT_FMT % v for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_chain(path: str) -> ChainOutput:
    """Rebuild a ChainOutput from a chain file, verifying the schema."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise SchemaError(f"cannot read chain file: {err}") from None
    if not lines or lines[0] != f"# {CHAIN_FILE_VERSION}":
        raise SchemaError(f"not a chain file (expected header '# {CHAIN_FILE_VERSION}')")
    meta = {}
    body_start = 1
    for idx in range(1, len(lines)):
        line = lines[idx]
        if not line.startswith("# "):
            body_start = idx
            break
        key, _, raw = line[2:].partition(": ")
        try:
            meta[key] = json.loads(raw)
        except json.JSONDecodeError:
            raise SchemaError(f"bad metadata line in chain file: {line!r}") from None
    else:
        raise SchemaError("chain file has no column header")
    required = ("n", "K", "outcome_names", "n_chains", "draws_per_chain",
                "chain_indices", "sampler_config", "prior")
    for key in required:
        if key not in meta:
            raise SchemaError(f"chain file metadata is missing {key!r}")
    n, K = int(meta["n"]), int(meta["K"])
    columns = lines[body_start].split(",")
    expected = _chain_columns(K, n)
    if columns != expected:
        unknown = [c for c in columns if c not in expected]
        missing = [c for c in expected if c not in columns]
        raise SchemaError(f"chain file columns do not match the layout "
                          f"(unknown: {unknown[:3]}, missing: {missing[:3]})")
    data_lines = lines[body_start + 1:]
    n_chains = int(meta["n_chains"])
    draws = int(meta["draws_per_chain"])
    if len(data_lines) != n_chains * draws:
        raise SchemaError(f"chain file is truncated: expected {n_chains * draws} "
                          f"rows, found {len(data_lines)}")
    if data_lines:
        matrix = np.loadtxt(_io.StringIO("\n".join(data_lines)),
                            delimiter=",", ndmin=2)
        if matrix.shape[1] != len(expected):
            raise SchemaError("chain file row width does not match its header")
    else:
        matrix = np.empty((0, len(expected)))
    chains = []
    for ci, chain_index in enumerate(meta["chain_indices"]):
        rows = matrix[ci * draws:(ci + 1) * draws]
        if rows.shape[0] and not np.all(rows[:, 0] == float(chain_index)):
            raise SchemaError(f"chain column mismatch in block {ci}")
        at = 1
        def take(width):
            nonlocal at
            block = rows[:, at:at + width]
            at += width
            return block
        beta = take(K)
        indicators = take(K).astype(bool)
        mu = take(1)[:, 0]
        tau = take(1)[:, 0]
        sigma = take(K)
        sigma_r = take(1)[:, 0]
        nu = take(K)
        gamma = take(K)
        alpha = take(n)
        chains.append(ChainDraws(int(chain_index), beta, indicators, mu, tau,
                                 sigma, sigma_r, nu, gamma, alpha))
    return ChainOutput(
        chains=tuple(chains),
        n=n,
        K=K,
        outcome_names=tuple(meta["outcome_names"]),
        prior=prior_from_dict(meta["prior"]),
        config=sampler_config_from_dict(meta["sampler_config"]),
    )


# ----- grid results -----------------------------------------------------------------


_GRID_COLUMNS = ["study", "effect", "k1", "regime", "rep", "n_identified",
                 "n_correct", "n_false_positive", "mse", "mu_hat",
                 "implied_mu", "max_rhat", "error"]


def write_grid_results(grid: GridResults, path: str) -> None:
    """Persist a replication grid, one row per (cell, replication)."""
    meta = {
        "study": grid.study, "n": grid.n, "K": grid.K, "n_reps": grid.n_reps,
        "master_seed": grid.master_seed, "effects": list(grid.effects),
        "k1_values": list(grid.k1_values), "regimes": list(grid.regimes),
    }
    buf = _io.StringIO()
    buf.write(f"# {GRID_FILE_VERSION}\n")
    for key, value in meta.items():
        buf.write(f"# {key}: {json.dumps(value)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_GRID_COLUMNS)
    for cell in grid.cells:
        for r in cell.reps:
            m = r.metrics
            writer.writerow([
                cell.study, _ffmt(cell.effect), cell.k1, cell.regime, r.rep,
                m.n_identified if m else "", m.n_correct if m else "",
                m.n_false_positive if m else "",
                _ffmt(m.mse) if m else "", _ffmt(m.mu_hat) if m else "",
                _ffmt(r.implied_mu),
                "" if math.isnan(r.max_rhat) else _ffmt(r.max_rhat),
                r.error or "",
            ])
    atomic_write_text(path, buf.getvalue())


def read_grid_results(path: str) -> GridResults:
    """Rebuild a GridResults from its results file."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as err:
        raise SchemaError(f"cannot read results file: {err}") from None
    if not lines or lines[0] != f"# {GRID_FILE_VERSION}":
        raise SchemaError(f"not a grid results file (expected '# {GRID_FILE_VERSION}')")
    meta = {}
    body = []
    for line in lines[1:]:
        if line.startswith("# "):
            key, _, raw = line[2:].partition(": ")
            meta[key] = json.loads(raw)
        else:
            body.append(line)
    if not body or body[0].split(",") != _GRID_COLUMNS:
        raise SchemaError("grid results file has a bad column header")
    grid = GridResults(
        study=int(meta["study"]), n=int(meta["n"]), K=int(meta["K"]),
        n_reps=int(meta["n_reps"]), master_seed=int(meta["master_seed"]),
        effects=tuple(float(v) for v in meta["effects"]),
        k1_values=tuple(int(v) for v in meta["k1_values"]),
        regimes=tuple(meta["regimes"]),
    )
    cells: dict[tuple, CellResult] = {}
    for row in csv.reader(_io.StringIO("\n".join(body[1:]))):
        if not row:
            continue
        study, effect, k1, regime = int(row[0]), float(row[1]), int(row[2]), row[3]
        key = (effect, k1, regime)
        if key not in cells:
            cells[key] = CellResult(study, effect, k1, regime)
        metrics = None
        if row[5] != "":
            metrics = RepMetrics(int(row[5]), int(row[6]), int(row[7]),
                                 float(row[8]), float(row[9]))
        cells[key].reps.append(RepResult(
            rep=int(row[4]), regime=regime, implied_mu=float(row[10]),
            metrics=metrics,
            max_rhat=float(row[11]) if row[11] != "" else float("nan"),
            error=row[12] or None,
        ))
    grid.cells = list(cells.values())
    return grid


# ----- fit summaries -------------------------------------------------------------------


def write_fit_summary(summary: FitSummary, path: str) -> None:
    """Persist a FitSummary as versioned JSON (NaN encoded as null)."""
    payload = {
        "version": FIT_SUMMARY_VERSION,
        "label": summary.label,
        "regime": summary.regime,
        "outcome_names": list(summary.outcome_names),
        "inclusion_probs": [_nan_to_none(float(v)) for v in summary.inclusion_probs],
        "relevant": [bool(v) for v in summary.relevant],
        "beta_hat": [float(v) for v in summary.beta_hat],
        "masked": [bool(v) for v in summary.masked],
        "mu_mean": _nan_to_none(summary.mu_mean),
        "mu_sd": _nan_to_none(summary.mu_sd),
        "tau_mean": _nan_to_none(summary.tau_mean),
        "diagnostics": {name: {"rhat": _nan_to_none(d.rhat), "ess": _nan_to_none(d.ess)}
                        for name, d in summary.diagnostics.items()},
    }
    atomic_write_text(path, json.dumps(payload, indent=2, allow_nan=False) + "\n")


def read_fit_summary(path: str) -> FitSummary:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as err:
        raise SchemaError(f"cannot read fit summary: {err}") from None
    except json.JSONDecodeError as err:
        raise SchemaError(f"fit summary is not valid JSON: {err}") from None
    if raw.get("version") != FIT_SUMMARY_VERSION:
        raise SchemaError(f"unsupported fit summary version {raw.get('version')!r}")
    return FitSummary(
        label=raw["label"],
        regime=raw["regime"],
        outcome_names=tuple(raw["outcome_names"]),
        inclusion_probs=np.array([_none_to_nan(v) for v in raw["inclusion_probs"]]),
        relevant=np.array(raw["relevant"], dtype=bool),
        beta_hat=np.array(raw["beta_hat"], dtype=float),
        masked=np.array(raw["masked"], dtype=bool),
        mu_mean=_none_to_nan(raw["mu_mean"]),
        mu_sd=_none_to_nan(raw["mu_sd"]),
        tau_mean=_none_to_nan(raw["tau_mean"]),
        diagnostics={name: ScalarDiag(_none_to_nan(d["rhat"]), _none_to_nan(d["ess"]))
                     for name, d in raw.get("diagnostics", {}).items()},
    )


# ----- manifest -------------------------------------------------------------------------


def write_manifest(path: str, payload: dict) -> None:
    """Write the run manifest: full config echo, seeds, outputs.

    Deliberately carries no timestamps or host details, so re-running the
    recorded configuration regenerates outputs that compare equal.
    """
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True,
                                       allow_nan=False) + "\n")
