"""Containers and reshaping for multiple-outcome exposure data.

The wide form is one row per individual with K outcome columns, a scalar
exposure, and a scalar confounding covariate.  Model fitting works on the
long form, where each observed (individual, outcome) cell becomes one row.
Missing cells are encoded as NaN in the wide outcome matrix and are simply
dropped when stacking.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstantColumnError, DimensionError, ValidationError

__all__ = [
    "Dataset",
    "LongDesign",
    "StandardizationRecord",
    "CovariateScaling",
    "stack_long",
    "standardize",
    "log1p_exposure",
    "standardize_covariates",
]


def _frozen_array(values, dtype=float) -> np.ndarray:
    out = np.array(values, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Dataset:
    """Wide-form data: one row per individual, one column per outcome.

    Parameters
    ----------
    outcomes : (n, K) array
        Outcome values, NaN where a cell is unobserved.
    exposure : (n,) array
        Exposure value per individual.  Must be finite.
    confounder : (n,) array
        Confounding covariate per individual.  Must be finite.
    outcome_names : sequence of str
        Unique column labels, length K.
    ids : sequence of str, optional
        Unique individual labels, length n.  Generated as "1".."n" if omitted.
    """

    outcomes: np.ndarray
    exposure: np.ndarray
    confounder: np.ndarray
    outcome_names: tuple[str, ...]
    ids: tuple[str, ...] | None = None

    def __post_init__(self):
        outcomes = np.array(self.outcomes, dtype=float)
        if outcomes.ndim != 2:
            raise DimensionError(f"outcomes must be 2-d, got shape {outcomes.shape}")
        n, K = outcomes.shape
        if n < 1 or K < 1:
            raise ValidationError(f"need at least one individual and one outcome, got shape {(n, K)}")
        exposure = np.array(self.exposure, dtype=float).reshape(-1)
        confounder = np.array(self.confounder, dtype=float).reshape(-1)
        if exposure.shape != (n,) or confounder.shape != (n,):
            raise DimensionError(
                f"exposure and confounder must have length n={n}, "
                f"got {exposure.shape[0]} and {confounder.shape[0]}"
            )
        if not np.isfinite(exposure).all():
            raise ValidationError("exposure contains non-finite values")
        if not np.isfinite(confounder).all():
            raise ValidationError("confounder contains non-finite values")
        if np.isinf(outcomes).any():
            raise ValidationError("outcomes contain infinite values (use NaN for missing)")
        names = tuple(str(s) for s in self.outcome_names)
        if len(names) != K:
            raise DimensionError(f"expected {K} outcome names, got {len(names)}")
        if len(set(names)) != K:
            raise ValidationError("outcome names must be unique")
        if self.ids is None:
            ids = tuple(str(i + 1) for i in range(n))
        else:
            ids = tuple(str(s) for s in self.ids)
            if len(ids) != n:
                raise DimensionError(f"expected {n} ids, got {len(ids)}")
            if len(set(ids)) != n:
                raise ValidationError("ids must be unique")
        outcomes.setflags(write=False)
        exposure.setflags(write=False)
        confounder.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "exposure", exposure)
        object.__setattr__(self, "confounder", confounder)
        object.__setattr__(self, "outcome_names", names)
        object.__setattr__(self, "ids", ids)

    @property
    def n(self) -> int:
        return self.outcomes.shape[0]

    @property
    def K(self) -> int:
        return self.outcomes.shape[1]

    @property
    def observed(self) -> np.ndarray:
        """(n, K) boolean mask of observed cells."""
        return ~np.isnan(self.outcomes)

    def n_observed(self) -> np.ndarray:
        """Number of observed values per outcome, length K."""
        return self.observed.sum(axis=0)


@dataclass(frozen=True)
class LongDesign:
    """Long-form data: one row per observed (individual, outcome) cell.

    Rows are ordered individual-major: all observed outcomes of individual 0,
    then of individual 1, and so on.  ``individual`` and ``outcome`` are
    0-based indices into the originating Dataset; ``exposure`` and
    ``confounder`` repeat the individual-level values on every row.
    """

    y: np.ndarray
    individual: np.ndarray
    outcome: np.ndarray
    exposure: np.ndarray
    confounder: np.ndarray
    n: int
    K: int
    outcome_names: tuple[str, ...]

    def __post_init__(self):
        y = np.array(self.y, dtype=float).reshape(-1)
        m = y.shape[0]
        individual = np.array(self.individual, dtype=np.intp).reshape(-1)
        outcome = np.array(self.outcome, dtype=np.intp).reshape(-1)
        exposure = np.array(self.exposure, dtype=float).reshape(-1)
        confounder = np.array(self.confounder, dtype=float).reshape(-1)
        for label, arr in (("individual", individual), ("outcome", outcome),
                           ("exposure", exposure), ("confounder", confounder)):
            if arr.shape[0] != m:
                raise DimensionError(f"{label} has length {arr.shape[0]}, expected {m}")
        if m < 1:
            raise ValidationError("long design has no rows")
        if not np.isfinite(y).all():
            raise ValidationError("y contains non-finite values")
        if self.n < 1 or self.K < 1:
            raise ValidationError(f"need n >= 1 and K >= 1, got {(self.n, self.K)}")
        if individual.min() < 0 or individual.max() >= self.n:
            raise ValidationError("individual index out of range")
        if outcome.min() < 0 or outcome.max() >= self.K:
            raise ValidationError("outcome index out of range")
        names = tuple(str(s) for s in self.outcome_names)
        if len(names) != self.K:
            raise DimensionError(f"expected {self.K} outcome names, got {len(names)}")
        for arr in (y, individual, outcome, exposure, confounder):
            arr.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "individual", individual)
        object.__setattr__(self, "outcome", outcome)
        object.__setattr__(self, "exposure", exposure)
        object.__setattr__(self, "confounder", confounder)
        object.__setattr__(self, "outcome_names", names)

    @property
    def n_rows(self) -> int:
        return self.y.shape[0]

    def rows_per_outcome(self) -> np.ndarray:
        """Number of rows contributed by each outcome, length K."""
        return np.bincount(self.outcome, minlength=self.K)

    def interaction_matrix(self) -> np.ndarray:
        """Dense (m, K) exposure-by-outcome design block.

        Column k equals the row's exposure where the row belongs to outcome
        k and zero elsewhere.  Intended for small checks; the sampler never
        materializes this.
        """
        mat = np.zeros((self.n_rows, self.K))
        mat[np.arange(self.n_rows), self.outcome] = self.exposure
        return mat

    def unstack(self) -> np.ndarray:
        """Rebuild the wide (n, K) outcome matrix, NaN where unobserved."""
        wide = np.full((self.n, self.K), np.nan)
        wide[self.individual, self.outcome] = self.y
        return wide


def stack_long(data: Dataset) -> LongDesign:
    """Convert a wide Dataset to the long form used for fitting.

    Unobserved cells are dropped.  Row order is individual-major, so the
    output is deterministic given the input.
    """
    obs = data.observed
    if not obs.any():
        raise ValidationError("dataset has no observed outcome values")
    individual, outcome = np.nonzero(obs)
    return LongDesign(
        y=data.outcomes[individual, outcome],
        individual=individual,
        outcome=outcome,
        exposure=data.exposure[individual],
        confounder=data.confounder[individual],
        n=data.n,
        K=data.K,
        outcome_names=data.outcome_names,
    )


@dataclass(frozen=True)
class StandardizationRecord:
    """Per-outcome location and scale removed by ``standardize``.

    ``original_scale_effects`` maps slopes estimated on the standardized
    outcomes back to the raw outcome units (multiply by the saved sd).
    """

    outcome_names: tuple[str, ...]
    means: np.ndarray
    sds: np.ndarray

    def __post_init__(self):
        means = _frozen_array(self.means)
        sds = _frozen_array(self.sds)
        if means.shape != sds.shape or means.ndim != 1:
            raise DimensionError("means and sds must be 1-d arrays of equal length")
        if (sds <= 0).any():
            raise ValidationError("standardization sds must be positive")
        object.__setattr__(self, "outcome_names", tuple(str(s) for s in self.outcome_names))
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sds", sds)

    def original_scale_effects(self, effects: np.ndarray) -> np.ndarray:
        effects = np.asarray(effects, dtype=float)
        if effects.shape[-1] != self.sds.shape[0]:
            raise DimensionError("effects length does not match the record")
        return effects * self.sds

    def to_dict(self) -> dict:
        return {
            "outcome_names": list(self.outcome_names),
            "means": [float(v) for v in self.means],
            "sds": [float(v) for v in self.sds],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "StandardizationRecord":
        return cls(tuple(raw["outcome_names"]), np.array(raw["means"]), np.array(raw["sds"]))


def standardize(data: Dataset) -> tuple[Dataset, StandardizationRecord]:
    """Center and scale each outcome column to mean 0, sample sd 1.

    Only observed cells enter the statistics; missing cells stay missing.
    A column with fewer than two observed values, or with all observed
    values identical, cannot be scaled and raises ConstantColumnError
    naming the outcome.
    """
    means = np.empty(data.K)
    sds = np.empty(data.K)
    out = np.array(data.outcomes)
    for k in range(data.K):
        col = data.outcomes[:, k]
        vals = col[~np.isnan(col)]
        if vals.size < 2 or np.unique(vals).size < 2:
            raise ConstantColumnError(
                f"outcome {data.outcome_names[k]!r} has no spread; cannot standardize"
            )
        means[k] = vals.mean()
        sds[k] = vals.std(ddof=1)
        out[:, k] = (col - means[k]) / sds[k]
    record = StandardizationRecord(data.outcome_names, means, sds)
    result = Dataset(out, data.exposure, data.confounder, data.outcome_names, data.ids)
    return result, record


def log1p_exposure(data: Dataset) -> Dataset:
    """Replace exposure with log(exposure + 1); requires exposure > -1."""
    if (data.exposure <= -1).any():
        raise ValidationError("log1p transform needs exposure > -1 everywhere")
    return Dataset(data.outcomes, np.log1p(data.exposure), data.confounder,
                   data.outcome_names, data.ids)


@dataclass(frozen=True)
class CovariateScaling:
    """Location/scale removed from the individual-level covariates.

    A None pair means the corresponding covariate was left untouched.
    """

    exposure_mean: float | None = None
    exposure_sd: float | None = None
    confounder_mean: float | None = None
    confounder_sd: float | None = None

    def to_dict(self) -> dict:
        return {
            "exposure_mean": self.exposure_mean,
            "exposure_sd": self.exposure_sd,
            "confounder_mean": self.confounder_mean,
            "confounder_sd": self.confounder_sd,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "CovariateScaling":
        return cls(raw.get("exposure_mean"), raw.get("exposure_sd"),
                   raw.get("confounder_mean"), raw.get("confounder_sd"))


def _center_scale(values: np.ndarray, label: str) -> tuple[np.ndarray, float, float]:
    if values.size < 2:
        raise ValidationError(f"need at least two individuals to standardize {label}")
    mean = float(values.mean())
    sd = float(values.std(ddof=1))
    if sd <= 0:
        raise ValidationError(f"{label} is constant; cannot standardize")
    return (values - mean) / sd, mean, sd


def standardize_covariates(data: Dataset, exposure: bool = False,
                           confounder: bool = False) -> tuple[Dataset, CovariateScaling]:
    """Center and scale the exposure and/or the confounder across individuals."""
    exp_vals = np.array(data.exposure)
    con_vals = np.array(data.confounder)
    e_mean = e_sd = c_mean = c_sd = None
    if exposure:
        exp_vals, e_mean, e_sd = _center_scale(exp_vals, "exposure")
    if confounder:
        con_vals, c_mean, c_sd = _center_scale(con_vals, "confounder")
    scaled = Dataset(data.outcomes, exp_vals, con_vals, data.outcome_names, data.ids)
    return scaled, CovariateScaling(e_mean, e_sd, c_mean, c_sd)
