"""Bayesian outcome selection for correlated multiple-outcome data.

Fits a random-intercept mixed model across many outcomes of the same
individuals and selects the outcomes affected by an exposure through a
spike-and-slab prior whose slab center is itself estimated, so selected
outcomes share a common effect size.  Ships with a purpose-built Gibbs
sampler, synthetic replication studies, reporting, and a command line
interface (``outsel``).
"""

from .data import (CovariateScaling, Dataset, LongDesign, StandardizationRecord,
                   log1p_exposure, stack_long, standardize, standardize_covariates)
from .errors import (ConstantColumnError, DimensionError, MissingCellError,
                     NonFiniteStateError, OutselError, SchemaError,
                     SliceStepError, TooFewDrawsError, ValidationError)
from .io import (read_chain, read_dataset, read_fit_summary, read_grid_results,
                 write_chain, write_dataset, write_fit_summary,
                 write_grid_results)
from .metrics import (CellResult, FitSummary, GridResults, MuSummary,
                      RenderedTable, RepMetrics, RepResult, ScalarDiag,
                      classify_outcomes, convergence, detection_counts,
                      effective_sample_size, fit_summary,
                      inclusion_probabilities, laplace_relevance, mse,
                      mu_summary, point_estimates, render_tables, rep_metrics,
                      split_rhat)
from .model import (ParameterState, PriorConfig, application_priors, log_beta_prior,
                    log_joint, simulation_priors)
from .sampler import (ChainDraws, ChainOutput, GibbsSampler, SamplerConfig,
                      run_chain, slice_sample)
from .simulate import (Study1Params, Study2Params, TruthRecord, gen_exposure,
                       generate_study1, generate_study2, run_replication_grid)

__version__ = "0.1.0"

__all__ = [
    "Dataset", "LongDesign", "StandardizationRecord", "CovariateScaling",
    "stack_long", "standardize", "standardize_covariates", "log1p_exposure",
    "PriorConfig", "ParameterState", "simulation_priors", "application_priors",
    "log_beta_prior", "log_joint",
    "SamplerConfig", "ChainDraws", "ChainOutput", "GibbsSampler",
    "run_chain", "slice_sample",
    "Study1Params", "Study2Params", "TruthRecord", "gen_exposure",
    "generate_study1", "generate_study2", "run_replication_grid",
    "inclusion_probabilities", "classify_outcomes", "laplace_relevance",
    "point_estimates", "mse", "detection_counts", "rep_metrics", "mu_summary",
    "split_rhat", "effective_sample_size", "convergence", "fit_summary",
    "render_tables",
    "RepMetrics", "MuSummary", "ScalarDiag", "FitSummary", "RepResult",
    "CellResult", "GridResults", "RenderedTable",
    "read_dataset", "write_dataset", "read_chain", "write_chain",
    "read_grid_results", "write_grid_results", "read_fit_summary",
    "write_fit_summary",
    "OutselError", "ValidationError", "DimensionError", "SchemaError",
    "ConstantColumnError", "SliceStepError", "NonFiniteStateError",
    "TooFewDrawsError", "MissingCellError",
    "__version__",
]
