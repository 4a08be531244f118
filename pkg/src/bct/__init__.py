"""Bayes factor tests for equality and order constraints on correlations."""

from .analysis import AnalysisResult, AnalysisSettings, EstimatesReport, analyse
from .bayes import (
    BayesFactorReport,
    GaussianApprox,
    HypothesisEvidence,
    fisher,
    fisher_inverse,
    fit_gaussian,
    posterior_probabilities,
)
from .fileio import RunConfig, parse_data_file, parse_input_file, write_reports
from .hypotheses import (
    ConstraintRow,
    Hypothesis,
    HypothesisSet,
    compile_hypothesis,
    parse_constraint_line,
)
from .mcmc import ChainConfig, GibbsSampler, PosteriorChain, run_chain, run_chains
from .model import (
    CorrelationSample,
    Dataset,
    ModelSpec,
    ParameterState,
    assemble_covariance,
    equicorrelation_determinant,
    is_positive_definite,
    rho_index,
)
from .prior import (
    estimate_volume_rejection,
    prior_conditional_order_probability,
    prior_density_at_equalities,
    sample_prior_rho,
    sample_uniform_correlation,
    sample_uniform_correlations,
)
from .simulate import SimDesign, consistency_design, generate_dataset, run_consistency_grid

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult",
    "AnalysisSettings",
    "BayesFactorReport",
    "ChainConfig",
    "ConstraintRow",
    "CorrelationSample",
    "Dataset",
    "EstimatesReport",
    "GaussianApprox",
    "GibbsSampler",
    "Hypothesis",
    "HypothesisEvidence",
    "HypothesisSet",
    "ModelSpec",
    "ParameterState",
    "PosteriorChain",
    "RunConfig",
    "SimDesign",
    "analyse",
    "assemble_covariance",
    "compile_hypothesis",
    "consistency_design",
    "equicorrelation_determinant",
    "estimate_volume_rejection",
    "fisher",
    "fisher_inverse",
    "fit_gaussian",
    "generate_dataset",
    "is_positive_definite",
    "parse_constraint_line",
    "parse_data_file",
    "parse_input_file",
    "posterior_probabilities",
    "prior_conditional_order_probability",
    "prior_density_at_equalities",
    "rho_index",
    "run_chain",
    "run_chains",
    "run_consistency_grid",
    "sample_prior_rho",
    "sample_uniform_correlation",
    "sample_uniform_correlations",
    "write_reports",
]
