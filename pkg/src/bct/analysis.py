"""End-to-end pipeline: posterior sampling, prior sampling, Bayes factors.

The posterior side fits a normal approximation to the Fisher-transformed
correlation draws of the Gibbs sampler; the prior side estimates densities
and order probabilities from a large sample of the jointly uniform prior.
Both sides produce the equality/order components that make up the Bayes
factor of every hypothesis against the unconstrained model.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .bayes import (
    BayesFactorReport,
    GaussianApprox,
    HypothesisEvidence,
    combine_evidence,
    complement_evidence,
    fisher_sample,
    fit_gaussian,
    posterior_conditional_order_probability,
    posterior_density_at_equalities,
    posterior_probabilities,
)
from .hypotheses import Hypothesis, HypothesisSet, fisher_transform_constants
from .mcmc import ChainConfig, PosteriorChain, run_chains
from .model import CorrelationSample, Dataset, ModelSpec, rho_pairs
from .prior import (
    EstimationWarning,
    prior_conditional_order_probability,
    prior_density_at_equalities,
    sample_prior_rho,
)

__all__ = [
    "AnalysisSettings",
    "EstimatesReport",
    "AnalysisResult",
    "orthant_budget",
    "prior_component",
    "posterior_component",
    "estimates_from_chain",
    "analyse",
]

#: Smallest Monte Carlo budget used for any orthant probability.
ORTHANT_FLOOR = 100_000

#: Default box width (Fisher scale) of the prior density estimator.
DEFAULT_DELTA = 0.2


@dataclass(frozen=True)
class AnalysisSettings:
    """Knobs of one full analysis run."""

    seed: int = 1
    prior_draws: int = 200_000
    posterior_draws: int = 10_000
    burn_in: int = 2000
    thin: int = 1
    draws_per_constraint: int = 5000
    delta: float = DEFAULT_DELTA
    n_chains: int = 1

    def __post_init__(self):
        if self.prior_draws < 1 or self.posterior_draws < 1:
            raise ValueError("draw counts must be positive")
        if self.draws_per_constraint < 1:
            raise ValueError("the per-constraint draw count must be positive")
        if not 0.0 < self.delta < 1.0:
            raise ValueError("delta must lie in (0, 1)")


@dataclass(frozen=True)
class EstimatesReport:
    """Central 95% bounds and medians under the unconstrained model.

    Each array stacks (lower, median, upper) along its second axis:
    ``correlation`` is (G, 3, P, P), ``coefficients`` is (G, 3, Q, P) with
    covariate rows and outcome columns (intercept row last when present),
    and ``deviations`` is (G, 3, P) with the entries of ordinal outcomes
    fixed at 1.
    """

    correlation: np.ndarray
    coefficients: np.ndarray
    deviations: np.ndarray

    def __post_init__(self):
        for arr in (self.correlation, self.coefficients, self.deviations):
            if arr.shape[1] != 3:
                raise ValueError("expected (lower, median, upper) along axis 1")
            if np.any(arr[:, 0] > arr[:, 1]) or np.any(arr[:, 1] > arr[:, 2]):
                raise ValueError("bounds must satisfy lower <= median <= upper")


@dataclass(frozen=True)
class AnalysisResult:
    report: BayesFactorReport | None
    estimates: EstimatesReport
    acceptance_rates: dict[str, float]
    chain_rates: tuple[dict[str, float], ...]


def orthant_budget(draws_per_constraint: int, n_inequalities: int) -> int:
    """Monte Carlo budget for one hypothesis's orthant probability."""
    return max(ORTHANT_FLOOR, draws_per_constraint * max(n_inequalities, 1))


def prior_component(
    h_eta: Hypothesis,
    prior_eta: CorrelationSample,
    delta: float,
    rng: np.random.Generator,
    draws_per_constraint: int,
) -> tuple[float, float, float, list[str]]:
    """Prior-side (complexity) components (rcE, rcI, rcI standard error).

    The equality density is estimated twice, at ``delta`` and ``delta / 2``;
    a discrepancy beyond three combined standard errors is reported as a
    warning (and suggests a larger prior sample).
    """
    notes: list[str] = []
    if h_eta.n_equalities:
        primary = prior_density_at_equalities(prior_eta, h_eta, delta)
        halved = prior_density_at_equalities(prior_eta, h_eta, delta / 2.0)
        spread = abs(primary.value - halved.value)
        limit = 3.0 * float(np.hypot(primary.se, halved.se))
        if spread > limit:
            notes.append(
                f"hypothesis {h_eta.label!r}: equality density estimates at box widths "
                f"{delta} and {delta / 2} disagree ({primary.value:.5f} vs "
                f"{halved.value:.5f}); increase the prior sample"
            )
        rc_eq = primary.value
    else:
        rc_eq = 1.0
    if h_eta.n_inequalities:
        budget = orthant_budget(draws_per_constraint, h_eta.n_inequalities)
        rc_in, rc_in_se = prior_conditional_order_probability(
            prior_eta, h_eta, delta, rng, budget
        )
    else:
        rc_in, rc_in_se = 1.0, 0.0
    return rc_eq, rc_in, rc_in_se, notes


def posterior_component(
    h_eta: Hypothesis,
    approx: GaussianApprox,
    rng: np.random.Generator,
    draws_per_constraint: int,
) -> tuple[float, float, float]:
    """Posterior-side (fit) components (rfE, rfI, rfI standard error)."""
    rf_eq = (
        posterior_density_at_equalities(approx, h_eta) if h_eta.n_equalities else 1.0
    )
    if h_eta.n_inequalities:
        budget = orthant_budget(draws_per_constraint, h_eta.n_inequalities)
        rf_in, rf_in_se = posterior_conditional_order_probability(
            approx, h_eta, rng, budget
        )
    else:
        rf_in, rf_in_se = 1.0, 0.0
    return rf_eq, rf_in, rf_in_se


def bayes_factor_report(
    hypothesis_set: HypothesisSet,
    prior_eta: CorrelationSample,
    approx: GaussianApprox,
    rng: np.random.Generator,
    delta: float = DEFAULT_DELTA,
    draws_per_constraint: int = 5000,
) -> BayesFactorReport:
    """Score every hypothesis and normalize to posterior probabilities."""
    notes: list[str] = []
    hyps_eta = tuple(fisher_transform_constants(h) for h in hypothesis_set.hypotheses)
    evidences: list[HypothesisEvidence] = []
    for h_eta in hyps_eta:
        rc_eq, rc_in, rc_in_se, delta_notes = prior_component(
            h_eta, prior_eta, delta, rng, draws_per_constraint
        )
        notes.extend(delta_notes)
        rf_eq, rf_in, rf_in_se = posterior_component(
            h_eta, approx, rng, draws_per_constraint
        )
        evidences.append(
            combine_evidence(
                h_eta.label or f"Hypothesis {len(evidences) + 1}",
                rc_eq,
                rc_in,
                rf_eq,
                rf_in,
                rc_order_se=rc_in_se,
                rf_order_se=rf_in_se,
            )
        )
    complement = None
    if hypothesis_set.include_complement:
        complement, comp_notes = complement_evidence(
            hyps_eta, tuple(evidences), prior_sample=prior_eta
        )
        notes.extend(comp_notes)
    factors = [e.bayes_factor for e in evidences]
    if complement is not None:
        factors.append(complement.bayes_factor)
    probabilities = posterior_probabilities(np.array(factors))
    for note in notes:
        warnings.warn(note, EstimationWarning, stacklevel=2)
    return BayesFactorReport(
        evidences=tuple(evidences),
        complement=complement,
        probabilities=probabilities,
        warnings=tuple(notes),
    )


def estimates_from_chain(chain: PosteriorChain, spec: ModelSpec) -> EstimatesReport:
    """Elementwise 2.5/50/97.5 percentiles of the retained draws."""
    G, P, Q = spec.n_groups, spec.n_outcomes, spec.n_covariates
    per_group = P * (P - 1) // 2
    rho_q = np.quantile(chain.rho.draws, [0.025, 0.5, 0.975], axis=0)
    corr = np.zeros((G, 3, P, P))
    for g in range(G):
        for b in range(3):
            M = np.eye(P)
            for k, (p1, p2) in enumerate(rho_pairs(P)):
                M[p1 - 1, p2 - 1] = M[p2 - 1, p1 - 1] = rho_q[b, g * per_group + k]
            corr[g, b] = M
    coef_q = np.quantile(chain.coefficients, [0.025, 0.5, 0.975], axis=0)
    coef = np.transpose(coef_q, (1, 0, 2, 3)) if Q else np.zeros((G, 3, 0, P))
    dev = np.ones((G, 3, P))
    if spec.n_continuous:
        sig_q = np.quantile(chain.sigma, [0.025, 0.5, 0.975], axis=0)
        for g in range(G):
            for b in range(3):
                dev[g, b, list(spec.continuous_positions)] = sig_q[b, g]
    return EstimatesReport(correlation=corr, coefficients=coef, deviations=dev)


def analyse(
    dataset: Dataset,
    hypothesis_set: HypothesisSet | None,
    settings: AnalysisSettings,
    progress=None,
) -> AnalysisResult:
    """Run the full pipeline on a loaded dataset.

    With ``hypothesis_set`` None (an estimation-only run) just the
    unconstrained estimates are produced.
    """
    root = np.random.SeedSequence(settings.seed)
    prior_seq, mc_seq = root.spawn(2)
    chain_cfg = ChainConfig(
        burn_in=settings.burn_in,
        draws=settings.posterior_draws,
        thin=settings.thin,
        seed=settings.seed,
    )
    pooled, chains = run_chains(dataset, chain_cfg, settings.n_chains, progress=progress)
    estimates = estimates_from_chain(pooled, dataset.spec)
    if hypothesis_set is None:
        return AnalysisResult(
            report=None,
            estimates=estimates,
            acceptance_rates=pooled.acceptance_rates,
            chain_rates=tuple(c.acceptance_rates for c in chains),
        )
    prior_rng = np.random.default_rng(prior_seq)
    mc_rng = np.random.default_rng(mc_seq)
    prior_eta = fisher_sample(sample_prior_rho(dataset.spec, settings.prior_draws, prior_rng))
    approx = fit_gaussian(fisher_sample(pooled.rho))
    report = bayes_factor_report(
        hypothesis_set,
        prior_eta,
        approx,
        mc_rng,
        delta=settings.delta,
        draws_per_constraint=settings.draws_per_constraint,
    )
    return AnalysisResult(
        report=report,
        estimates=estimates,
        acceptance_rates=pooled.acceptance_rates,
        chain_rates=tuple(c.acceptance_rates for c in chains),
    )
