"""Bayes factors of constrained hypotheses against the unconstrained model.

Each hypothesis is scored by four components: the density of the equality
coordinates at their constants and the probability of the order constraints
given the equalities, once under the prior (relative complexity, rc) and
once under the posterior (relative fit, rf).  The Bayes factor against the
unconstrained hypothesis is rf / rc.  The posterior side works on a normal
approximation of the Fisher-transformed correlations; the prior side is
estimated from a prior sample (see :mod:`bct.prior`).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .hypotheses import Hypothesis, build_transform
from .model import CorrelationSample
from .mvn import conditional_gaussian, mc_orthant_probability

__all__ = [
    "fisher",
    "fisher_inverse",
    "fisher_sample",
    "GaussianApprox",
    "fit_gaussian",
    "posterior_density_at_equalities",
    "posterior_conditional_order_probability",
    "HypothesisEvidence",
    "combine_evidence",
    "complement_evidence",
    "posterior_probabilities",
    "BayesFactorReport",
]


def fisher(rho):
    """Fisher z-transformation atanh(rho); strictly increasing on (-1, 1)."""
    rho = np.asarray(rho, dtype=float)
    if np.any(np.abs(rho) >= 1.0):
        raise ValueError("correlations must lie strictly inside (-1, 1)")
    out = np.arctanh(rho)
    return float(out) if out.ndim == 0 else out


def fisher_inverse(eta):
    """Inverse of :func:`fisher`."""
    out = np.tanh(np.asarray(eta, dtype=float))
    return float(out) if out.ndim == 0 else out


def fisher_sample(sample: CorrelationSample) -> CorrelationSample:
    """Apply the Fisher transformation to every draw of a sample."""
    if sample.fisher_transformed:
        return sample
    return CorrelationSample(
        np.arctanh(sample.draws), provenance=sample.provenance, fisher_transformed=True
    )


@dataclass(frozen=True)
class GaussianApprox:
    """Normal approximation of the transformed correlation posterior."""

    mean: np.ndarray
    cov: np.ndarray
    regularized: bool = False

    @property
    def dim(self) -> int:
        return self.mean.size


def fit_gaussian(sample: CorrelationSample) -> GaussianApprox:
    """Sample mean and covariance of a Fisher-transformed sample.

    Requires at least 10 draws per coordinate.  A covariance that is not
    numerically positive definite gets a small diagonal ridge and is flagged.
    """
    if not sample.fisher_transformed:
        raise ValueError("the sample must be Fisher transformed first")
    draws = sample.draws
    S, L = draws.shape
    if S < 10 * L:
        raise ValueError(f"need at least {10 * L} draws to fit {L} coordinates, got {S}")
    variances = draws.var(axis=0)
    if np.any(variances <= 1e-20):
        dead = int(np.argmin(variances))
        raise ValueError(f"coordinate {dead} of the sample has zero variance")
    mean = draws.mean(axis=0)
    cov = np.atleast_2d(np.cov(draws, rowvar=False))
    regularized = False
    while np.linalg.eigvalsh(cov)[0] <= 1e-12 * max(1.0, float(np.linalg.eigvalsh(cov)[-1])):
        cov = cov + 1e-10 * np.eye(L)
        regularized = True
    return GaussianApprox(mean=mean, cov=cov, regularized=regularized)


def posterior_density_at_equalities(approx: GaussianApprox, h: Hypothesis) -> float:
    """Normal density of the equality coordinates at their constants.

    The equality coordinates R_E eta are normal with mean R_E mu and
    covariance R_E Sigma R_E' under the fitted approximation.
    """
    if not h.fisher_transformed:
        raise ValueError("the hypothesis constants must be Fisher transformed first")
    if h.n_equalities < 1:
        raise ValueError("the hypothesis has no equality constraints")
    mean = h.R_eq @ approx.mean
    cov = np.atleast_2d(h.R_eq @ approx.cov @ h.R_eq.T)
    if np.linalg.matrix_rank(cov) < h.n_equalities:
        raise ValueError("the projected covariance of the equality coordinates is singular")
    return float(stats.multivariate_normal.pdf(h.r_eq, mean=mean, cov=cov))


def posterior_conditional_order_probability(
    approx: GaussianApprox,
    h: Hypothesis,
    rng: np.random.Generator,
    n_draws: int = 100_000,
) -> tuple[float, float]:
    """Probability of the order constraints given the equalities hold.

    The fitted Gaussian is mapped through the basis completion of the
    equality rows, conditioned analytically on the equality coordinates,
    and the orthant probability of the re-expressed inequalities is
    estimated by Monte Carlo.  Returns the estimate and its standard error.
    """
    if not h.fisher_transformed:
        raise ValueError("the hypothesis constants must be Fisher transformed first")
    if h.n_inequalities == 0:
        return 1.0, 0.0
    tr = build_transform(h)
    xi_mean = tr.T @ approx.mean
    xi_cov = tr.T @ approx.cov @ tr.T.T
    cond_mean, cond_cov = conditional_gaussian(xi_mean, xi_cov, h.n_equalities, h.r_eq)
    return mc_orthant_probability(
        cond_mean, cond_cov, tr.bound_free, tr.r_in_adjusted, n_draws, rng
    )


@dataclass(frozen=True)
class HypothesisEvidence:
    """The four Bayes factor components of one hypothesis.

    ``rc_equality``/``rc_order`` are the prior-side (complexity) parts,
    ``rf_equality``/``rf_order`` the posterior-side (fit) parts; components
    of an absent constraint kind equal 1.  ``degenerate`` marks a Bayes
    factor pinned at 0 because the posterior equality density underflowed.
    """

    label: str
    rc_equality: float
    rc_order: float
    rf_equality: float
    rf_order: float
    bayes_factor: float
    degenerate: bool = False
    rc_order_se: float = 0.0
    rf_order_se: float = 0.0

    @property
    def rc(self) -> float:
        return self.rc_equality * self.rc_order

    @property
    def rf(self) -> float:
        return self.rf_equality * self.rf_order


def combine_evidence(
    label: str,
    rc_equality: float,
    rc_order: float,
    rf_equality: float,
    rf_order: float,
    rc_order_se: float = 0.0,
    rf_order_se: float = 0.0,
) -> HypothesisEvidence:
    """Assemble the Bayes factor against the unconstrained hypothesis.

    A vanishing prior component means the prior sample was too small and is
    an error; a vanishing posterior equality density (the data flatly
    contradict the equalities) yields a zero Bayes factor with a flag.
    """
    if rc_equality <= 0.0 or rc_order <= 0.0:
        raise ValueError(
            f"hypothesis {label!r}: a prior component is zero; enlarge the prior sample"
        )
    rc = rc_equality * rc_order
    rf = rf_equality * rf_order
    degenerate = rf_equality == 0.0
    return HypothesisEvidence(
        label=label,
        rc_equality=rc_equality,
        rc_order=rc_order,
        rf_equality=rf_equality,
        rf_order=rf_order,
        bayes_factor=rf / rc,
        degenerate=degenerate,
        rc_order_se=rc_order_se,
        rf_order_se=rf_order_se,
    )


COMPLEMENT_LABEL = "Complement hypothesis*"

NESTED_ORDER_WARNING = (
    "multiple order-constrained hypotheses overlap; the complement hypothesis "
    "should not be used for inference"
)


def complement_evidence(
    hypotheses: tuple[Hypothesis, ...],
    evidences: tuple[HypothesisEvidence, ...],
    prior_sample: CorrelationSample | None = None,
) -> tuple[HypothesisEvidence, tuple[str, ...]]:
    """Evidence for "none of the stated hypotheses".

    Only hypotheses without equality constraints occupy prior mass, so the
    complement's components are one minus the summed order probabilities of
    the pure-order hypotheses; with no pure-order hypothesis every component
    is 1.  Returns the evidence and any warnings raised along the way.
    """
    warnings_out: list[str] = []
    pure = [(h, e) for h, e in zip(hypotheses, evidences) if h.is_pure_order]
    if not pure:
        return (
            HypothesisEvidence(
                label=COMPLEMENT_LABEL,
                rc_equality=1.0,
                rc_order=1.0,
                rf_equality=1.0,
                rf_order=1.0,
                bayes_factor=1.0,
            ),
            (),
        )
    prior_mass = sum(e.rc_order for _, e in pure)
    post_mass = sum(e.rf_order for _, e in pure)
    if prior_mass >= 1.0:
        raise ValueError(
            "the order-constrained hypotheses cover the whole space; their prior "
            "probabilities sum to "
            f"{prior_mass:.4f} and the complement is empty"
        )
    if len(pure) > 1 and prior_sample is not None and _regions_overlap(
        [h for h, _ in pure], prior_sample
    ):
        warnings_out.append(NESTED_ORDER_WARNING)
    rc_order = 1.0 - prior_mass
    rf_order = max(1.0 - post_mass, 0.0)
    return (
        HypothesisEvidence(
            label=COMPLEMENT_LABEL,
            rc_equality=1.0,
            rc_order=rc_order,
            rf_equality=1.0,
            rf_order=rf_order,
            bayes_factor=rf_order / rc_order,
        ),
        tuple(warnings_out),
    )


def _regions_overlap(pure: list[Hypothesis], sample: CorrelationSample) -> bool:
    """True when some prior draw satisfies two order hypotheses at once."""
    from .hypotheses import inequalities_satisfied

    flags = np.column_stack([inequalities_satisfied(h, sample.draws) for h in pure])
    return bool(np.any(flags.sum(axis=1) > 1))


def posterior_probabilities(
    bayes_factors: np.ndarray, prior_probabilities: np.ndarray | None = None
) -> np.ndarray:
    """Normalize Bayes factors (against a common baseline) to probabilities.

    Under equal prior probabilities the pairwise posterior odds equal the
    pairwise Bayes factors.
    """
    b = np.asarray(bayes_factors, dtype=float)
    if prior_probabilities is None:
        prior = np.full(b.size, 1.0 / b.size)
    else:
        prior = np.asarray(prior_probabilities, dtype=float)
        if prior.shape != b.shape:
            raise ValueError("one prior probability per hypothesis is required")
        if np.any(prior <= 0.0) or abs(prior.sum() - 1.0) > 1e-8:
            raise ValueError("prior probabilities must be positive and sum to 1")
    weighted = prior * b
    total = weighted.sum()
    if total <= 0.0:
        raise ValueError("all Bayes factors are zero; probabilities are undefined")
    return weighted / total


@dataclass(frozen=True)
class BayesFactorReport:
    """Everything the output files need for one analysis."""

    evidences: tuple[HypothesisEvidence, ...]
    complement: HypothesisEvidence | None
    probabilities: np.ndarray
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        n = len(self.evidences) + (1 if self.complement is not None else 0)
        if self.probabilities.shape != (n,):
            raise ValueError("one probability per reported hypothesis is required")

    @property
    def all_evidences(self) -> tuple[HypothesisEvidence, ...]:
        if self.complement is None:
            return self.evidences
        return self.evidences + (self.complement,)
