"""Jointly uniform prior over positive-definite correlation matrices.

Draws use the partial-correlation construction: the partial correlation of a
pair at lag k is sampled as 2 Beta(a_k, a_k) - 1 with a_k = (P + 1 - k) / 2,
which makes the joint density of the full correlation matrix constant over
the positive-definite region.  The prior-side quantities of the Bayes factor
(equality densities and conditional order probabilities) are estimated from
such a sample after the Fisher transformation.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .hypotheses import Hypothesis, build_transform, inequalities_satisfied
from .model import CorrelationSample, ModelSpec, rho_pairs
from .mvn import mc_orthant_probability

__all__ = [
    "EstimationWarning",
    "PriorDensityEstimate",
    "sample_uniform_correlation",
    "sample_uniform_correlations",
    "sample_prior_rho",
    "estimate_volume_rejection",
    "prior_density_at_equalities",
    "prior_conditional_order_probability",
]

#: Minimum prior-sample size accepted by the density estimators.
MIN_DENSITY_SAMPLE = 1000

#: Qualifying-draw count below which a density estimate gets a warning.
LOW_COUNT = 100


class EstimationWarning(UserWarning):
    """A Monte Carlo estimate is based on too little information."""


def sample_uniform_correlations(
    n_outcomes: int, size: int, rng: np.random.Generator
) -> np.ndarray:
    """Draw ``size`` correlation matrices, jointly uniform over the PD region."""
    if n_outcomes < 2:
        raise ValueError("dimension must be at least 2")
    if size < 1:
        raise ValueError("at least one draw is required")
    P = n_outcomes
    R = np.broadcast_to(np.eye(P), (size, P, P)).copy()
    for lag in range(1, P):
        alpha = 0.5 * (P + 1 - lag)
        for i in range(P - lag):
            j = i + lag
            partial = 2.0 * rng.beta(alpha, alpha, size=size) - 1.0
            if lag == 1:
                rho = partial
            else:
                sub = R[:, i + 1 : j, i + 1 : j]
                r1 = R[:, i, i + 1 : j]
                r3 = R[:, j, i + 1 : j]
                sol1 = np.linalg.solve(sub, r1[..., None])[..., 0]
                sol3 = np.linalg.solve(sub, r3[..., None])[..., 0]
                v1 = 1.0 - np.einsum("sm,sm->s", r1, sol1)
                v3 = 1.0 - np.einsum("sm,sm->s", r3, sol3)
                rho = np.einsum("sm,sm->s", r1, sol3) + partial * np.sqrt(
                    np.clip(v1 * v3, 0.0, None)
                )
            R[:, i, j] = rho
            R[:, j, i] = rho
    return R


def sample_uniform_correlation(n_outcomes: int, rng: np.random.Generator) -> np.ndarray:
    """Draw one correlation matrix from the jointly uniform distribution."""
    return sample_uniform_correlations(n_outcomes, 1, rng)[0]


def sample_prior_rho(spec: ModelSpec, size: int, rng: np.random.Generator) -> CorrelationSample:
    """Stacked prior draws of all correlations; populations are independent."""
    if size < 1:
        raise ValueError("at least one draw is required")
    P = spec.n_outcomes
    pairs = [(p1 - 1, p2 - 1) for p1, p2 in rho_pairs(P)]
    blocks = []
    for _ in range(spec.n_groups):
        mats = sample_uniform_correlations(P, size, rng)
        blocks.append(np.column_stack([mats[:, i, j] for i, j in pairs]))
    return CorrelationSample(np.hstack(blocks), provenance="prior")


def estimate_volume_rejection(
    n_outcomes: int, trials: int, rng: np.random.Generator, chunk: int = 200_000
) -> tuple[float, float]:
    """Rejection estimate of the volume of the PD correlation region.

    Samples the off-diagonal entries uniformly on (-1, 1) and multiplies
    the acceptance fraction by the cube volume 2^(P(P-1)/2).  Returns the
    estimate and its Monte Carlo standard error.
    """
    if not 2 <= n_outcomes <= 5:
        raise ValueError("rejection sampling is supported for 2..5 outcomes only")
    if trials < 1:
        raise ValueError("at least one trial is required")
    P = n_outcomes
    pairs = [(p1 - 1, p2 - 1) for p1, p2 in rho_pairs(P)]
    m = len(pairs)
    accepted = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        x = rng.uniform(-1.0, 1.0, size=(n, m))
        mats = np.broadcast_to(np.eye(P), (n, P, P)).copy()
        for k, (i, j) in enumerate(pairs):
            mats[:, i, j] = x[:, k]
            mats[:, j, i] = x[:, k]
        smallest = np.linalg.eigvalsh(mats)[:, 0]
        accepted += int(np.count_nonzero(smallest > 1e-10))
        done += n
    cube = 2.0 ** m
    p_hat = accepted / trials
    return cube * p_hat, cube * float(np.sqrt(p_hat * (1.0 - p_hat) / trials))


@dataclass(frozen=True)
class PriorDensityEstimate:
    """Box estimate of the prior density at the equality constraints."""

    value: float
    se: float
    count: int
    delta: float


def _require_eta_sample(sample: CorrelationSample) -> None:
    if not sample.fisher_transformed:
        raise ValueError("the sample must be Fisher transformed first")
    if sample.size < MIN_DENSITY_SAMPLE:
        raise ValueError(
            f"density estimation needs at least {MIN_DENSITY_SAMPLE} draws, got {sample.size}"
        )


def _equality_box_mask(sample: CorrelationSample, h: Hypothesis, delta: float) -> np.ndarray:
    xi_eq = sample.draws @ h.R_eq.T
    return np.all(np.abs(xi_eq - h.r_eq) < delta / 2.0, axis=1)


def prior_density_at_equalities(
    sample: CorrelationSample, h: Hypothesis, delta: float
) -> PriorDensityEstimate:
    """Density of the transformed equality coordinates at their constants.

    Counts the draws falling in a box of width ``delta`` around the
    (Fisher-transformed) equality constants and divides by the box volume.
    Zero qualifying draws is an error; fewer than 100 emits a warning.
    """
    _require_eta_sample(sample)
    if not h.fisher_transformed:
        raise ValueError("the hypothesis constants must be Fisher transformed first")
    if h.n_equalities < 1:
        raise ValueError("the hypothesis has no equality constraints")
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    mask = _equality_box_mask(sample, h, delta)
    count = int(np.count_nonzero(mask))
    S = sample.size
    if count == 0:
        raise ValueError(
            "no prior draws fall in the equality box; increase the prior sample "
            "size or the box width delta"
        )
    if count < LOW_COUNT:
        warnings.warn(
            f"only {count} prior draws in the equality box; the density estimate "
            "is unstable",
            EstimationWarning,
            stacklevel=2,
        )
    p_hat = count / S
    scale = delta ** (-h.n_equalities)
    value = scale * p_hat
    se = scale * float(np.sqrt(p_hat * (1.0 - p_hat) / S))
    return PriorDensityEstimate(value=value, se=se, count=count, delta=delta)


def prior_conditional_order_probability(
    sample: CorrelationSample,
    h: Hypothesis,
    delta: float,
    rng: np.random.Generator,
    n_draws: int = 100_000,
) -> tuple[float, float]:
    """Prior probability of the order constraints given the equalities.

    Without equality constraints this is the plain fraction of prior draws
    satisfying the inequalities.  Otherwise a normal distribution is fitted
    to the free coordinates of the draws inside the equality box, and the
    orthant probability of the re-expressed inequalities under that normal
    is estimated by Monte Carlo.
    """
    _require_eta_sample(sample)
    if not h.fisher_transformed:
        raise ValueError("the hypothesis constants must be Fisher transformed first")
    if h.n_inequalities == 0:
        return 1.0, 0.0
    if h.n_equalities == 0:
        ok = inequalities_satisfied(h, sample.draws)
        p = float(ok.mean())
        se = float(np.sqrt(max(p * (1.0 - p), 0.0) / sample.size))
        return p, se
    tr = build_transform(h)
    mask = _equality_box_mask(sample, h, delta)
    count = int(np.count_nonzero(mask))
    if count < h.n_inequalities + 2:
        raise ValueError(
            f"only {count} prior draws in the equality box; cannot fit the "
            "conditional normal (need at least q_I + 2)"
        )
    free = sample.draws[np.nonzero(mask)[0]][:, list(tr.free_columns)]
    mean = free.mean(axis=0)
    cov = np.atleast_2d(np.cov(free, rowvar=False))
    return mc_orthant_probability(mean, cov, tr.bound_free, tr.r_in_adjusted, n_draws, rng)
