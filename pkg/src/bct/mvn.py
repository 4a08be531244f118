"""Small multivariate-normal helpers shared by the prior and posterior sides."""

from __future__ import annotations

import numpy as np

__all__ = ["psd_factor", "conditional_gaussian", "mc_orthant_probability"]


def psd_factor(cov: np.ndarray) -> np.ndarray:
    """Lower-triangular-ish factor F with F F' = cov, tolerant of tiny negatives."""
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
        vals = np.clip(vals, 0.0, None)
        return vecs * np.sqrt(vals)


def conditional_gaussian(
    mean: np.ndarray, cov: np.ndarray, n_lead: int, value: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Condition a Gaussian on its first ``n_lead`` coordinates being ``value``.

    Returns the mean and covariance of the trailing block (Schur complement).
    """
    mean = np.asarray(mean, dtype=float)
    cov = np.atleast_2d(np.asarray(cov, dtype=float))
    a = slice(0, n_lead)
    b = slice(n_lead, mean.size)
    cov_aa = cov[a, a]
    if n_lead and np.linalg.matrix_rank(cov_aa) < n_lead:
        raise ValueError("cannot condition on a singular block")
    sol = np.linalg.solve(cov_aa, cov[a, b])
    cond_mean = mean[b] + sol.T @ (value - mean[a])
    cond_cov = cov[b, b] - cov[b, a] @ sol
    cond_cov = (cond_cov + cond_cov.T) / 2.0
    return cond_mean, cond_cov


def mc_orthant_probability(
    mean: np.ndarray,
    cov: np.ndarray,
    R: np.ndarray,
    r: np.ndarray,
    n_draws: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo estimate of Pr(R x > r) for x ~ N(mean, cov), with its SE."""
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if R.shape[0] == 0:
        return 1.0, 0.0
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    factor = psd_factor(cov)
    noise = rng.standard_normal((n_draws, mean.size))
    draws = mean + noise @ factor.T
    ok = np.all(draws @ R.T > np.asarray(r, dtype=float), axis=1)
    p = float(ok.mean())
    se = float(np.sqrt(max(p * (1.0 - p), 0.0) / n_draws))
    return p, se
