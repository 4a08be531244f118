"""Core types for the generalized multivariate probit model.

Outcomes are a mix of continuous and ordinal variables observed in one or
more independent populations.  For each population g the joint distribution
of the continuous outcomes and the latent scores behind the ordinal outcomes
is normal with mean B_g'x and covariance

    Sigma_g = diag(s_g) C_g diag(s_g),

where C_g is a correlation matrix and s_g carries the error standard
deviations of the continuous outcomes (entries of ordinal outcomes are fixed
to 1 for identification).  All hypotheses are formulated on the stacked
vector of the correlations of C_1, ..., C_G.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModelSpec",
    "Dataset",
    "ParameterState",
    "CorrelationSample",
    "rho_pairs",
    "rho_index",
    "rho_index_inverse",
    "rho_labels",
    "correlations_to_vector",
    "vector_to_correlations",
    "assemble_covariance",
    "decompose_covariance",
    "equicorrelation_determinant",
    "is_positive_definite",
]

#: Smallest eigenvalue that still counts as positive definite.
PD_TOL = 1e-10


@dataclass(frozen=True)
class ModelSpec:
    """Dimensions and measurement levels of a model.

    Parameters
    ----------
    ordinal : tuple of bool
        Measurement level per dependent variable, in the order the variables
        appear in the data file (False = continuous, True = ordinal).
    levels : tuple of int
        Number of categories K_p per dependent variable; entries of
        continuous variables are 0.
    n_covariates : int
        Number of columns of the design matrix, including the intercept
        column when one is requested.
    group_sizes : tuple of int
        Sample size n_g of every population.
    """

    ordinal: tuple[bool, ...]
    levels: tuple[int, ...]
    n_covariates: int
    group_sizes: tuple[int, ...]

    def __post_init__(self):
        P = len(self.ordinal)
        if P < 2:
            raise ValueError("at least two dependent variables are required")
        if len(self.levels) != P:
            raise ValueError("levels must give one entry per dependent variable")
        for p, (is_ord, k) in enumerate(zip(self.ordinal, self.levels), start=1):
            if is_ord and k < 2:
                raise ValueError(f"ordinal variable {p} needs at least 2 categories")
            if not is_ord and k != 0:
                raise ValueError(f"continuous variable {p} must have level count 0")
        if self.n_covariates < 0:
            raise ValueError("covariate count cannot be negative")
        if len(self.group_sizes) < 1:
            raise ValueError("at least one population is required")
        floor = P + self.n_covariates + 2
        for g, n in enumerate(self.group_sizes, start=1):
            if n < floor:
                raise ValueError(
                    f"population {g} has n={n}; at least P + Q + 2 = {floor} "
                    "observations are required for the covariance update"
                )

    @property
    def n_outcomes(self) -> int:
        return len(self.ordinal)

    @property
    def n_continuous(self) -> int:
        return sum(not o for o in self.ordinal)

    @property
    def n_ordinal(self) -> int:
        return sum(self.ordinal)

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def n_correlations(self) -> int:
        """Length L of the stacked correlation vector over all populations."""
        P = self.n_outcomes
        return self.n_groups * P * (P - 1) // 2

    @property
    def continuous_positions(self) -> tuple[int, ...]:
        return tuple(p for p, o in enumerate(self.ordinal) if not o)

    @property
    def ordinal_positions(self) -> tuple[int, ...]:
        return tuple(p for p, o in enumerate(self.ordinal) if o)


def _full_column_rank(x: np.ndarray) -> bool:
    return x.shape[1] == 0 or np.linalg.matrix_rank(x) == x.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Observed data, split per population.

    ``continuous[g]`` is n_g x P1 (continuous outcomes in declaration order),
    ``ordinal[g]`` is n_g x P2 with integer categories coded 1..K_p, and
    ``covariates[g]`` is the n_g x Q design matrix (intercept column
    included when requested).
    """

    spec: ModelSpec
    continuous: tuple[np.ndarray, ...]
    ordinal: tuple[np.ndarray, ...]
    covariates: tuple[np.ndarray, ...]

    def __post_init__(self):
        spec = self.spec
        if not (len(self.continuous) == len(self.ordinal) == len(self.covariates) == spec.n_groups):
            raise ValueError("one block of each kind is required per population")
        for g in range(spec.n_groups):
            n = spec.group_sizes[g]
            v, u, x = self.continuous[g], self.ordinal[g], self.covariates[g]
            if v.shape != (n, spec.n_continuous):
                raise ValueError(f"population {g + 1}: continuous block has shape {v.shape}")
            if u.shape != (n, spec.n_ordinal):
                raise ValueError(f"population {g + 1}: ordinal block has shape {u.shape}")
            if x.shape != (n, spec.n_covariates):
                raise ValueError(f"population {g + 1}: covariate block has shape {x.shape}")
            if not np.all(np.isfinite(v)) or not np.all(np.isfinite(x)):
                raise ValueError(f"population {g + 1}: non-finite values in the data")
            if not _full_column_rank(x):
                raise ValueError(f"population {g + 1}: covariate matrix is rank deficient")
            for j, p in enumerate(spec.ordinal_positions):
                k_p = spec.levels[p]
                col = u[:, j]
                if col.min(initial=1) < 1 or col.max(initial=1) > k_p:
                    raise ValueError(
                        f"population {g + 1}: ordinal variable {p + 1} has categories "
                        f"outside 1..{k_p}"
                    )
                seen = set(np.unique(col).tolist())
                missing = sorted(set(range(1, k_p + 1)) - seen)
                if missing:
                    raise ValueError(
                        f"population {g + 1}: ordinal variable {p + 1} never takes "
                        f"category {missing[0]}; thresholds would be unidentified"
                    )

    def outcome_matrix(self, g: int) -> np.ndarray:
        """n_g x P matrix in declaration order; ordinal entries are NaN."""
        spec = self.spec
        out = np.full((spec.group_sizes[g], spec.n_outcomes), np.nan)
        out[:, list(spec.continuous_positions)] = self.continuous[g]
        return out


@dataclass(frozen=True)
class ParameterState:
    """One snapshot of all model parameters (used for diagnostics).

    ``coefficients[g]`` is Q x P, ``sigma[g]`` holds the error standard
    deviations of the continuous outcomes, ``correlation[g]`` is the P x P
    correlation matrix, ``thresholds[g][j]`` is the full cut-point vector of
    the j-th ordinal outcome (including -inf, 0, ..., +inf) and
    ``latent[g]`` is the n_g x P2 matrix of latent scores.
    """

    coefficients: tuple[np.ndarray, ...]
    sigma: tuple[np.ndarray, ...]
    correlation: tuple[np.ndarray, ...]
    thresholds: tuple[tuple[np.ndarray, ...], ...]
    latent: tuple[np.ndarray, ...]

    def validate(self, spec: ModelSpec, data: Dataset) -> None:
        for g in range(spec.n_groups):
            C = self.correlation[g]
            if not is_positive_definite(C):
                raise ValueError(f"population {g + 1}: correlation matrix is not PD")
            if np.any(np.abs(np.diag(C) - 1.0) > 1e-12):
                raise ValueError(f"population {g + 1}: correlation diagonal is not 1")
            if np.any(self.sigma[g] <= 0.0):
                raise ValueError(f"population {g + 1}: non-positive standard deviation")
            for j, p in enumerate(spec.ordinal_positions):
                gam = self.thresholds[g][j]
                if gam[0] != -np.inf or gam[-1] != np.inf or gam[1] != 0.0:
                    raise ValueError("thresholds must run -inf, 0, ..., +inf")
                if np.any(np.diff(gam) <= 0.0):
                    raise ValueError("thresholds must be strictly increasing")
                cats = data.ordinal[g][:, j]
                z = self.latent[g][:, j]
                lo, hi = gam[cats - 1], gam[cats]
                if np.any(z <= lo) or np.any(z > hi):
                    raise ValueError("a latent score lies outside its category interval")


@dataclass(frozen=True)
class CorrelationSample:
    """Draws of the stacked correlation vector.

    ``draws`` is S x L; ``provenance`` records whether the draws came from
    the prior or from the posterior sampler; ``fisher_transformed`` marks
    whether the values are on the atanh scale.
    """

    draws: np.ndarray
    provenance: str
    fisher_transformed: bool = False

    def __post_init__(self):
        if self.provenance not in ("prior", "posterior"):
            raise ValueError("provenance must be 'prior' or 'posterior'")
        if self.draws.ndim != 2 or self.draws.shape[0] < 1:
            raise ValueError("draws must be a non-empty S x L matrix")

    @property
    def size(self) -> int:
        return self.draws.shape[0]


# ---------------------------------------------------------------------------
# Indexing of the stacked correlation vector
# ---------------------------------------------------------------------------

def rho_pairs(n_outcomes: int) -> list[tuple[int, int]]:
    """Lower-triangle pairs (p1, p2), p1 > p2, in row-major order, 1-based.

    For P=3 the order is (2,1), (3,1), (3,2); this fixes the layout of the
    per-population correlation vector.
    """
    return [(p1, p2) for p1 in range(2, n_outcomes + 1) for p2 in range(1, p1)]


def rho_index(g: int, p1: int, p2: int, n_outcomes: int, n_groups: int) -> int:
    """Position of correlation (g; p1, p2) in the stacked vector (0-based).

    Populations are stacked first (population-major), and within a
    population the lower triangle is laid out row by row.  Arguments are
    1-based; (p1, p2) may be given in either order.
    """
    if not 1 <= g <= n_groups:
        raise ValueError(f"population index {g} outside 1..{n_groups}")
    if not (1 <= p1 <= n_outcomes and 1 <= p2 <= n_outcomes):
        raise ValueError(f"variable index outside 1..{n_outcomes}")
    if p1 == p2:
        raise ValueError("diagonal is not a free parameter")
    if p1 < p2:
        p1, p2 = p2, p1
    per_group = n_outcomes * (n_outcomes - 1) // 2
    return (g - 1) * per_group + (p1 - 1) * (p1 - 2) // 2 + (p2 - 1)


def rho_index_inverse(index: int, n_outcomes: int, n_groups: int) -> tuple[int, int, int]:
    """Inverse of :func:`rho_index`: position -> (g, p1, p2), 1-based."""
    per_group = n_outcomes * (n_outcomes - 1) // 2
    if not 0 <= index < per_group * n_groups:
        raise ValueError(f"index {index} outside the stacked vector")
    g, local = divmod(index, per_group)
    for p1, p2 in rho_pairs(n_outcomes):
        if (p1 - 1) * (p1 - 2) // 2 + (p2 - 1) == local:
            return g + 1, p1, p2
    raise AssertionError("unreachable")


def rho_labels(n_outcomes: int, n_groups: int) -> list[str]:
    """Human-readable labels, e.g. ``rho(1;2,1)``, in stacked order."""
    return [
        f"rho({g};{p1},{p2})"
        for g in range(1, n_groups + 1)
        for p1, p2 in rho_pairs(n_outcomes)
    ]


def correlations_to_vector(matrices: list[np.ndarray] | tuple[np.ndarray, ...]) -> np.ndarray:
    """Stack the lower triangles of per-population correlation matrices."""
    parts = []
    for C in matrices:
        P = C.shape[0]
        parts.append(np.array([C[p1 - 1, p2 - 1] for p1, p2 in rho_pairs(P)]))
    return np.concatenate(parts)


def vector_to_correlations(rho: np.ndarray, n_outcomes: int, n_groups: int) -> list[np.ndarray]:
    """Rebuild per-population correlation matrices from the stacked vector."""
    per_group = n_outcomes * (n_outcomes - 1) // 2
    rho = np.asarray(rho, dtype=float)
    if rho.shape != (per_group * n_groups,):
        raise ValueError("stacked vector has the wrong length")
    out = []
    for g in range(n_groups):
        C = np.eye(n_outcomes)
        for k, (p1, p2) in enumerate(rho_pairs(n_outcomes)):
            C[p1 - 1, p2 - 1] = C[p2 - 1, p1 - 1] = rho[g * per_group + k]
        out.append(C)
    return out


# ---------------------------------------------------------------------------
# Covariance utilities
# ---------------------------------------------------------------------------

def _scale_vector(sigma: np.ndarray, n_outcomes: int, ordinal: tuple[bool, ...] | None) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=float).reshape(-1)
    if np.any(sigma <= 0.0):
        raise ValueError("standard deviations must be strictly positive")
    d = np.ones(n_outcomes)
    if ordinal is None:
        if sigma.size > n_outcomes:
            raise ValueError("more standard deviations than outcomes")
        d[: sigma.size] = sigma
    else:
        positions = [p for p, o in enumerate(ordinal) if not o]
        if sigma.size != len(positions):
            raise ValueError("one standard deviation per continuous outcome is required")
        d[positions] = sigma
    return d


def assemble_covariance(
    sigma: np.ndarray, C: np.ndarray, ordinal: tuple[bool, ...] | None = None
) -> np.ndarray:
    """Build Sigma = diag(s) C diag(s) with unit entries at ordinal positions.

    Without ``ordinal`` the standard deviations apply to the leading
    outcomes (continuous-first layout); with a mask they are placed at the
    continuous positions.
    """
    C = np.asarray(C, dtype=float)
    if not is_positive_definite(C):
        raise ValueError("correlation matrix is not positive definite")
    d = _scale_vector(sigma, C.shape[0], ordinal)
    return C * np.outer(d, d)


def decompose_covariance(Sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Split a covariance matrix into standard deviations and correlations.

    Positive definiteness is judged relative to the matrix scale, so
    covariances close to singular (legitimate near-boundary states) pass as
    long as no eigenvalue is negative beyond rounding noise.
    """
    Sigma = np.asarray(Sigma, dtype=float)
    if Sigma.ndim != 2 or Sigma.shape[0] != Sigma.shape[1]:
        raise ValueError("a square matrix is required")
    if not np.allclose(Sigma, Sigma.T, atol=1e-8):
        raise ValueError("matrix is not symmetric")
    eigs = np.linalg.eigvalsh(Sigma)
    if eigs[0] <= 1e-14 * max(eigs[-1], 0.0):
        raise ValueError("covariance matrix is not positive definite")
    d = np.sqrt(np.diag(Sigma))
    C = Sigma / np.outer(d, d)
    np.fill_diagonal(C, 1.0)
    return d, C


def equicorrelation_determinant(n_outcomes: int, rho: float) -> float:
    """Determinant of the P x P matrix with a common off-diagonal value.

    Closed form ((P-1) rho + 1)(1 - rho)^(P-1); the matrix is positive
    definite exactly for rho in (-1/(P-1), 1), so values outside the closed
    interval are rejected.
    """
    if n_outcomes < 2:
        raise ValueError("dimension must be at least 2")
    lo = -1.0 / (n_outcomes - 1)
    if not lo <= rho <= 1.0:
        raise ValueError(f"common correlation {rho} outside [{lo}, 1]")
    return ((n_outcomes - 1) * rho + 1.0) * (1.0 - rho) ** (n_outcomes - 1)


def is_positive_definite(M: np.ndarray, tol: float = PD_TOL) -> bool:
    """True when the symmetric matrix has smallest eigenvalue above ``tol``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("a square matrix is required")
    if not np.allclose(M, M.T, atol=1e-8):
        raise ValueError("matrix is not symmetric")
    return float(np.linalg.eigvalsh(M)[0]) > tol
