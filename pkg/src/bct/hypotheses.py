"""Constraint coding and compilation of hypotheses on correlations.

A hypothesis consists of equality constraints R_E rho = r_E and inequality
constraints R_I rho > r_I on the stacked correlation vector.  Every
constraint row either compares two correlations or compares one correlation
with a constant; user input uses the six-token coding

    j1 p1 p2 j2 p3 p4

where j2 = 0 selects the constant form (p3 is then the sign, p4 the
constant).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .model import rho_index

__all__ = [
    "ConstraintRow",
    "Hypothesis",
    "HypothesisSet",
    "Transform",
    "parse_constraint_line",
    "format_constraint_line",
    "compile_hypothesis",
    "fisher_transform_constants",
    "build_transform",
    "inequalities_satisfied",
]


@dataclass(frozen=True)
class ConstraintRow:
    """One parsed constraint.

    ``left`` is a (g, p1, p2) correlation reference.  For reference rows
    ``right`` is another (g, p3, p4) triple and ``sign``/``constant`` are
    None; for constant rows ``right`` is None and the row reads
    ``rho > constant`` (sign +1), ``rho < constant`` (sign -1) or, for the
    equality kind, ``rho = constant``.
    """

    kind: str  # "equality" | "inequality"
    left: tuple[int, int, int]
    right: tuple[int, int, int] | None = None
    sign: int | None = None
    constant: float | None = None

    def __post_init__(self):
        if self.kind not in ("equality", "inequality"):
            raise ValueError("kind must be 'equality' or 'inequality'")
        if (self.right is None) == (self.constant is None):
            raise ValueError("exactly one of reference and constant is required")
        if self.constant is not None:
            if self.sign not in (1, -1):
                raise ValueError("sign must be +1 or -1")
            if not -1.0 < self.constant < 1.0:
                raise ValueError(f"constant {self.constant} outside (-1, 1)")


def parse_constraint_line(
    tokens: list[str] | str, kind: str, n_outcomes: int, n_groups: int
) -> ConstraintRow:
    """Parse one six-token constraint line.

    Whether the line is an equality or an inequality is not part of the
    coding; it follows from the declared per-hypothesis constraint counts
    and is passed in as ``kind``.
    """
    if isinstance(tokens, str):
        tokens = tokens.split()
    if len(tokens) != 6:
        raise ValueError(f"constraint line needs 6 tokens, got {len(tokens)}")
    values = [float(t) for t in tokens]
    j1, p1, p2 = (int(v) for v in values[:3])
    for name, v in (("j1", values[0]), ("p1", values[1]), ("p2", values[2])):
        if v != int(v):
            raise ValueError(f"{name} must be an integer, got {v}")
    left = _check_reference(j1, p1, p2, n_outcomes, n_groups)
    if values[3] == 0.0:
        sign = values[4]
        if sign not in (1.0, -1.0):
            raise ValueError(f"sign must be +1 or -1, got {sign}")
        d = values[5]
        if not -1.0 < d < 1.0:
            raise ValueError(f"constant {d} outside (-1, 1)")
        return ConstraintRow(kind, left, sign=int(sign), constant=d)
    j2, p3, p4 = (int(v) for v in values[3:])
    for name, v in (("j2", values[3]), ("p3", values[4]), ("p4", values[5])):
        if v != int(v):
            raise ValueError(f"{name} must be an integer, got {v}")
    right = _check_reference(j2, p3, p4, n_outcomes, n_groups)
    return ConstraintRow(kind, left, right=right)


def _check_reference(g: int, p1: int, p2: int, n_outcomes: int, n_groups: int) -> tuple[int, int, int]:
    if not 1 <= g <= n_groups:
        raise ValueError(f"population index {g} outside 1..{n_groups}")
    for p in (p1, p2):
        if not 1 <= p <= n_outcomes:
            raise ValueError(f"variable index {p} outside 1..{n_outcomes}")
    if p1 == p2:
        raise ValueError("a constraint cannot reference a diagonal element")
    return g, p1, p2


def format_constraint_line(row: ConstraintRow) -> str:
    """Inverse of :func:`parse_constraint_line` (six tokens, one line)."""
    g, p1, p2 = row.left
    if row.right is not None:
        j2, p3, p4 = row.right
        return f"{g} {p1} {p2} {j2} {p3} {p4}"
    return f"{g} {p1} {p2} 0 {row.sign} {row.constant!r}"


@dataclass(frozen=True, eq=False)
class Hypothesis:
    """Compiled constraint matrices over the stacked correlation vector.

    The inequality block is normalized to the form R_I rho > r_I.  When
    ``fisher_transformed`` is set the constants live on the atanh scale.
    """

    R_eq: np.ndarray
    r_eq: np.ndarray
    R_in: np.ndarray
    r_in: np.ndarray
    label: str = ""
    fisher_transformed: bool = False

    @property
    def n_equalities(self) -> int:
        return self.R_eq.shape[0]

    @property
    def n_inequalities(self) -> int:
        return self.R_in.shape[0]

    @property
    def n_parameters(self) -> int:
        return self.R_eq.shape[1]

    @property
    def is_pure_order(self) -> bool:
        return self.n_equalities == 0 and self.n_inequalities > 0

    @property
    def is_unconstrained(self) -> bool:
        return self.n_equalities == 0 and self.n_inequalities == 0


@dataclass(frozen=True)
class HypothesisSet:
    """Ordered collection of hypotheses under simultaneous test."""

    hypotheses: tuple[Hypothesis, ...]
    include_complement: bool = True

    def __post_init__(self):
        if len(self.hypotheses) < 1:
            raise ValueError("at least one hypothesis is required")


def compile_hypothesis(
    rows: list[ConstraintRow],
    n_outcomes: int,
    n_groups: int,
    label: str = "",
) -> Hypothesis:
    """Turn parsed constraint rows into the matrix form.

    Reference rows become (+1, -1) pairs with constant 0; constant rows
    become a single +-1 entry, with inequalities flipped where needed so
    every inequality reads R rho > r.  The equality block must have full
    row rank; a redundant row is reported by its position.
    """
    L = n_groups * n_outcomes * (n_outcomes - 1) // 2
    eq_rows, eq_consts, in_rows, in_consts = [], [], [], []
    for row in rows:
        coeffs = np.zeros(L)
        g, p1, p2 = row.left
        left_idx = rho_index(g, p1, p2, n_outcomes, n_groups)
        if row.right is not None:
            g2, p3, p4 = row.right
            right_idx = rho_index(g2, p3, p4, n_outcomes, n_groups)
            if right_idx == left_idx:
                raise ValueError("constraint compares a correlation with itself")
            coeffs[left_idx] = 1.0
            coeffs[right_idx] = -1.0
            const = 0.0
        elif row.kind == "equality":
            coeffs[left_idx] = 1.0
            const = row.constant
        else:
            coeffs[left_idx] = float(row.sign)
            const = row.sign * row.constant
        if row.kind == "equality":
            eq_rows.append(coeffs)
            eq_consts.append(const)
        else:
            in_rows.append(coeffs)
            in_consts.append(const)

    R_eq = np.array(eq_rows).reshape(len(eq_rows), L)
    R_in = np.array(in_rows).reshape(len(in_rows), L)
    _check_no_duplicates(R_eq, np.array(eq_consts), "equality")
    _check_no_duplicates(R_in, np.array(in_consts), "inequality")
    _check_full_row_rank(R_eq)
    return Hypothesis(
        R_eq=R_eq,
        r_eq=np.array(eq_consts),
        R_in=R_in,
        r_in=np.array(in_consts),
        label=label,
    )


def _check_no_duplicates(R: np.ndarray, r: np.ndarray, what: str) -> None:
    rows = {tuple(np.r_[R[i], r[i]]) for i in range(R.shape[0])}
    if len(rows) != R.shape[0]:
        raise ValueError(f"duplicate {what} constraint rows")


def _check_full_row_rank(R_eq: np.ndarray) -> None:
    rank = 0
    for i in range(R_eq.shape[0]):
        new_rank = np.linalg.matrix_rank(R_eq[: i + 1])
        if new_rank == rank:
            raise ValueError(
                f"equality constraint {i + 1} is redundant given the earlier ones"
            )
        rank = new_rank


def fisher_transform_constants(h: Hypothesis) -> Hypothesis:
    """Map the constraint constants to the atanh scale.

    Constants attached to single-correlation rows become atanh(d); the
    constants of two-correlation rows are 0 and stay 0, which is exact
    because atanh is strictly increasing and odd.
    """
    if h.fisher_transformed:
        return h
    return replace(
        h,
        r_eq=np.arctanh(h.r_eq),
        r_in=np.arctanh(h.r_in),
        fisher_transformed=True,
    )


@dataclass(frozen=True, eq=False)
class Transform:
    """Invertible coordinate change xi = T eta for one hypothesis.

    The first ``n_equalities`` rows of T are the equality rows R_E; the
    remaining rows are standard basis vectors completing a basis, so the
    trailing coordinates xi_I are the free correlations.  The inequality
    block is re-expressed as

        R_I eta = bound_eq xi_E + bound_free xi_I,

    so on the surface xi_E = r_E the constraints read
    ``bound_free xi_I > r_in_adjusted``.
    """

    T: np.ndarray
    n_equalities: int
    free_columns: tuple[int, ...]
    bound_eq: np.ndarray
    bound_free: np.ndarray
    r_in_adjusted: np.ndarray


def build_transform(h: Hypothesis) -> Transform:
    """Complete R_E to an invertible map and re-express the inequalities.

    The completion appends the standard basis vectors of the coordinates
    that are not pivotal in R_E (found by Gaussian elimination), which keeps
    xi_I equal to a subset of the original correlations.
    """
    L = h.n_parameters
    q_e = h.n_equalities
    pivots = _pivot_columns(h.R_eq)
    free = tuple(j for j in range(L) if j not in pivots)
    T = np.zeros((L, L))
    T[:q_e] = h.R_eq
    for k, j in enumerate(free):
        T[q_e + k, j] = 1.0
    det = np.linalg.det(T) if L else 1.0
    if L and abs(det) < 1e-8:
        raise RuntimeError("basis completion failed; equality rows are degenerate")
    if h.n_inequalities:
        M = h.R_in @ np.linalg.inv(T)
        bound_eq = M[:, :q_e]
        bound_free = M[:, q_e:]
        r_adj = h.r_in - bound_eq @ h.r_eq
    else:
        bound_eq = np.zeros((0, q_e))
        bound_free = np.zeros((0, L - q_e))
        r_adj = np.zeros(0)
    return Transform(
        T=T,
        n_equalities=q_e,
        free_columns=free,
        bound_eq=bound_eq,
        bound_free=bound_free,
        r_in_adjusted=r_adj,
    )


def _pivot_columns(R: np.ndarray) -> set[int]:
    """Column indices of the pivots of R under Gaussian elimination."""
    A = R.astype(float).copy()
    n_rows, n_cols = A.shape
    pivots: set[int] = set()
    row = 0
    for col in range(n_cols):
        if row >= n_rows:
            break
        k = row + int(np.argmax(np.abs(A[row:, col])))
        if abs(A[k, col]) < 1e-12:
            continue
        A[[row, k]] = A[[k, row]]
        A[row] = A[row] / A[row, col]
        for i in range(n_rows):
            if i != row and abs(A[i, col]) > 1e-12:
                A[i] -= A[i, col] * A[row]
        pivots.add(col)
        row += 1
    return pivots


def inequalities_satisfied(h: Hypothesis, points: np.ndarray) -> np.ndarray:
    """Boolean vector: which rows of ``points`` satisfy R_I point > r_I."""
    points = np.atleast_2d(points)
    if h.n_inequalities == 0:
        return np.ones(points.shape[0], dtype=bool)
    return np.all(points @ h.R_in.T > h.r_in, axis=1)
