"""Readers and writers for the program's text file interfaces.

The input file carries four blocks (model & data line, hypothesis counts,
constraint lines, implementation details); the data file is whitespace
separated with the dependent variables first, then the covariates, then an
optional population label.  Results are written to four reports:
``BCT_output.txt`` (posterior probabilities), ``BCT_output_relComp.txt`` and
``BCT_output_relFit.txt`` (per-hypothesis complexity/fit triples) and
``BCT_estimates.txt`` (bounds and medians of all parameters).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .analysis import EstimatesReport
from .bayes import BayesFactorReport
from .hypotheses import (
    ConstraintRow,
    Hypothesis,
    HypothesisSet,
    compile_hypothesis,
    format_constraint_line,
    parse_constraint_line,
)
from .model import Dataset, ModelSpec

__all__ = [
    "InputError",
    "RunConfig",
    "parse_input_file",
    "format_input_file",
    "parse_data_file",
    "write_reports",
    "OUTPUT_NAMES",
]

OUTPUT_NAMES = (
    "BCT_output.txt",
    "BCT_output_relComp.txt",
    "BCT_output_relFit.txt",
    "BCT_estimates.txt",
)


class InputError(ValueError):
    """A problem in an input or data file, tagged with its line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


@dataclass(frozen=True)
class RunConfig:
    """Everything the input file specifies about a run."""

    n_outcomes: int
    n_observed_covariates: int
    intercept: bool
    n_groups: int
    n_total: int
    header: bool
    ordinal: tuple[bool, ...]
    constraint_rows: tuple[tuple[ConstraintRow, ...], ...]
    hypotheses: HypothesisSet | None
    seed: int
    prior_draws: int
    posterior_draws: int
    draws_per_constraint: int

    @property
    def n_covariates(self) -> int:
        return self.n_observed_covariates + int(self.intercept)


def _numeric_lines(text: str) -> list[tuple[int, list[float]]]:
    """(line number, values) for every data line; label lines are skipped.

    A line counts as data when its first token parses as a number; a
    non-numeric token after a numeric first token is an error.
    """
    out = []
    for number, raw in enumerate(text.splitlines(), start=1):
        tokens = raw.split()
        if not tokens:
            continue
        try:
            first = float(tokens[0])
        except ValueError:
            continue
        values = [first]
        for tok in tokens[1:]:
            try:
                values.append(float(tok))
            except ValueError:
                raise InputError(f"unknown token {tok!r}", number) from None
        out.append((number, values))
    return out


def _as_int(value: float, what: str, line: int) -> int:
    if value != int(value):
        raise InputError(f"{what} must be an integer, got {value}", line)
    return int(value)


def parse_input_file(text: str) -> RunConfig:
    """Parse the four input blocks; every complaint names its line."""
    lines = _numeric_lines(text)
    cursor = 0

    def take(expected: int, what: str) -> tuple[int, list[float]]:
        nonlocal cursor
        if cursor >= len(lines):
            raise InputError(f"missing {what} line at end of input")
        number, values = lines[cursor]
        cursor += 1
        if len(values) != expected:
            raise InputError(f"{what} line needs {expected} values, got {len(values)}", number)
        return number, values

    number, values = take(6, "model")
    n_dv = _as_int(values[0], "#DV", number)
    n_cov = _as_int(values[1], "#covs", number)
    intercept = _as_int(values[2], "intercept flag", number)
    n_groups = _as_int(values[3], "#populations", number)
    n_total = _as_int(values[4], "Ntotal", number)
    header = _as_int(values[5], "header flag", number)
    if n_dv < 2:
        raise InputError("at least 2 dependent variables are required", number)
    if n_cov < 0 or n_groups < 1 or n_total < 1:
        raise InputError("counts must be positive", number)
    if intercept not in (0, 1) or header not in (0, 1):
        raise InputError("intercept and header flags must be 0 or 1", number)

    number, values = take(n_dv, "measurement level")
    ordinal = []
    for v in values:
        flag = _as_int(v, "measurement level", number)
        if flag not in (0, 1):
            raise InputError("measurement levels must be 0 (continuous) or 1 (ordinal)", number)
        ordinal.append(bool(flag))

    number, values = take(1, "#hypotheses")
    n_hyp = _as_int(values[0], "#hypotheses", number)
    if n_hyp < 0:
        raise InputError("#hypotheses cannot be negative", number)

    counts = []
    for t in range(n_hyp):
        number, values = take(2, f"constraint count (hypothesis {t + 1})")
        q_eq = _as_int(values[0], "#equalities", number)
        q_in = _as_int(values[1], "#inequalities", number)
        if q_eq < 0 or q_in < 0:
            raise InputError("constraint counts cannot be negative", number)
        counts.append((q_eq, q_in))

    all_rows: list[tuple[ConstraintRow, ...]] = []
    hypotheses: list[Hypothesis] = []
    for t, (q_eq, q_in) in enumerate(counts):
        rows = []
        for kind, q in (("equality", q_eq), ("inequality", q_in)):
            for _ in range(q):
                number, values = take(6, f"constraint (hypothesis {t + 1})")
                try:
                    rows.append(
                        parse_constraint_line(
                            [repr(v) for v in values], kind, n_dv, n_groups
                        )
                    )
                except ValueError as exc:
                    raise InputError(str(exc), number) from None
        all_rows.append(tuple(rows))
        try:
            hypotheses.append(
                compile_hypothesis(rows, n_dv, n_groups, label=f"Hypothesis {t + 1}")
            )
        except ValueError as exc:
            raise InputError(f"hypothesis {t + 1}: {exc}") from None

    number, values = take(4, "implementation details")
    seed = _as_int(values[0], "seed", number)
    prior_draws = _as_int(values[1], "#draws prior", number)
    posterior_draws = _as_int(values[2], "#draws posterior", number)
    per_constraint = _as_int(values[3], "#draws per constraint", number)
    for name, v in (
        ("#draws prior", prior_draws),
        ("#draws posterior", posterior_draws),
        ("#draws per constraint", per_constraint),
    ):
        if v < 1:
            raise InputError(f"{name} must be positive", number)

    if cursor < len(lines):
        raise InputError("unexpected extra data", lines[cursor][0])

    return RunConfig(
        n_outcomes=n_dv,
        n_observed_covariates=n_cov,
        intercept=bool(intercept),
        n_groups=n_groups,
        n_total=n_total,
        header=bool(header),
        ordinal=tuple(ordinal),
        constraint_rows=tuple(all_rows),
        hypotheses=HypothesisSet(tuple(hypotheses)) if hypotheses else None,
        seed=seed,
        prior_draws=prior_draws,
        posterior_draws=posterior_draws,
        draws_per_constraint=per_constraint,
    )


def format_input_file(config: RunConfig) -> str:
    """Canonical input file text for a configuration (inverse of parsing)."""
    lines = [
        "Input 1: model & data",
        "#DV, #covs, intercept, #populations, Ntotal, header",
        f"{config.n_outcomes} {config.n_observed_covariates} {int(config.intercept)} "
        f"{config.n_groups} {config.n_total} {int(config.header)}",
        "",
        "Which DVs are ordinal (0=continuous, 1=ordinal)",
        " ".join(str(int(o)) for o in config.ordinal),
        "",
        "Input 2: hypotheses",
        "#hypotheses",
        str(len(config.constraint_rows)),
        "",
        "#equalities, #inequalities per hypothesis",
    ]
    for rows in config.constraint_rows:
        q_eq = sum(r.kind == "equality" for r in rows)
        lines.append(f"{q_eq} {len(rows) - q_eq}")
    lines += ["", "Input 3: constraints in hypotheses"]
    for rows in config.constraint_rows:
        lines.extend(format_constraint_line(r) for r in rows)
        lines.append("")
    lines += [
        "Input 4: implementation details",
        "seed, #draws prior, #draws posterior, #draws per constraint",
        f"{config.seed} {config.prior_draws} {config.posterior_draws} "
        f"{config.draws_per_constraint}",
    ]
    return "\n".join(lines) + "\n"


def parse_data_file(text: str, config: RunConfig) -> tuple[ModelSpec, Dataset]:
    """Parse a data file against a run configuration.

    Columns run: dependent variables (declared order), covariates, then the
    population label; the label may be omitted when there is only one
    population.  Ordinal categories must be coded 1, 2, ... per variable.
    """
    raw_lines = text.splitlines()
    start = 1 if config.header else 0
    P, C, G = config.n_outcomes, config.n_observed_covariates, config.n_groups
    rows: list[tuple[int, list[float]]] = []
    for number, raw in enumerate(raw_lines[start:], start=start + 1):
        if not raw.strip():
            continue
        try:
            values = [float(tok) for tok in raw.split()]
        except ValueError as exc:
            raise InputError(f"non-numeric entry ({exc})", number) from None
        rows.append((number, values))
    if len(rows) != config.n_total:
        raise InputError(
            f"data file has {len(rows)} observations but the input file declares "
            f"Ntotal={config.n_total}"
        )
    expected = P + C
    by_group: dict[int, list[list[float]]] = {g: [] for g in range(1, G + 1)}
    for number, values in rows:
        if len(values) == expected and G == 1:
            label = 1
        elif len(values) == expected + 1:
            label = values[-1]
            if label != int(label) or int(label) not in by_group:
                raise InputError(f"unknown population label {label}", number)
            label = int(label)
            values = values[:-1]
        else:
            raise InputError(
                f"expected {expected}{' or ' + str(expected + 1) if G == 1 else ' + 1 label'}"
                f" columns, got {len(values)}",
                number,
            )
        for j, is_ord in enumerate(config.ordinal):
            if is_ord:
                v = values[j]
                if v != int(v):
                    raise InputError(
                        f"ordinal variable {j + 1} has non-integer value {v}", number
                    )
                if v < 1:
                    raise InputError(
                        f"ordinal variable {j + 1} has category {int(v)}; "
                        "the lowest category must be 1",
                        number,
                    )
        by_group[label].append(values)

    for g in range(1, G + 1):
        if not by_group[g]:
            raise InputError(f"population {g} has no observations")

    ord_cols = [j for j, o in enumerate(config.ordinal) if o]
    cont_cols = [j for j, o in enumerate(config.ordinal) if not o]
    levels = [0] * P
    for j in ord_cols:
        levels[j] = int(
            max(values[j] for g in by_group for values in by_group[g])
        )
    spec = ModelSpec(
        ordinal=config.ordinal,
        levels=tuple(levels),
        n_covariates=config.n_covariates,
        group_sizes=tuple(len(by_group[g]) for g in range(1, G + 1)),
    )
    continuous, ordinal, covariates = [], [], []
    for g in range(1, G + 1):
        block = np.array(by_group[g], dtype=float).reshape(len(by_group[g]), expected)
        continuous.append(block[:, cont_cols])
        ordinal.append(block[:, ord_cols].astype(int))
        X = block[:, P:]
        if config.intercept:
            X = np.column_stack([X, np.ones(block.shape[0])])
        covariates.append(X)
    dataset = Dataset(
        spec=spec,
        continuous=tuple(continuous),
        ordinal=tuple(ordinal),
        covariates=tuple(covariates),
    )
    return spec, dataset


# ---------------------------------------------------------------------------
# Report writers
# ---------------------------------------------------------------------------

SEP = " "  # blank-looking separator line used by all reports


def _hypothesis_labels(n: int) -> list[str]:
    return [f"Hypothesis {t:2d}" for t in range(1, n + 1)]


def _probability_text(report: BayesFactorReport) -> str:
    lines = ["Posterior probabilities for the hypotheses"]
    labels = _hypothesis_labels(len(report.evidences))
    if report.complement is not None:
        labels.append(report.complement.label)
    for label, prob in zip(labels, report.probabilities):
        lines += [SEP, label, f"{prob:.4f}"]
    return "\n".join(lines) + "\n"


def _triple_text(report: BayesFactorReport, side: str) -> str:
    header = {"rc": ["rc", "rcE", "rcI"], "rf": ["rf", "rfE", "rfI"]}[side]
    lines = [f"{header[0]:<8}{header[1]:<8}{header[2]}"]
    labels = _hypothesis_labels(len(report.evidences))
    rows = list(report.evidences)
    if report.complement is not None:
        labels.append(report.complement.label)
        rows.append(report.complement)
    for label, ev in zip(labels, rows):
        if side == "rc":
            triple = (ev.rc, ev.rc_equality, ev.rc_order)
        else:
            triple = (ev.rf, ev.rf_equality, ev.rf_order)
        lines += [SEP, label, " ".join(f"{v:.5f}" for v in triple)]
    return "\n".join(lines) + "\n"


def _matrix_rows(M: np.ndarray, lower_triangle: bool = False) -> list[str]:
    rows = []
    for i in range(M.shape[0]):
        stop = i + 1 if lower_triangle else M.shape[1]
        rows.append(" ".join(f"{v:7.3f}" for v in M[i, :stop]))
    return rows


def _estimates_text(estimates: EstimatesReport) -> str:
    bound_labels = ("lower bound of 95", "median", "upper bound of 95")
    G = estimates.correlation.shape[0]
    lines = ["Estimates were obtained under the unconstrained model", SEP]

    def section(title: str, blocks, lower_triangle: bool):
        lines.append(title)
        for g in range(G):
            lines.extend([SEP, f"Population {g + 1:2d}"])
            for b, bound in enumerate(bound_labels):
                lines.extend([SEP, bound])
                lines.extend(_matrix_rows(np.atleast_2d(blocks[g][b]), lower_triangle))

    section("Correlation matrix", estimates.correlation, lower_triangle=True)
    lines += [SEP, SEP]
    section(
        "B-matrix with intercepts and regression coefficients",
        estimates.coefficients,
        lower_triangle=False,
    )
    lines += [SEP, SEP]
    section("standard deviations", estimates.deviations[:, :, None, :], lower_triangle=False)
    return "\n".join(lines) + "\n"


def write_reports(
    report: BayesFactorReport | None,
    estimates: EstimatesReport,
    outdir: str | Path,
    crlf: bool = False,
) -> list[Path]:
    """Write the output reports; estimation-only runs emit just the estimates."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    texts: list[tuple[str, str]] = []
    if report is not None:
        texts += [
            (OUTPUT_NAMES[0], _probability_text(report)),
            (OUTPUT_NAMES[1], _triple_text(report, "rc")),
            (OUTPUT_NAMES[2], _triple_text(report, "rf")),
        ]
    texts.append((OUTPUT_NAMES[3], _estimates_text(estimates)))
    paths = []
    for name, text in texts:
        if crlf:
            text = text.replace("\n", "\r\n")
        path = outdir / name
        path.write_text(text, encoding="utf-8", newline="")
        paths.append(path)
    return paths
