import re

import numpy as np
import pytest

from bct.analysis import EstimatesReport
from bct.bayes import BayesFactorReport, HypothesisEvidence
from bct.fileio import (
    InputError,
    OUTPUT_NAMES,
    format_input_file,
    parse_data_file,
    parse_input_file,
    write_reports,
)

SAMPLE_INPUT = """\
Input 1: model & data
#DV, #covs, intercept, #populations, Ntotal, header
3 2 1 1 50 0

Which DVs are ordinal (0=continuous, 1=ordinal)
0 1 1

Input 2: hypotheses
#hypotheses
2

#equalities, #inequalities per hypothesis
1 1
1 2

Input 3: constraints in hypotheses
Equalities H1; Inequalities H1; Equalities H2; Inequalities H2; etc.
1 2 1 1 3 1
1 3 1 1 3 2

1 3 2 0 1 0
1 3 1 1 3 2
1 2 1 1 3 1

Input 4: implementation details
seed, #draws prior, #draws posterior, #draws per constraint
123 20000 10000 5000
"""


def sample_data_text(rng, n=50, label_column=True):
    """Synthetic data with the sample input's shape: 1 continuous, 2 ordinal."""
    rows = []
    for i in range(n):
        v = rng.normal()
        u1 = 1 + (i % 2)
        u2 = 1 + (i % 6)
        x1 = float(rng.integers(0, 6))
        x2 = rng.normal()
        cells = [f"{v:8.4f}", str(u1), str(u2), f"{x1:.0f}", f"{x2:5.2f}"]
        if label_column:
            cells.append("1")
        rows.append("  ".join(cells))
    return "\n".join(rows) + "\n"


class TestParseInput:
    def test_sample_input(self):
        config = parse_input_file(SAMPLE_INPUT)
        assert config.n_outcomes == 3
        assert config.ordinal == (False, True, True)
        assert config.n_observed_covariates == 2
        assert config.intercept and config.n_covariates == 3
        assert config.n_groups == 1
        assert config.n_total == 50
        assert not config.header
        assert len(config.hypotheses.hypotheses) == 2
        h1, h2 = config.hypotheses.hypotheses
        assert (h1.n_equalities, h1.n_inequalities) == (1, 1)
        assert (h2.n_equalities, h2.n_inequalities) == (1, 2)
        np.testing.assert_array_equal(h1.R_eq, [[1, -1, 0]])
        np.testing.assert_array_equal(h1.R_in, [[0, 1, -1]])
        np.testing.assert_array_equal(h2.R_eq, [[0, 0, 1]])
        np.testing.assert_array_equal(h2.r_eq, [0.0])
        assert (config.seed, config.prior_draws) == (123, 20000)
        assert (config.posterior_draws, config.draws_per_constraint) == (10000, 5000)

    def test_no_hypotheses_is_estimation_only(self):
        text = (
            "2 0 1 1 30 0\n"
            "0 0\n"
            "0\n"
            "7 1000 1000 1000\n"
        )
        config = parse_input_file(text)
        assert config.hypotheses is None

    def test_constraint_count_mismatch(self):
        broken = SAMPLE_INPUT.replace("1 2 1 1 3 1\n1 3 1 1 3 2\n", "1 2 1 1 3 1\n")
        with pytest.raises(InputError):
            parse_input_file(broken)

    def test_extra_line_rejected(self):
        with pytest.raises(InputError, match="extra data"):
            parse_input_file(SAMPLE_INPUT + "\n4 4 4 4\n")

    def test_bad_token_names_line(self):
        broken = SAMPLE_INPUT.replace("1 3 2 0 1 0", "1 3 2 0 one 0")
        with pytest.raises(InputError, match="line 21"):
            parse_input_file(broken)

    def test_out_of_range_constraint_names_line(self):
        broken = SAMPLE_INPUT.replace("1 2 1 1 3 1", "1 4 1 1 3 1")
        with pytest.raises(InputError, match="line 18"):
            parse_input_file(broken)

    def test_print_parse_fixpoint(self):
        config = parse_input_file(SAMPLE_INPUT)
        printed = format_input_file(config)
        again = parse_input_file(printed)
        assert format_input_file(again) == printed
        assert again.constraint_rows == config.constraint_rows
        for field in (
            "n_outcomes",
            "n_observed_covariates",
            "intercept",
            "n_groups",
            "n_total",
            "header",
            "ordinal",
            "seed",
            "prior_draws",
            "posterior_draws",
            "draws_per_constraint",
        ):
            assert getattr(again, field) == getattr(config, field)


class TestParseData:
    def test_sample_row_mapping(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        text = sample_data_text(rng)
        first = text.splitlines()[0].split()
        spec, data = parse_data_file(text, config)
        assert spec.group_sizes == (50,)
        assert spec.levels == (0, 2, 6)
        assert data.continuous[0][0, 0] == pytest.approx(float(first[0]))
        assert tuple(data.ordinal[0][0]) == (int(first[1]), int(first[2]))
        # intercept column appended last
        np.testing.assert_allclose(data.covariates[0][0, :2], [float(first[3]), float(first[4])])
        assert np.all(data.covariates[0][:, 2] == 1.0)

    def test_label_column_optional_for_one_population(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        spec, data = parse_data_file(sample_data_text(rng, label_column=False), config)
        assert spec.group_sizes == (50,)

    def test_header_skips_first_row(self, rng):
        config = parse_input_file(SAMPLE_INPUT.replace("3 2 1 1 50 0", "3 2 1 1 50 1"))
        text = "v u1 u2 x1 x2 g\n" + sample_data_text(rng)
        spec, data = parse_data_file(text, config)
        assert spec.group_sizes == (50,)

    def test_zero_category_rejected(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        text = sample_data_text(rng)
        lines = text.splitlines()
        parts = lines[0].split()
        parts[1] = "0"
        lines[0] = " ".join(parts)
        with pytest.raises(InputError, match="lowest category"):
            parse_data_file("\n".join(lines), config)

    def test_non_integer_ordinal_rejected(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        lines = sample_data_text(rng).splitlines()
        parts = lines[3].split()
        parts[1] = "1.5"
        lines[3] = " ".join(parts)
        with pytest.raises(InputError, match="non-integer"):
            parse_data_file("\n".join(lines), config)

    def test_wrong_column_count(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        lines = sample_data_text(rng).splitlines()
        lines[5] = lines[5] + " 9 9"
        with pytest.raises(InputError, match="columns"):
            parse_data_file("\n".join(lines), config)

    def test_total_mismatch(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        lines = sample_data_text(rng).splitlines()
        with pytest.raises(InputError, match="Ntotal"):
            parse_data_file("\n".join(lines[:-1]), config)

    def test_unknown_population_label(self, rng):
        config = parse_input_file(SAMPLE_INPUT)
        lines = sample_data_text(rng).splitlines()
        lines[0] = lines[0][:-1] + "3"
        with pytest.raises(InputError, match="population label"):
            parse_data_file("\n".join(lines), config)


def _evidence(label, rc, rcE, rcI, rf, rfE, rfI, bf):
    return HypothesisEvidence(
        label=label,
        rc_equality=rcE,
        rc_order=rcI,
        rf_equality=rfE,
        rf_order=rfI,
        bayes_factor=bf,
    )


def appendix_style_report():
    e1 = _evidence("Hypothesis 1", 0.17010, 0.42100, 0.40404, 0.00853, 0.00880, 0.96903, 0.0501)
    e2 = _evidence("Hypothesis 2", 0.00405, 0.64325, 0.00630, 1.56453, 1.89166, 0.82707, 386.3)
    comp = HypothesisEvidence(
        label="Complement hypothesis*",
        rc_equality=1.0,
        rc_order=1.0,
        rf_equality=1.0,
        rf_order=1.0,
        bayes_factor=1.0,
    )
    return BayesFactorReport(
        evidences=(e1, e2),
        complement=comp,
        probabilities=np.array([0.0001, 0.9973, 0.0026]),
    )


def tiny_estimates():
    corr = np.zeros((1, 3, 3, 3))
    base = np.array([[1.0, 0.0, 0.0], [0.712, 1.0, 0.0], [0.094, -0.060, 1.0]])
    for b, shift in enumerate((-0.2, 0.0, 0.2)):
        M = base + shift * (1 - np.eye(3))
        M = np.tril(M) + np.tril(M, -1).T
        np.fill_diagonal(M, 1.0)
        corr[0, b] = M
    coef = np.stack(
        [np.array([[-0.25, -0.36, 0.76]]), np.array([[0.02, -0.02, 1.19]]), np.array([[0.28, 0.33, 1.66]])]
    )[None, :, :, :]
    dev = np.stack([[0.791, 1.0, 1.0], [0.938, 1.0, 1.0], [1.14, 1.0, 1.0]])[None, :, :]
    return EstimatesReport(correlation=corr, coefficients=coef, deviations=dev)


class TestWriters:
    def test_probability_file_matches_published_layout(self, tmp_path):
        paths = write_reports(appendix_style_report(), tiny_estimates(), tmp_path)
        text = (tmp_path / OUTPUT_NAMES[0]).read_text()
        assert text == (
            "Posterior probabilities for the hypotheses\n"
            " \n"
            "Hypothesis  1\n"
            "0.0001\n"
            " \n"
            "Hypothesis  2\n"
            "0.9973\n"
            " \n"
            "Complement hypothesis*\n"
            "0.0026\n"
        )
        assert [p.name for p in paths] == list(OUTPUT_NAMES)

    def test_complexity_file_triples(self, tmp_path):
        write_reports(appendix_style_report(), tiny_estimates(), tmp_path)
        text = (tmp_path / OUTPUT_NAMES[1]).read_text()
        lines = text.splitlines()
        assert lines[0] == "rc      rcE     rcI"
        assert lines[2] == "Hypothesis  1"
        assert lines[3] == "0.17010 0.42100 0.40404"
        assert lines[-2] == "Complement hypothesis*"
        assert lines[-1] == "1.00000 1.00000 1.00000"

    def test_fit_file_triples(self, tmp_path):
        write_reports(appendix_style_report(), tiny_estimates(), tmp_path)
        lines = (tmp_path / OUTPUT_NAMES[2]).read_text().splitlines()
        assert lines[0] == "rf      rfE     rfI"
        assert lines[3] == "0.00853 0.00880 0.96903"
        # leading value is the product of the (full-precision) components
        assert lines[6] == f"{1.89166 * 0.82707:.5f} 1.89166 0.82707"

    def test_estimates_layout(self, tmp_path):
        write_reports(appendix_style_report(), tiny_estimates(), tmp_path)
        lines = (tmp_path / OUTPUT_NAMES[3]).read_text().splitlines()
        assert lines[0] == "Estimates were obtained under the unconstrained model"
        assert "Correlation matrix" in lines
        assert "B-matrix with intercepts and regression coefficients" in lines
        assert "standard deviations" in lines
        assert lines[lines.index("Correlation matrix") + 2] == "Population  1"
        first_tri = lines.index("lower bound of 95") + 1
        assert lines[first_tri] == "  1.000"
        assert re.fullmatch(r"( *-?\d+\.\d{3}){2}", lines[first_tri + 1])
        # fixed ordinal deviations print as 1.000
        sd_start = lines.index("standard deviations")
        sd_rows = [l for l in lines[sd_start:] if re.fullmatch(r"( *-?\d+\.\d{3}){3}", l)]
        assert all(l.split()[1] == "1.000" and l.split()[2] == "1.000" for l in sd_rows)

    def test_written_numbers_reparse(self, tmp_path):
        report = appendix_style_report()
        write_reports(report, tiny_estimates(), tmp_path)
        text = (tmp_path / OUTPUT_NAMES[1]).read_text()
        values = [
            [float(tok) for tok in line.split()]
            for line in text.splitlines()
            if re.fullmatch(r"[\d. -]+", line) and line.strip()
        ]
        np.testing.assert_allclose(values[0], [report.evidences[0].rc, 0.42100, 0.40404], atol=5e-6)

    def test_probabilities_in_range_and_finite(self, tmp_path):
        write_reports(appendix_style_report(), tiny_estimates(), tmp_path)
        text = (tmp_path / OUTPUT_NAMES[0]).read_text()
        probs = [float(line) for line in text.splitlines() if re.fullmatch(r"\d\.\d{4}", line)]
        assert len(probs) == 3
        assert all(0.0 <= p <= 1.0 for p in probs)

    def test_estimation_only_writes_one_file(self, tmp_path):
        paths = write_reports(None, tiny_estimates(), tmp_path)
        assert [p.name for p in paths] == [OUTPUT_NAMES[3]]

    def test_crlf_flag(self, tmp_path):
        write_reports(appendix_style_report(), tiny_estimates(), tmp_path, crlf=True)
        raw = (tmp_path / OUTPUT_NAMES[0]).read_bytes()
        assert b"\r\n" in raw and b"\n" in raw

    def test_unordered_bounds_rejected(self):
        bad = tiny_estimates()
        corr = bad.correlation.copy()
        corr[0, 0, 1, 0] = 0.99  # lower above median
        with pytest.raises(ValueError, match="lower <= median <= upper"):
            EstimatesReport(correlation=corr, coefficients=bad.coefficients, deviations=bad.deviations)
