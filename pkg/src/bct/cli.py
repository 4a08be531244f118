"""Command-line entry point.

Reads the input and data files, runs the sampler and the prior estimators,
and writes the four report files.  Progress and per-chain summaries go to
standard error; a failure prints a single-line diagnostic and exits with a
nonzero status (2 for missing files, 1 for anything else).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .analysis import AnalysisSettings, analyse
from .fileio import InputError, parse_data_file, parse_input_file, write_reports

__all__ = ["main"]


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bct",
        description=(
            "Bayes factors and posterior probabilities for hypotheses with "
            "equality and order constraints on measures of association."
        ),
    )
    parser.add_argument("--input", default="BCT_input.txt", help="input file path")
    parser.add_argument("--data", default="data.txt", help="data file path")
    parser.add_argument("--outdir", default=".", help="directory for the report files")
    parser.add_argument("--chains", type=int, default=1, help="number of pooled chains")
    parser.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser.add_argument(
        "--crlf", action="store_true", help="write reports with CRLF line endings"
    )
    return parser


def _progress_printer():
    milestones = {"last": -1}

    def update(done: int, total: int) -> None:
        percent = (100 * done) // total
        if percent >= milestones["last"] + 10:
            milestones["last"] = percent
            print(f"sampling: {percent:3d}%", file=sys.stderr)

    return update


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        input_text = Path(args.input).read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"error: input file not found: {args.input}", file=sys.stderr)
        return 2
    try:
        data_text = Path(args.data).read_text(encoding="utf-8")
    except FileNotFoundError:
        print(f"error: data file not found: {args.data}", file=sys.stderr)
        return 2
    try:
        config = parse_input_file(input_text)
        spec, dataset = parse_data_file(data_text, config)
        if args.chains < 1:
            raise ValueError("--chains must be at least 1")
        settings = AnalysisSettings(
            seed=config.seed,
            prior_draws=config.prior_draws,
            posterior_draws=config.posterior_draws,
            draws_per_constraint=config.draws_per_constraint,
            n_chains=args.chains,
        )
        progress = None if args.quiet else _progress_printer()
        result = analyse(dataset, config.hypotheses, settings, progress=progress)
        paths = write_reports(result.report, result.estimates, Path(args.outdir), crlf=args.crlf)
    except (InputError, ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if not args.quiet:
        for k, rates in enumerate(result.chain_rates, start=1):
            summary = ", ".join(f"{key}={rate:.2f}" for key, rate in sorted(rates.items()))
            print(f"chain {k}: {summary}", file=sys.stderr)
        if result.report is not None:
            for note in result.report.warnings:
                print(f"warning: {note}", file=sys.stderr)
        print("wrote " + ", ".join(str(p) for p in paths), file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
