"""Synthetic data generation and the consistency experiment.

Datasets are drawn from the generalized multivariate probit model itself:
latent outcomes come from the joint normal, and the ordinal coordinates are
discretized by fixed thresholds.  The consistency experiment tests three
hypotheses on a trivariate model (one continuous outcome, one ordinal with
two categories, one with three) whose correlation matrix carries a single
effect size: all-equal, strictly ordered, and the complement; the grid runs
over effect sizes and sample sizes and records the mean posterior
probabilities per cell as CSV.
"""

from __future__ import annotations

import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .analysis import AnalysisSettings, analyse
from .hypotheses import ConstraintRow, HypothesisSet, compile_hypothesis
from .model import Dataset, ModelSpec, is_positive_definite

__all__ = [
    "SimDesign",
    "generate_dataset",
    "consistency_design",
    "consistency_hypotheses",
    "run_consistency_cell",
    "run_consistency_grid",
]


@dataclass(frozen=True)
class SimDesign:
    """A data-generating configuration over an effect grid.

    ``correlation(rho)`` must stay positive definite for every effect in
    ``effects``; thresholds hold the free cut-points per ordinal outcome.
    """

    ordinal: tuple[bool, ...]
    levels: tuple[int, ...]
    coefficients: np.ndarray  # Q x P
    sigma: tuple[float, ...]
    thresholds: tuple[tuple[float, ...], ...]
    effects: tuple[float, ...]
    sample_sizes: tuple[int, ...]
    replications: int = 10
    seed: int = 1

    def correlation(self, rho: float) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ConsistencyDesign(SimDesign):
    """Trivariate design with correlations (rho, rho/2, 0)."""

    def correlation(self, rho: float) -> np.ndarray:
        return np.array(
            [[1.0, rho, rho / 2.0], [rho, 1.0, 0.0], [rho / 2.0, 0.0, 1.0]]
        )


def consistency_design(
    effects=(-0.6, 0.0, 0.6),
    sample_sizes=(30, 100, 500),
    replications: int = 10,
    seed: int = 1,
) -> ConsistencyDesign:
    """The default grid: continuous, 2-category and 3-category outcomes."""
    return ConsistencyDesign(
        ordinal=(False, True, True),
        levels=(0, 2, 3),
        coefficients=np.array([[1.0, 1.0, 1.0]]),
        sigma=(1.0,),
        thresholds=((), (0.0,), (0.0, 1.0)),
        effects=tuple(effects),
        sample_sizes=tuple(sample_sizes),
        replications=replications,
        seed=seed,
    )


def consistency_hypotheses() -> HypothesisSet:
    """All-equal versus strictly ordered (the complement is implicit)."""
    equal = compile_hypothesis(
        [
            ConstraintRow("equality", (1, 2, 1), right=(1, 3, 1)),
            ConstraintRow("equality", (1, 3, 1), right=(1, 3, 2)),
        ],
        3,
        1,
        label="all equal",
    )
    ordered = compile_hypothesis(
        [
            ConstraintRow("inequality", (1, 2, 1), right=(1, 3, 1)),
            ConstraintRow("inequality", (1, 3, 1), right=(1, 3, 2)),
        ],
        3,
        1,
        label="ordered",
    )
    return HypothesisSet((equal, ordered), include_complement=True)


def generate_dataset(
    design: SimDesign, rho: float, n: int, rng: np.random.Generator, max_tries: int = 100
) -> Dataset:
    """One dataset from the model; redraws if a category never occurs.

    A redraw keeps the design usable at small n where a rare category can
    come up empty; the retry count is capped.
    """
    C = design.correlation(rho)
    if not is_positive_definite(C):
        raise ValueError(f"effect {rho} leaves the correlation matrix non-PD")
    P = len(design.ordinal)
    d = np.ones(P)
    cont = [p for p, o in enumerate(design.ordinal) if not o]
    d[cont] = design.sigma
    cov = C * np.outer(d, d)
    chol = np.linalg.cholesky(cov)
    Q = design.coefficients.shape[0]
    for _ in range(max_tries):
        X = np.column_stack([np.ones(n)]) if Q == 1 else np.column_stack(
            [rng.standard_normal((n, Q - 1)), np.ones(n)]
        )
        latent = X @ design.coefficients + rng.standard_normal((n, P)) @ chol.T
        cont_block = latent[:, cont]
        ord_cols = []
        ok = True
        for p in (q for q, o in enumerate(design.ordinal) if o):
            cuts = np.concatenate(([-np.inf], np.asarray(design.thresholds[p]), [np.inf]))
            # side='left' realizes the half-open (lower, upper] category intervals
            cats = np.searchsorted(cuts, latent[:, p], side="left")
            k_p = design.levels[p]
            if len(np.unique(cats)) < k_p:
                ok = False
                break
            ord_cols.append(cats)
        if not ok:
            continue
        spec = ModelSpec(
            ordinal=design.ordinal,
            levels=design.levels,
            n_covariates=Q,
            group_sizes=(n,),
        )
        return Dataset(
            spec=spec,
            continuous=(cont_block,),
            ordinal=(np.column_stack(ord_cols) if ord_cols else np.zeros((n, 0), dtype=int),),
            covariates=(X,),
        )
    raise RuntimeError(f"no dataset with all categories observed after {max_tries} tries")


def run_consistency_cell(
    design: SimDesign,
    rho: float,
    n: int,
    replication: int,
    settings: AnalysisSettings,
) -> tuple[float, int, int, float, float, float]:
    """One (effect, sample size, replication) cell; returns the CSV row."""
    cell_seed = np.random.SeedSequence(
        [design.seed, int(round(rho * 1000)) & 0xFFFFFFFF, n, replication]
    )
    rng = np.random.default_rng(cell_seed)
    data = generate_dataset(design, rho, n, rng)
    cell_settings = AnalysisSettings(
        seed=int(cell_seed.generate_state(1)[0]),
        prior_draws=settings.prior_draws,
        posterior_draws=settings.posterior_draws,
        burn_in=settings.burn_in,
        thin=settings.thin,
        draws_per_constraint=settings.draws_per_constraint,
        delta=settings.delta,
    )
    result = analyse(data, consistency_hypotheses(), cell_settings)
    p1, p2, p3 = result.report.probabilities
    return rho, n, replication, float(p1), float(p2), float(p3)


def _cell_worker(args):
    return run_consistency_cell(*args)


def run_consistency_grid(
    design: SimDesign,
    settings: AnalysisSettings | None = None,
    csv_path: str | Path | None = None,
    workers: int | None = None,
) -> list[tuple[float, int, int, float, float, float]]:
    """Run every cell of the grid and optionally write the rows as CSV.

    Cells are independent and deterministically seeded, so the rows do not
    depend on the worker count.
    """
    settings = settings or AnalysisSettings(
        prior_draws=100_000, posterior_draws=4000, burn_in=1000
    )
    tasks = [
        (design, rho, n, rep, settings)
        for rho in design.effects
        for n in design.sample_sizes
        for rep in range(1, design.replications + 1)
    ]
    if workers is None:
        workers = min(os.cpu_count() or 1, 4)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_cell_worker, tasks))
    else:
        rows = [run_consistency_cell(*task) for task in tasks]
    if csv_path is not None:
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["rho", "n", "replication", "p_H1", "p_H2", "p_H3"])
            writer.writerows(rows)
    return rows
