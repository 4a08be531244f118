"""Gibbs/Metropolis sampler for the generalized multivariate probit model.

One iteration cycles through: the latent scores behind the ordinal outcomes
(univariate truncated normal sweeps), the regression coefficients (matrix
normal), the correlation matrix (always-accepted candidate drawn through an
inverse Wishart on an expanded covariance), the thresholds (uniform between
the neighbouring latent order statistics), the error standard deviations of
the continuous outcomes (log-scale random walk), and a scale expansion per
ordinal dimension that jointly rescales the latent column, the matching
coefficient column and the free thresholds to speed up threshold mixing.

Nuisance priors are flat for the coefficients and proportional to 1/sigma
for each standard deviation; the correlation matrices get the jointly
uniform prior over the positive-definite region.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy import stats
from scipy.special import ndtr, ndtri

from .model import (
    CorrelationSample,
    Dataset,
    ModelSpec,
    ParameterState,
    correlations_to_vector,
    decompose_covariance,
)
from .mvn import psd_factor

__all__ = ["ChainConfig", "PosteriorChain", "GibbsSampler", "run_chain", "run_chains", "truncated_normal"]

_ACCEPT_TARGET = 0.44


@dataclass(frozen=True)
class ChainConfig:
    """Run-length and tuning knobs of one chain."""

    burn_in: int = 2000
    draws: int = 10_000
    thin: int = 1
    seed: int = 1
    sigma_step: float = 0.2
    expansion_step: float = 0.1
    use_expansion: bool = True

    def __post_init__(self):
        if self.burn_in < 0 or self.draws < 1 or self.thin < 1:
            raise ValueError("burn_in >= 0, draws >= 1 and thin >= 1 are required")
        if self.sigma_step <= 0 or self.expansion_step <= 0:
            raise ValueError("random-walk step sizes must be positive")


@dataclass(frozen=True)
class PosteriorChain:
    """Retained posterior draws plus sampler diagnostics.

    ``rho`` holds the stacked correlation draws; ``coefficients`` is
    (draws, G, Q, P); ``sigma`` is (draws, G, P1); ``thresholds[g][j]`` is
    (draws, K_j - 2) with the free cut-points of the j-th ordinal outcome.
    """

    rho: CorrelationSample
    coefficients: np.ndarray
    sigma: np.ndarray
    thresholds: tuple[tuple[np.ndarray, ...], ...]
    acceptance_rates: dict[str, float] = field(default_factory=dict)

    @property
    def n_draws(self) -> int:
        return self.rho.size


def truncated_normal(lower, upper, mean, sd, rng: np.random.Generator) -> np.ndarray:
    """Vectorized normal draws truncated to (lower, upper].

    Uses inverse-CDF sampling reflected into the lower tail, where the
    normal CDF keeps full relative precision.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    a = (lower - mean) / sd
    b = (upper - mean) / sd
    with np.errstate(invalid="ignore"):
        flip = (a + b) > 0.0  # NaN from (-inf) + inf compares False, as intended
    a2 = np.where(flip, -b, a)
    b2 = np.where(flip, -a, b)
    u = rng.uniform(ndtr(a2), ndtr(b2))
    tiny = np.finfo(float).tiny
    z = ndtri(np.clip(u, tiny, 1.0 - 1e-16))
    z = np.clip(z, np.nextafter(a2, np.inf), b2)
    z = np.where(flip, -z, z)
    return mean + sd * z


class _Adaptive:
    """One log-scale random-walk step size with burn-in adaptation."""

    def __init__(self, step: float):
        self.step = step
        self.tries = 0
        self.accepts = 0
        self.post_tries = 0
        self.post_accepts = 0

    def record(self, accepted: bool, adapting: bool) -> None:
        self.tries += 1
        self.accepts += accepted
        if adapting:
            gain = min(0.25, 2.0 / np.sqrt(self.tries))
            self.step *= float(np.exp(gain * ((1.0 if accepted else 0.0) - _ACCEPT_TARGET)))
            self.step = float(np.clip(self.step, 1e-4, 5.0))
        else:
            self.post_tries += 1
            self.post_accepts += accepted

    @property
    def rate(self) -> float:
        if self.post_tries:
            return self.post_accepts / self.post_tries
        return self.accepts / max(self.tries, 1)


class GibbsSampler:
    """Working state and transition kernels for one chain.

    The constructor initializes thresholds from the empirical category
    frequencies, the latent scores at their category midpoints, the
    coefficients by least squares and the correlation matrices at the
    identity.  Every transition uses the sampler's own generator, so a
    fixed seed reproduces the chain exactly.
    """

    def __init__(self, data: Dataset, config: ChainConfig | None = None):
        self.data = data
        self.spec = data.spec
        self.config = config or ChainConfig()
        self.rng = np.random.default_rng(self.config.seed)
        spec = self.spec
        P = spec.n_outcomes
        for g, n in enumerate(spec.group_sizes, start=1):
            if n <= 2 * P + 2:
                raise ValueError(
                    f"population {g}: n={n} is too small for the covariance update "
                    f"(need n > 2P + 2 = {2 * P + 2})"
                )
        self._cont = list(spec.continuous_positions)
        self._ord = list(spec.ordinal_positions)
        self._adapting = True
        self._X, self._proj, self._chol_xtx_inv = [], [], []
        self._Y, self._U = [], []
        self.B, self.sigma, self.C, self.gamma = [], [], [], []
        self._sigma_walks: dict[tuple[int, int], _Adaptive] = {}
        self._expansion_walks: dict[tuple[int, int], _Adaptive] = {}
        self._corr_tries = 0
        self._corr_accepts = 0
        for g in range(spec.n_groups):
            self._init_group(g)

    # -- initialization ----------------------------------------------------

    def _init_group(self, g: int) -> None:
        spec = self.spec
        X = self.data.covariates[g]
        n = spec.group_sizes[g]
        Q = spec.n_covariates
        if Q:
            xtx = X.T @ X
            xtx_inv = np.linalg.inv(xtx)
            self._proj.append(np.linalg.solve(xtx, X.T))
            self._chol_xtx_inv.append(np.linalg.cholesky(xtx_inv))
        else:
            self._proj.append(np.zeros((0, n)))
            self._chol_xtx_inv.append(np.zeros((0, 0)))
        self._X.append(X)
        U = self.data.ordinal[g]
        self._U.append(U)

        gammas = []
        Y = np.zeros((n, spec.n_outcomes))
        Y[:, self._cont] = self.data.continuous[g]
        for j, p in enumerate(self._ord):
            K = spec.levels[p]
            counts = np.bincount(U[:, j], minlength=K + 1)[1:]
            cum = np.cumsum(counts)[:-1] / n
            raw = ndtri(cum)
            free = raw - raw[0]
            gam = np.concatenate(([-np.inf, 0.0], free[1:], [np.inf]))
            gammas.append(gam)
            mid = np.empty(K)
            for k in range(1, K + 1):
                lo, hi = gam[k - 1], gam[k]
                if not np.isfinite(lo):
                    mid[k - 1] = hi - 0.5
                elif not np.isfinite(hi):
                    mid[k - 1] = lo + 0.5
                else:
                    mid[k - 1] = (lo + hi) / 2.0
            Y[:, p] = mid[U[:, j] - 1]
        self.gamma.append(gammas)
        self._Y.append(Y)

        B = self._proj[g] @ Y if Q else np.zeros((0, spec.n_outcomes))
        self.B.append(B)
        resid = Y - X @ B
        sig = resid[:, self._cont].std(axis=0)
        self.sigma.append(np.clip(sig, 0.1, None))
        self.C.append(np.eye(spec.n_outcomes))
        for p in self._cont:
            self._sigma_walks[(g, p)] = _Adaptive(self.config.sigma_step)
        for p in self._ord:
            self._expansion_walks[(g, p)] = _Adaptive(self.config.expansion_step)

    # -- helpers -----------------------------------------------------------

    def _scale_vector(self, g: int) -> np.ndarray:
        d = np.ones(self.spec.n_outcomes)
        d[self._cont] = self.sigma[g]
        return d

    def _covariance(self, g: int) -> np.ndarray:
        d = self._scale_vector(g)
        return self.C[g] * np.outer(d, d)

    def snapshot(self) -> ParameterState:
        return ParameterState(
            coefficients=tuple(b.copy() for b in self.B),
            sigma=tuple(s.copy() for s in self.sigma),
            correlation=tuple(c.copy() for c in self.C),
            thresholds=tuple(tuple(gam.copy() for gam in gams) for gams in self.gamma),
            latent=tuple(y[:, self._ord].copy() for y in self._Y),
        )

    # -- transition kernels ------------------------------------------------

    def step_latents(self) -> None:
        """Redraw every latent score from its truncated normal conditional."""
        if not self._ord:
            return
        for g in range(self.spec.n_groups):
            Sigma = self._covariance(g)
            Lam = np.linalg.inv(Sigma)
            X, B, Y, U = self._X[g], self.B[g], self._Y[g], self._U[g]
            M = X @ B if self.spec.n_covariates else np.zeros_like(Y)
            for j, p in enumerate(self._ord):
                if Lam[p, p] <= 0.0:
                    raise ValueError("degenerate conditional variance in the latent update")
                others = [q for q in range(self.spec.n_outcomes) if q != p]
                w = Lam[others, p] / Lam[p, p]
                mean = M[:, p] - (Y[:, others] - M[:, others]) @ w
                sd = float(np.sqrt(1.0 / Lam[p, p]))
                gam = self.gamma[g][j]
                lo = gam[U[:, j] - 1]
                hi = gam[U[:, j]]
                Y[:, p] = truncated_normal(lo, hi, mean, sd, self.rng)

    def step_coefficients(self) -> None:
        """Matrix-normal draw of the regression coefficients."""
        if not self.spec.n_covariates:
            return
        for g in range(self.spec.n_groups):
            Sigma = self._covariance(g)
            chol_sigma = psd_factor(Sigma)
            b_hat = self._proj[g] @ self._Y[g]
            noise = self.rng.standard_normal(b_hat.shape)
            self.B[g] = b_hat + self._chol_xtx_inv[g] @ noise @ chol_sigma.T

    def step_correlation(self) -> None:
        """Always-accepted update of the correlation matrices.

        The candidate covariance is inverse Wishart with the residual
        cross-product (columns normalized to unit sum of squares, then
        scaled by the reciprocal standard deviations) as scale matrix; its
        correlation part is kept.
        """
        for g in range(self.spec.n_groups):
            n = self.spec.group_sizes[g]
            E = self._Y[g] - self._X[g] @ self.B[g] if self.spec.n_covariates else self._Y[g]
            norms = np.sqrt(np.sum(E * E, axis=0))
            if np.any(norms <= 0.0):
                raise ValueError("a residual column is identically zero")
            E_tilde = E / norms
            d_inv = 1.0 / self._scale_vector(g)
            S = (E_tilde.T @ E_tilde) * np.outer(d_inv, d_inv)
            if np.linalg.eigvalsh(S)[0] <= 0.0:
                raise ValueError(
                    "residual scale matrix is not positive definite; the sample is "
                    "too small or the residuals are collinear"
                )
            df = n - self.spec.n_outcomes - 1
            # A candidate hugging the PD boundary can fall below the numerical
            # floor of the correlation-matrix invariant; redrawing there is a
            # measure-zero guard, not a rejection.
            for _ in range(100):
                candidate = stats.invwishart.rvs(df, S, random_state=self.rng)
                _, C_new = decompose_covariance(candidate)
                if np.linalg.eigvalsh(C_new)[0] > 1e-10:
                    break
            else:
                raise ValueError("correlation candidates are numerically singular")
            self.C[g] = C_new
            self._corr_tries += 1
            self._corr_accepts += 1

    def step_thresholds(self) -> None:
        """Uniform draw of each free threshold between its latent neighbours."""
        for g in range(self.spec.n_groups):
            for j, p in enumerate(self._ord):
                K = self.spec.levels[p]
                if K < 3:
                    continue
                z = self._Y[g][:, p]
                cats = self._U[g][:, j]
                gam = self.gamma[g][j]
                for k in range(2, K):
                    lo = z[cats == k].max()
                    hi = z[cats == k + 1].min()
                    gam[k] = self.rng.uniform(lo, hi)

    def step_sigmas(self) -> None:
        """Log-scale random walk on each continuous error standard deviation."""
        if not self._cont:
            return
        for g in range(self.spec.n_groups):
            n = self.spec.group_sizes[g]
            E = self._Y[g] - self._X[g] @ self.B[g] if self.spec.n_covariates else self._Y[g]
            ete = E.T @ E
            c_inv = np.linalg.inv(self.C[g])
            for p in self._cont:
                walk = self._sigma_walks[(g, p)]
                d = self._scale_vector(g)
                others = [q for q in range(self.spec.n_outcomes) if q != p]
                quad = c_inv[p, p] * ete[p, p]
                cross = float(np.sum(c_inv[p, others] * ete[p, others] / d[others]))
                cur = self.sigma[g][self._cont.index(p)]
                prop = cur * float(np.exp(walk.step * self.rng.standard_normal()))
                log_ratio = (
                    self._sigma_logpost(prop, n, quad, cross)
                    - self._sigma_logpost(cur, n, quad, cross)
                    + np.log(prop / cur)
                )
                accepted = np.log(self.rng.uniform()) < log_ratio
                if accepted:
                    self.sigma[g][self._cont.index(p)] = prop
                walk.record(bool(accepted), self._adapting)

    @staticmethod
    def _sigma_logpost(sig: float, n: int, quad: float, cross: float) -> float:
        return -(n + 1) * np.log(sig) - 0.5 * (quad / sig**2 + 2.0 * cross / sig)

    def step_expansion(self) -> None:
        """Scale-group move per ordinal dimension.

        A positive scale h is proposed from the identity via a log-scale
        random walk against the kernel h^(n+Q+K-3) exp(-a h^2 - b h), whose
        coefficients come from expanding the complete-data quadratic form
        in h; an accepted h multiplies the latent column, the matching
        coefficient column and the free thresholds.
        """
        if not self._ord or not self.config.use_expansion:
            return
        Q = self.spec.n_covariates
        for g in range(self.spec.n_groups):
            n = self.spec.group_sizes[g]
            Sigma = self._covariance(g)
            Lam = np.linalg.inv(Sigma)
            E = self._Y[g] - self._X[g] @ self.B[g] if Q else self._Y[g]
            ete = E.T @ E
            for j, p in enumerate(self._ord):
                walk = self._expansion_walks[(g, p)]
                K = self.spec.levels[p]
                power = n + Q + K - 3
                others = [q for q in range(self.spec.n_outcomes) if q != p]
                a = 0.5 * Lam[p, p] * ete[p, p]
                b = float(np.sum(Lam[p, others] * ete[p, others]))
                h = float(np.exp(walk.step * self.rng.standard_normal()))
                log_ratio = (
                    power * np.log(h) - a * (h**2 - 1.0) - b * (h - 1.0) + np.log(h)
                )
                accepted = np.log(self.rng.uniform()) < log_ratio
                if accepted:
                    self._Y[g][:, p] *= h
                    if Q:
                        self.B[g][:, p] *= h
                    gam = self.gamma[g][j]
                    gam[2:K] *= h
                    ete[p, :] *= h
                    ete[:, p] *= h
                walk.record(bool(accepted), self._adapting)

    def iterate(self) -> None:
        """One full sweep over all transition kernels."""
        self.step_latents()
        self.step_coefficients()
        self.step_correlation()
        self.step_thresholds()
        self.step_sigmas()
        self.step_expansion()

    # -- chain driver --------------------------------------------------------

    def acceptance_rates(self) -> dict[str, float]:
        rates: dict[str, float] = {}
        if self._corr_tries:
            rates["correlation"] = self._corr_accepts / self._corr_tries
        for (g, p), walk in self._sigma_walks.items():
            rates[f"sigma[g={g + 1},p={p + 1}]"] = walk.rate
        if self.config.use_expansion:
            for (g, p), walk in self._expansion_walks.items():
                rates[f"expansion[g={g + 1},p={p + 1}]"] = walk.rate
        return rates

    def run(self, progress=None) -> PosteriorChain:
        """Burn in, then retain every ``thin``-th state."""
        cfg = self.config
        spec = self.spec
        total = cfg.burn_in + cfg.draws * cfg.thin
        rho_draws = np.empty((cfg.draws, spec.n_correlations))
        b_draws = np.empty((cfg.draws, spec.n_groups, spec.n_covariates, spec.n_outcomes))
        s_draws = np.empty((cfg.draws, spec.n_groups, spec.n_continuous))
        t_draws = [
            [np.empty((cfg.draws, max(spec.levels[p] - 2, 0))) for p in self._ord]
            for _ in range(spec.n_groups)
        ]
        kept = 0
        for it in range(total):
            self._adapting = it < cfg.burn_in
            if it == cfg.burn_in:
                self._corr_tries = self._corr_accepts = 0
            try:
                self.iterate()
            except Exception as exc:
                state = self.snapshot()
                raise RuntimeError(
                    f"chain aborted at iteration {it + 1}/{total}: {exc}; "
                    f"sigma={[np.round(s, 4).tolist() for s in state.sigma]}"
                ) from exc
            if it >= cfg.burn_in and (it - cfg.burn_in) % cfg.thin == 0 and kept < cfg.draws:
                rho_draws[kept] = correlations_to_vector(self.C)
                for g in range(spec.n_groups):
                    b_draws[kept, g] = self.B[g]
                    s_draws[kept, g] = self.sigma[g]
                    for j, p in enumerate(self._ord):
                        K = spec.levels[p]
                        t_draws[g][j][kept] = self.gamma[g][j][2:K]
                kept += 1
            if progress is not None:
                progress(it + 1, total)
        return PosteriorChain(
            rho=CorrelationSample(rho_draws, provenance="posterior"),
            coefficients=b_draws,
            sigma=s_draws,
            thresholds=tuple(tuple(cols) for cols in t_draws),
            acceptance_rates=self.acceptance_rates(),
        )


def run_chain(data: Dataset, config: ChainConfig | None = None, progress=None) -> PosteriorChain:
    """Run one chain with the given configuration."""
    return GibbsSampler(data, config).run(progress=progress)


def run_chains(
    data: Dataset, config: ChainConfig, n_chains: int, progress=None
) -> tuple[PosteriorChain, list[PosteriorChain]]:
    """Run ``n_chains`` independently seeded chains and pool their draws.

    Chain seeds are spawned deterministically from the configured seed, so
    the pooled result is reproducible.
    """
    if n_chains < 1:
        raise ValueError("at least one chain is required")
    seeds = np.random.SeedSequence(config.seed).generate_state(n_chains)
    chains = []
    for k in range(n_chains):
        cfg_k = replace(config, seed=int(seeds[k]))
        chains.append(run_chain(data, cfg_k, progress=progress))
    pooled = PosteriorChain(
        rho=CorrelationSample(
            np.vstack([c.rho.draws for c in chains]), provenance="posterior"
        ),
        coefficients=np.concatenate([c.coefficients for c in chains]),
        sigma=np.concatenate([c.sigma for c in chains]),
        thresholds=tuple(
            tuple(
                np.concatenate([c.thresholds[g][j] for c in chains])
                for j in range(len(chains[0].thresholds[g]))
            )
            for g in range(len(chains[0].thresholds))
        ),
        acceptance_rates={
            key: float(np.mean([c.acceptance_rates[key] for c in chains]))
            for key in chains[0].acceptance_rates
        },
    )
    return pooled, chains
