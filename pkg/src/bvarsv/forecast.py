"""Predictive densities, log predictive likelihoods, recursive evaluation.

One-step predictive densities are Rao-Blackwellized over posterior draws:
each retained draw contributes a Gaussian component with mean Phi' x and
covariance W^{-1} diag(exp(h_{T+1})) W^{-T}, where the one-step-ahead
log-variances are simulated from the volatility recursion. Longer horizons
simulate intermediate observations and volatilities forward and return the
final-step conditional Gaussian per simulated path.
"""

from __future__ import annotations

import csv
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import logsumexp

from .model import VarSpec, companion_stable, make_regressor, orthogonalizer
from .sampler import McmcConfig, PosteriorDraws, PriorConfig, derive_seed, run_mcmc
from .sv import SvParams, sv_forecast

__all__ = [
    "PredictiveMixture",
    "ScorePanel",
    "ModelDef",
    "DensityUnderflow",
    "predictive_mixture",
    "log_predictive_likelihood",
    "recursive_exercise",
]


class DensityUnderflow(RuntimeError):
    """Every mixture component underflowed at the evaluation point."""


@dataclass
class PredictiveMixture:
    """Equally weighted Gaussian mixture over posterior draws."""

    means: np.ndarray  # (C, M)
    covs: np.ndarray  # (C, M, M)
    horizon: int

    @property
    def n_components(self) -> int:
        return self.means.shape[0]


def _draw_sigma(l, h, M):
    W = orthogonalizer(l, M)
    Winv = np.linalg.inv(W)
    S = Winv @ np.diag(np.exp(h)) @ Winv.T
    return 0.5 * (S + S.T)


def predictive_mixture(
    draws: PosteriorDraws,
    x_next: np.ndarray,
    horizon: int,
    rng,
    paths_per_draw: int = 1,
    stable_only: bool = False,
) -> PredictiveMixture:
    """Predictive mixture `horizon` steps past the estimation sample.

    Parameters
    ----------
    draws : PosteriorDraws
    x_next : length-K regressor for the first out-of-sample period,
        (y'_T, ..., y'_{T-p+1}[, 1]).
    horizon : int >= 1
    rng : numpy.random.Generator
    paths_per_draw : extra simulated paths per retained draw (horizon > 1).
    stable_only : drop draws whose companion matrix is explosive.
    """
    if draws.n_retained == 0:
        raise ValueError("no retained draws")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    spec = draws.spec
    K, M = spec.K, spec.M
    x_next = np.asarray(x_next, dtype=float)
    if x_next.size != K:
        raise ValueError(f"x_next must have length {K}")

    n_rep = 1 if horizon == 1 else paths_per_draw
    means, covs = [], []
    for r in range(draws.n_retained):
        Phi = draws.phi[r].reshape(K, M, order="F")
        if stable_only and not companion_stable(Phi, spec):
            continue
        l = draws.l[r]
        params = [SvParams(*draws.sv_params[r, i]) for i in range(M)]
        for _ in range(n_rep):
            x = x_next.copy()
            h = draws.h_last[r].copy()
            for s in range(1, horizon + 1):
                h = np.array(
                    [sv_forecast(h[i], params[i], 1, rng)[0] for i in range(M)]
                )
                mean = Phi.T @ x
                cov = _draw_sigma(l, h, M)
                if s == horizon:
                    means.append(mean)
                    covs.append(cov)
                else:
                    y_new = rng.multivariate_normal(mean, cov, method="cholesky")
                    if spec.p > 1:
                        x[M : M * spec.p] = x[: M * (spec.p - 1)]
                    x[:M] = y_new
    if not means:
        raise ValueError("no admissible draws (all filtered as unstable)")
    mix = PredictiveMixture(
        means=np.asarray(means), covs=np.asarray(covs), horizon=horizon
    )
    for c in range(mix.n_components):
        if not np.all(np.linalg.eigvalsh(mix.covs[c]) > 0):
            raise ValueError(f"component {c} covariance is not positive definite")
    return mix


def _gauss_logpdf(y, mean, cov):
    L = np.linalg.cholesky(cov)
    with np.errstate(over="ignore"):
        dev = np.linalg.solve(L, y - mean)
        quad = dev @ dev
    return -0.5 * (y.size * np.log(2.0 * np.pi) + quad) - np.sum(np.log(np.diag(L)))


def log_predictive_likelihood(mix: PredictiveMixture, y_obs, subset=None) -> float:
    """Log of the mixture density at the realized observation.

    `subset` selects variable indices; each Gaussian component is
    marginalized by taking the matching sub-mean and sub-covariance.
    """
    y_obs = np.asarray(y_obs, dtype=float)
    M = mix.means.shape[1]
    if subset is None:
        idx = np.arange(M)
    else:
        idx = np.asarray(subset, dtype=int)
        if idx.size == 0:
            raise ValueError("subset must be nonempty")
        if idx.min() < 0 or idx.max() >= M:
            raise ValueError("subset indices out of range")
    y = y_obs[idx] if y_obs.size == M else y_obs
    if y.size != idx.size:
        raise ValueError("observation does not match subset size")
    logs = np.array(
        [
            _gauss_logpdf(y, mix.means[c][idx], mix.covs[c][np.ix_(idx, idx)])
            for c in range(mix.n_components)
        ]
    )
    out = logsumexp(logs) - np.log(mix.n_components)
    if not np.isfinite(out):
        raise DensityUnderflow(
            "all mixture components underflowed at the evaluation point"
        )
    return float(out)


@dataclass(frozen=True)
class ModelDef:
    """A named model configuration entering the forecasting race."""

    name: str
    spec: VarSpec
    phi_prior: PriorConfig = PriorConfig()
    l_prior: PriorConfig = PriorConfig(family="R2D2")
    variables: tuple = ()  # empty: use all dataset columns
    homoskedastic: bool = False


@dataclass
class ScorePanel:
    """Windows x models matrix of log predictive likelihoods."""

    window_labels: list
    model_names: list
    lpl: np.ndarray
    horizon: int
    subset: str = "all"
    errors: dict = field(default_factory=dict)

    def cumulative(self) -> np.ndarray:
        return np.cumsum(self.lpl, axis=0)

    def cumulative_relative(self, benchmark: str) -> np.ndarray:
        if benchmark not in self.model_names:
            raise KeyError(f"benchmark {benchmark!r} not in panel")
        b = self.model_names.index(benchmark)
        return np.cumsum(self.lpl - self.lpl[:, [b]], axis=0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window"] + list(self.model_names))
            for lab, row in zip(self.window_labels, self.lpl):
                w.writerow([lab] + [f"{v:.17g}" for v in row])

    def cumulative_to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["window"] + list(self.model_names))
            for lab, row in zip(self.window_labels, self.cumulative()):
                w.writerow([lab] + [f"{v:.17g}" for v in row])

    @classmethod
    def from_csv(cls, path, horizon=1, subset="all") -> "ScorePanel":
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], rows[1:]
        labels = [r[0] for r in body]
        lpl = np.array([[float(v) for v in r[1:]] for r in body])
        return cls(
            window_labels=labels, model_names=header[1:], lpl=lpl,
            horizon=horizon, subset=subset,
        )


def _model_columns(dataset, model):
    if not model.variables:
        return list(range(dataset.M)), dataset
    idx = [dataset.names.index(v) for v in model.variables]
    sub = type(dataset)(
        dataset.Y[:, idx],
        tuple(model.variables),
        dataset.dates,
        tuple(dataset.transforms[i] for i in idx) if dataset.transforms else (),
    )
    return idx, sub


def _fit_and_score(args):
    (dataset, model, t_obs, horizons, subsets, mcmc, seed, paths_per_draw) = args
    cols, sub = _model_columns(dataset, model)
    train = sub.head(t_obs)
    cfg = McmcConfig(draws=mcmc.draws, burnin=mcmc.burnin, thin=mcmc.thin, seed=seed)
    draws = run_mcmc(
        train, model.spec, phi_prior=model.phi_prior, l_prior=model.l_prior,
        mcmc=cfg, homoskedastic=model.homoskedastic,
    )
    rng = np.random.default_rng(derive_seed(seed, 0x5EED))
    x_next = make_regressor(train.Y, model.spec)
    out = {}
    for h in horizons:
        target_row = t_obs + h - 1
        if target_row >= dataset.T:
            continue
        mix = predictive_mixture(draws, x_next, h, rng, paths_per_draw=paths_per_draw)
        y_real_full = dataset.Y[target_row]
        for sub_name, sub_idx in subsets:
            if sub_idx is None:
                idx_model = None
                y_eval = y_real_full[cols]
            else:
                # map dataset-level indices into this model's column order
                idx_model = [cols.index(i) for i in sub_idx]
                y_eval = y_real_full[cols]
            out[(h, sub_name)] = log_predictive_likelihood(mix, y_eval, idx_model)
    return out


def recursive_exercise(
    dataset,
    models,
    window_start: int,
    window_end: int,
    horizons=(1,),
    subsets=(("all", None),),
    mcmc: McmcConfig = McmcConfig(),
    workers: int = 0,
    paths_per_draw: int = 1,
):
    """Expanding-window out-of-sample evaluation.

    Fits every model on data through each window end (an observation
    count), scores the h-step-ahead predictive density at the realized
    observation, and collects one panel per (horizon, subset). Cell
    failures are recorded in the panel's `errors` map without aborting.

    Returns a dict keyed by (horizon, subset_name).
    """
    horizons = tuple(int(h) for h in horizons)
    if window_start < 2 or window_start > window_end:
        raise ValueError("need 2 <= window_start <= window_end")
    if window_end + min(horizons) - 1 >= dataset.T:
        raise ValueError("window_end leaves no realized observation to score")
    windows = list(range(window_start, window_end + 1))
    tasks = []
    for wi, t_obs in enumerate(windows):
        for mi, model in enumerate(models):
            seed = derive_seed(mcmc.seed, wi * len(models) + mi)
            tasks.append(
                (dataset, model, t_obs, horizons, subsets, mcmc, seed, paths_per_draw)
            )

    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_and_score_safe, tasks))
    else:
        results = [_fit_and_score_safe(t) for t in tasks]

    panels = {}
    for h in horizons:
        valid = [w for w in windows if w + h - 1 < dataset.T]
        labels = [str(dataset.dates[w + h - 1]) for w in valid]
        for sub_name, _ in subsets:
            panels[(h, sub_name)] = ScorePanel(
                window_labels=labels,
                model_names=[m.name for m in models],
                lpl=np.full((len(valid), len(models)), np.nan),
                horizon=h,
                subset=sub_name,
            )
    k = 0
    for wi, t_obs in enumerate(windows):
        for mi, model in enumerate(models):
            scores, err = results[k]
            k += 1
            for h in horizons:
                if t_obs + h - 1 >= dataset.T:
                    continue
                row = t_obs - window_start
                for sub_name, _ in subsets:
                    panel = panels[(h, sub_name)]
                    if err is not None:
                        panel.errors[(panel.window_labels[row], model.name)] = err
                    else:
                        panel.lpl[row, mi] = scores[(h, sub_name)]
    return panels


def _fit_and_score_safe(args):
    try:
        return _fit_and_score(args), None
    except Exception as exc:  # per-cell failure, recorded not raised
        return None, f"{type(exc).__name__}: {exc}"
