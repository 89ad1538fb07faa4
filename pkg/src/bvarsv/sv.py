"""Univariate stochastic volatility: one-sweep MCMC update and forecasting.

The measurement series is an orthogonalized error sequence xi_t with
xi_t = exp(h_t/2) e_t and an AR(1) log-variance h_t. One sweep draws the
auxiliary mixture indicators for log xi_t^2, the whole latent path
(including the stationary initial state h_0) from its banded Gaussian
conditional, the parameters (mu, rho, sigma) in the centered
parameterization, and (mu, sigma) again in the non-centered one
(interweaving), which makes the sampler efficient across persistence and
volatility-of-volatility regimes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky_banded, cho_solve_banded, solve_banded

from .dists import sample_gig

__all__ = ["SvParams", "SvPath", "SvPrior", "sv_update", "sv_forecast", "SvNumericalError"]


class SvNumericalError(RuntimeError):
    """Banded solve or Cholesky failure inside the volatility update."""


@dataclass
class SvParams:
    """Level, persistence and volatility of the log-variance process."""

    mu: float
    rho: float
    sigma: float

    def __post_init__(self):
        if not -1.0 < self.rho < 1.0:
            raise ValueError("persistence must lie in (-1, 1)")
        if self.sigma < 0.0:
            raise ValueError("sigma must be nonnegative")


@dataclass
class SvPath:
    """Latent log-variances h_1..h_T plus the initial state h_0."""

    h: np.ndarray
    h0: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if self.h.ndim != 1 or not np.all(np.isfinite(self.h)):
            raise ValueError("h must be a finite vector")


@dataclass(frozen=True)
class SvPrior:
    """Priors: mu ~ N(b, B), (rho+1)/2 ~ Beta(a0, b0), sigma^2 ~ G(1/2, 1/2G)."""

    mu_mean: float = 0.0
    mu_var: float = 100.0**2
    rho_a: float = 20.0
    rho_b: float = 1.5
    sigma2_shape: float = 0.5
    sigma2_rate: float = 0.5


# 10-component normal mixture approximation of the log chi^2_1 distribution
# (Omori, Chib, Shephard & Nakajima 2007 tabulation).
_MIX_P = np.array(
    [0.00609, 0.04775, 0.13057, 0.20674, 0.22715, 0.18842, 0.12047, 0.05591, 0.01575, 0.00115]
)
_MIX_MEAN = np.array(
    [1.92677, 1.34744, 0.73504, 0.02266, -0.85173, -1.97278, -3.46788, -5.55246, -8.68384, -14.65000]
)
_MIX_VAR = np.array(
    [0.11265, 0.17788, 0.26768, 0.40611, 0.62699, 0.98583, 1.57469, 2.54498, 4.16591, 7.33342]
)
_MIX_LOGP = np.log(_MIX_P) - 0.5 * np.log(2.0 * np.pi * _MIX_VAR)


def _draw_indicators(ystar, h, rng):
    dev = ystar[:, None] - h[:, None] - _MIX_MEAN[None, :]
    logp = _MIX_LOGP[None, :] - 0.5 * dev**2 / _MIX_VAR[None, :]
    logp -= logp.max(axis=1, keepdims=True)
    p = np.exp(logp)
    c = np.cumsum(p, axis=1)
    u = rng.random(ystar.size) * c[:, -1]
    return (u[:, None] > c).sum(axis=1)


def _draw_path(ystar, z, params, rng):
    """All-at-once draw of (h_0, h_1..h_T) from the banded Gaussian conditional."""
    T = ystar.size
    mu, rho, sig = params.mu, params.rho, params.sigma
    s2 = sig**2
    prec_meas = 1.0 / _MIX_VAR[z]
    ydev = ystar - _MIX_MEAN[z]

    diag = np.empty(T + 1)
    diag[0] = 1.0 / s2  # (1-rho^2)/s2 from h0 prior + rho^2/s2 from t=1
    diag[1:T] = (1.0 + rho**2) / s2 + prec_meas[: T - 1]
    diag[T] = 1.0 / s2 + prec_meas[T - 1]
    off = np.full(T, -rho / s2)

    c = mu * (1.0 - rho)
    b = np.empty(T + 1)
    b[0] = (1.0 - rho**2) * mu / s2 - rho * c / s2
    b[1:T] = c * (1.0 - rho) / s2 + prec_meas[: T - 1] * ydev[: T - 1]
    b[T] = c / s2 + prec_meas[T - 1] * ydev[T - 1]

    ab = np.zeros((2, T + 1))
    ab[0, 1:] = off
    ab[1, :] = diag
    try:
        U = cholesky_banded(ab, lower=False)
        mean = cho_solve_banded((U, False), b)
        zdraw = rng.standard_normal(T + 1)
        path = mean + solve_banded((0, 1), U, zdraw)
    except np.linalg.LinAlgError as exc:
        raise SvNumericalError("banded Cholesky failed in the volatility path draw") from exc
    except ValueError as exc:
        raise SvNumericalError("banded solve failed in the volatility path draw") from exc
    if not np.all(np.isfinite(path)):
        raise SvNumericalError("non-finite volatility path draw")
    return path[0], path[1:]


def _log_rho_prior(rho, prior):
    if not -1.0 < rho < 1.0:
        return -np.inf
    return (prior.rho_a - 1.0) * np.log1p(rho) + (prior.rho_b - 1.0) * np.log1p(-rho)


def _update_params_centered(h0, h, params, prior, rng):
    T = h.size
    mu, rho, sig = params.mu, params.rho, params.sigma

    # sigma^2 | h, mu, rho: gamma prior makes the conditional GIG
    dev = h - mu - rho * (np.append(h0, h[:-1]) - mu)
    ssr = dev @ dev + (1.0 - rho**2) * (h0 - mu) ** 2
    s2 = sample_gig(
        prior.sigma2_shape - (T + 1) / 2.0,
        2.0 * prior.sigma2_rate,
        max(ssr, 1e-300),
        rng,
    )
    sig = np.sqrt(s2)

    # mu | h, rho, sigma: conjugate normal
    hlag = np.append(h0, h[:-1])
    prec = ((1.0 - rho**2) + T * (1.0 - rho) ** 2) / s2 + 1.0 / prior.mu_var
    lin = ((1.0 - rho**2) * h0 + (1.0 - rho) * np.sum(h - rho * hlag)) / s2
    lin += prior.mu_mean / prior.mu_var
    mu = lin / prec + rng.standard_normal() / np.sqrt(prec)

    # rho: MH with the conditional-regression proposal; the acceptance ratio
    # keeps only the prior and the stationary h0 term, which the proposal omits
    hc = h - mu
    hlagc = np.append(h0 - mu, hc[:-1])
    den = hlagc @ hlagc
    accepted = False
    if den > 0.0:
        rho_hat = (hlagc @ hc) / den
        prop_sd = np.sqrt(s2 / den)
        rho_prop = rho_hat + prop_sd * rng.standard_normal()
        if -1.0 < rho_prop < 1.0:

            def stat_term(r):
                return 0.5 * np.log1p(-r**2) - (1.0 - r**2) * (h0 - mu) ** 2 / (2.0 * s2)

            log_ratio = (
                _log_rho_prior(rho_prop, prior)
                - _log_rho_prior(rho, prior)
                + stat_term(rho_prop)
                - stat_term(rho)
            )
            if np.log(rng.random()) < log_ratio:
                rho = rho_prop
                accepted = True
    return SvParams(mu=mu, rho=rho, sigma=float(sig)), accepted


def _update_params_noncentered(h0, h, z, ystar, params, prior, rng):
    """Interweaved (mu, sigma) redraw in the non-centered parameterization.

    With h-tilde = (h - mu)/sigma held fixed, the measurement equation is a
    heteroskedastic linear regression y* - m_z = mu + sigma h-tilde + u. The
    gamma prior on sigma^2 equals a standard normal prior on signed sigma,
    so the pair is jointly Gaussian here.
    """
    mu, sig = params.mu, params.sigma
    ht = (h - mu) / sig
    prec_meas = 1.0 / _MIX_VAR[z]
    ydev = ystar - _MIX_MEAN[z]
    zz = np.column_stack([np.ones(h.size), ht])
    A = (zz * prec_meas[:, None]).T @ zz
    A[0, 0] += 1.0 / prior.mu_var
    A[1, 1] += 1.0  # N(0,1) prior on signed sigma
    rhs = (zz * prec_meas[:, None]).T @ ydev
    rhs[0] += prior.mu_mean / prior.mu_var
    try:
        L = np.linalg.cholesky(A)
    except np.linalg.LinAlgError as exc:
        raise SvNumericalError("interweaving step covariance is not positive definite") from exc
    mean = np.linalg.solve(A, rhs)
    draw = mean + np.linalg.solve(L.T, rng.standard_normal(2))
    mu_new, sig_signed = draw
    h_new = mu_new + sig_signed * ht
    h0_new = mu_new + sig_signed * (h0 - mu) / sig
    return h0_new, h_new, SvParams(mu=mu_new, rho=params.rho, sigma=abs(sig_signed))


def sv_update(xi, path, params, rng, prior=SvPrior(), homoskedastic=False, interweave=True):
    """One MCMC sweep of the volatility block for one series.

    Parameters
    ----------
    xi : array
        Orthogonalized residual series (length T >= 1, finite).
    path : SvPath
    params : SvParams
    rng : numpy.random.Generator
    prior : SvPrior
    homoskedastic : bool
        Constant-variance fallback: h_t is pinned at mu, only mu is updated.
    interweave : bool
        Disable to run the centered-only sampler (same posterior, usually
        slower mixing); used by the equivalence tests.

    Returns
    -------
    (SvPath, SvParams, accepted) where `accepted` reports the rho MH step.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.size == 0:
        raise ValueError("empty residual series")
    if not np.all(np.isfinite(xi)):
        raise ValueError("non-finite residuals")
    ystar = np.log(xi**2 + 1e-290)  # offset only guards exact zeros

    if homoskedastic:
        z = _draw_indicators(ystar, path.h, rng)
        prec = np.sum(1.0 / _MIX_VAR[z]) + 1.0 / prior.mu_var
        lin = np.sum((ystar - _MIX_MEAN[z]) / _MIX_VAR[z]) + prior.mu_mean / prior.mu_var
        mu = lin / prec + rng.standard_normal() / np.sqrt(prec)
        new_params = SvParams(mu=mu, rho=0.0, sigma=0.0)
        return SvPath(h=np.full(xi.size, mu), h0=mu), new_params, False

    z = _draw_indicators(ystar, path.h, rng)
    h0, h = _draw_path(ystar, z, params, rng)
    params, accepted = _update_params_centered(h0, h, params, prior, rng)
    if interweave:
        h0, h, params = _update_params_noncentered(h0, h, z, ystar, params, prior, rng)
    return SvPath(h=h, h0=h0), params, accepted


def sv_forecast(h_last, params, horizon, rng):
    """Iterate the log-variance recursion `horizon` steps past h_T."""
    if horizon < 1:
        raise ValueError("horizon must be at least 1")
    out = np.empty(horizon)
    h = h_last
    for s in range(horizon):
        h = params.mu + params.rho * (h - params.mu) + params.sigma * rng.standard_normal()
        out[s] = h
    return out


def stationary_h0(params, rng):
    """Draw the initial log-variance from its stationary distribution."""
    sd = params.sigma / np.sqrt(1.0 - params.rho**2) if params.sigma > 0 else 0.0
    return params.mu + sd * rng.standard_normal()
