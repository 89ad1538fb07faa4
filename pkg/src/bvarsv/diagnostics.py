"""Sparsity measurement, prior simulation, marginal densities, accuracy metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gammaln

from .dists import bessel_k, log_bessel_k, sample_gamma_log
from .groups import phi_groups
from .model import reduced_from_structural
from .sampler import PosteriorDraws

__all__ = [
    "hoyer",
    "SparsitySummary",
    "prior_simulate",
    "prior_hoyer_study",
    "marginal_density",
    "log_marginal_density",
    "mae",
    "rmspd",
    "induced_prior_experiment",
    "posterior_hoyer",
]


def hoyer(x) -> float:
    """Normalized l1/l2 sparseness in [0, 1]; 1 is one-hot, 0 is constant.

    Raises on all-zero input (the measure is 0/0 there) and on vectors
    shorter than 2.
    """
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("hoyer needs at least 2 entries")
    l2 = np.sqrt(np.sum(x**2))
    if l2 == 0.0:
        raise ValueError("hoyer undefined for the all-zero vector")
    rn = np.sqrt(x.size)
    return float((rn - np.sum(np.abs(x)) / l2) / (rn - 1.0))


def _simulate_block(family, hyper, n, draws, rng):
    fam = family.upper()
    z = rng.standard_normal((draws, n))
    if fam == "FLAT":
        v = float(hyper.get("v", 10.0))
        return z * np.sqrt(v)
    if fam == "R2D2":
        a_pi = float(hyper["a_pi"])
        b = float(hyper["b"])
        a = n * a_pi
        xi = np.exp(sample_gamma_log(np.full(draws, b), rng))
        zeta = np.exp(sample_gamma_log(np.full(draws, a), rng, rate=xi))
        lg = sample_gamma_log(np.full((draws, n), a_pi), rng)
        theta = np.exp(lg - lg.max(axis=1, keepdims=True))
        theta /= theta.sum(axis=1, keepdims=True)
        psi = rng.exponential(2.0, size=(draws, n))
        return z * np.sqrt(psi * theta * zeta[:, None] / 2.0)
    if fam == "DL":
        a = float(hyper["a"])
        lg = sample_gamma_log(np.full((draws, n), a), rng)
        theta = np.exp(lg - lg.max(axis=1, keepdims=True))
        theta /= theta.sum(axis=1, keepdims=True)
        zeta = np.exp(sample_gamma_log(np.full(draws, n * a), rng, rate=0.5))
        psi = rng.exponential(2.0, size=(draws, n))
        return z * np.sqrt(psi) * theta * zeta[:, None]
    if fam == "SSVS":
        tau0, tau1 = float(hyper["tau0"]), float(hyper["tau1"])
        p = float(hyper.get("p", 0.5))
        g = rng.random((draws, n)) < p
        return z * np.where(g, tau1, tau0)
    if fam == "HM":
        c, d = float(hyper["c"]), float(hyper["d"])
        rt = np.asarray(hyper.get("rtilde", 1.0), dtype=float)
        lam = np.exp(sample_gamma_log(np.full(draws, c), rng, rate=d))
        return z * np.sqrt(lam[:, None] * rt)
    raise ValueError(f"unknown prior family {family!r}")


def prior_simulate(family, hyper, n, draws, rng) -> np.ndarray:
    """Ancestral samples from a prior family, one coefficient vector per row.

    `hyper` carries the family's fixed hyperparameters (R2D2: a_pi, b;
    DL: a; SSVS: tau0, tau1, p; HM: c, d; FLAT: v). When a discrete
    hyperprior is configured (R2D2 "b_grid" / DL "a_grid"), the shape is
    redrawn uniformly from the grid per simulation.
    """
    if n < 1 or draws < 1:
        raise ValueError("n and draws must be positive")
    fam = family.upper()
    grid_key = {"R2D2": "b_grid", "DL": "a_grid"}.get(fam)
    if grid_key and grid_key in hyper:
        grid = np.asarray(hyper[grid_key], dtype=float)
        out = np.empty((draws, n))
        picks = grid[rng.integers(0, grid.size, size=draws)]
        for i in range(draws):
            h = dict(hyper)
            h.pop(grid_key)
            h["b" if fam == "R2D2" else "a"] = picks[i]
            out[i] = _simulate_block(family, h, n, 1, rng)[0]
        return out
    return _simulate_block(family, hyper, n, draws, rng)


@dataclass
class SparsitySummary:
    """Hoyer values with grouping labels and a degenerate-draw counter."""

    values: dict
    excluded: dict = field(default_factory=dict)

    def means(self):
        return {k: float(np.mean(v)) for k, v in self.values.items() if len(v)}


def prior_hoyer_study(family, hyper, n, draws, rng, batch=500) -> SparsitySummary:
    """Mean Hoyer sparseness of prior coefficient draws.

    All-zero vectors (possible only when a global scale underflows double
    precision) are excluded and counted, mirroring the posterior summary.
    """
    vals, excluded = [], 0
    done = 0
    while done < draws:
        m = min(batch, draws - done)
        block = prior_simulate(family, hyper, n, m, rng)
        for row in block:
            if np.all(row == 0.0):
                excluded += 1
            else:
                vals.append(hoyer(row))
        done += m
    return SparsitySummary(values={family: vals}, excluded={family: excluded})


# --- marginal prior densities ------------------------------------------------


def _dl_logpdf(phi, a):
    x = abs(phi)
    if x == 0.0:
        return np.inf
    return (
        0.5 * (a - 1.0) * np.log(x)
        + log_bessel_k(1.0 - a, np.sqrt(2.0 * x))
        - 0.5 * (1.0 + a) * np.log(2.0)
        - gammaln(a)
    )


def _hm_logpdf(phi, c, d):
    x = abs(phi)
    if x == 0.0:
        return np.inf
    return (
        0.5 * (c - 0.5) * (np.log(x**2) - np.log(2.0 * d))
        + c * np.log(d)
        + np.log(2.0)
        + log_bessel_k(c - 0.5, np.sqrt(2.0 * d) * x)
        - gammaln(c)
        - 0.5 * np.log(2.0 * np.pi)
    )


def _ssvs_pdf(phi, tau0, tau1, p=0.5):
    n0 = np.exp(-0.5 * phi**2 / tau0**2) / (np.sqrt(2 * np.pi) * tau0)
    n1 = np.exp(-0.5 * phi**2 / tau1**2) / (np.sqrt(2 * np.pi) * tau1)
    return (1.0 - p) * n0 + p * n1


def _r2d2_pdf(phi, a_pi, b):
    """Univariate scale-mixture by quadrature: Laplace kernel over a
    beta-prime global scale (local weight fixed at one)."""
    x = abs(phi)
    lognc = gammaln(a_pi + b) - gammaln(a_pi) - gammaln(b)

    def integrand(u):
        zeta = np.exp(u)
        # Laplace(phi; scale sqrt(zeta/2)) * BetaPrime(zeta; a_pi, b) * zeta
        log_lap = -0.5 * np.log(2.0 * zeta) - x / np.sqrt(zeta / 2.0)
        log_bp = lognc + (a_pi - 1.0) * u - (a_pi + b) * np.log1p(zeta)
        return np.exp(log_lap + log_bp + u)

    val = 0.0
    for lo, hi in zip(np.linspace(-60, 60, 25)[:-1], np.linspace(-60, 60, 25)[1:]):
        val += quad(integrand, lo, hi, limit=200)[0]
    return val


def log_marginal_density(family, hyper, phi) -> float:
    """Log marginal prior density of a single coefficient."""
    fam = family.upper()
    if fam == "DL":
        a = float(hyper["a"])
        if not 0.0 < a:
            raise ValueError("DL needs a > 0")
        return float(_dl_logpdf(phi, a))
    if fam == "HM":
        c, d = float(hyper["c"]), float(hyper["d"])
        if c <= 0 or d <= 0:
            raise ValueError("HM needs c, d > 0")
        return float(_hm_logpdf(phi, c, d))
    if fam == "SSVS":
        return float(np.log(_ssvs_pdf(phi, hyper["tau0"], hyper["tau1"], hyper.get("p", 0.5))))
    if fam == "R2D2":
        a_pi, b = float(hyper["a_pi"]), float(hyper["b"])
        if a_pi <= 0 or b <= 0:
            raise ValueError("R2D2 needs a_pi, b > 0")
        return float(np.log(_r2d2_pdf(phi, a_pi, b)))
    raise ValueError(f"no marginal density for family {family!r}")


def marginal_density(family, hyper, phi) -> float:
    """Marginal prior density of a single coefficient (linear scale)."""
    return float(np.exp(log_marginal_density(family, hyper, phi)))


# --- estimation accuracy ------------------------------------------------------


def mae(draws, truth) -> float:
    """Mean absolute error of the posterior mean against the truth."""
    draws = np.asarray(draws, dtype=float)
    truth = np.asarray(truth, dtype=float).ravel()
    if draws.ndim != 2 or draws.shape[1] != truth.size:
        raise ValueError("draws must be (R, n) matching truth length")
    return float(np.mean(np.abs(draws.mean(axis=0) - truth)))


def rmspd(draws, truth) -> float:
    """Root mean square posterior distance: concentration around the truth."""
    draws = np.asarray(draws, dtype=float)
    truth = np.asarray(truth, dtype=float).ravel()
    if draws.ndim != 2 or draws.shape[1] != truth.size:
        raise ValueError("draws must be (R, n) matching truth length")
    return float(np.sqrt(np.mean((draws - truth[None, :]) ** 2)))


# --- induced-prior experiment -------------------------------------------------


def induced_prior_experiment(M, variance, draws, rng):
    """Map i.i.d. normal structural draws to reduced form and summarize.

    Draws B (M x M) and the factor elements i.i.d. N(0, variance), maps to
    Phi = B L^{-1}, and reports per-column samples, pooled excess kurtosis
    per column, and QQ data against N(0, variance).
    """
    if M < 2:
        raise ValueError("need M >= 2")
    n_l = M * (M - 1) // 2
    samples = np.empty((draws, M, M))
    sd = np.sqrt(variance)
    for r in range(draws):
        B = sd * rng.standard_normal((M, M))
        l = sd * rng.standard_normal(n_l)
        samples[r] = reduced_from_structural(B, l)

    kurtosis = np.empty(M)
    qq = {}
    from scipy.stats import norm

    for j in range(M):
        col = samples[:, :, j].ravel()
        m = col.mean()
        s2 = col.var()
        kurtosis[j] = np.mean((col - m) ** 4) / s2**2 - 3.0
        qs = np.linspace(0.005, 0.995, 199)
        qq[j] = {
            "theoretical": norm.ppf(qs, scale=sd),
            "empirical": np.quantile(col, qs),
        }
    return {"samples": samples, "excess_kurtosis": kurtosis, "qq": qq}


def posterior_hoyer(draws: PosteriorDraws, groups=None) -> SparsitySummary:
    """Hoyer measure per (lag, own/cross) group, averaged over draws.

    Single-coefficient groups are excluded (the measure needs n >= 2), as
    are all-zero group draws; both exclusions are counted.
    """
    if draws.n_retained == 0:
        raise ValueError("no draws")
    spec = draws.spec
    groups = groups or phi_groups(spec, "semi-global-local")
    from .groups import phi_shrink_indices

    shrink = phi_shrink_indices(spec)
    values = {lab: [] for lab in groups.labels}
    excluded = {lab: 0 for lab in groups.labels}
    beta = draws.phi[:, shrink]
    for gi, lab in enumerate(groups.labels):
        members = groups.members(gi)
        if members.size < 2:
            excluded[lab] = draws.n_retained
            continue
        for r in range(draws.n_retained):
            vec = beta[r, members]
            if np.all(vec == 0.0):
                excluded[lab] += 1
            else:
                values[lab].append(hoyer(vec))
    return SparsitySummary(values=values, excluded=excluded)
