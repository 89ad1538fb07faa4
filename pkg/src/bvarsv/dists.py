"""Special functions and non-standard random variate generators.

Everything here takes an explicit ``numpy.random.Generator``; there is no
global random state. All samplers are vectorized over heterogeneous
parameter arrays because the Gibbs updates call them with one parameter
triple per coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

__all__ = [
    "GigParams",
    "sample_gig",
    "gig_logpdf_unnorm",
    "bessel_k",
    "log_bessel_k",
    "sample_gamma_log",
    "sample_dirichlet_symmetric",
    "log_dirichlet_symmetric",
    "sample_discrete",
]


class GigError(ValueError):
    """Invalid generalized-inverse-Gaussian parameter region."""


@dataclass(frozen=True)
class GigParams:
    """Parameter triple of the GIG density ~ x^(theta-1) exp(-(psi*x + chi/x)/2).

    Valid regions: (psi>0, chi>=0, theta>0), (psi>0, chi>0), or
    (psi>=0, chi>0, theta<0).
    """

    theta: float
    psi: float
    chi: float

    def validate(self) -> None:
        _validate_gig(np.asarray(self.theta), np.asarray(self.psi), np.asarray(self.chi))


def _validate_gig(theta, psi, chi):
    theta, psi, chi = np.broadcast_arrays(
        np.atleast_1d(theta), np.atleast_1d(psi), np.atleast_1d(chi)
    )
    ok = (
        ((psi > 0) & (chi >= 0) & (theta > 0))
        | ((psi > 0) & (chi > 0))
        | ((psi >= 0) & (chi > 0) & (theta < 0))
    )
    if not np.all(ok):
        i = tuple(np.argwhere(~ok)[0])
        raise GigError(
            f"invalid GIG parameters at index {i}: "
            f"theta={theta[i]}, psi={psi[i]}, chi={chi[i]}"
        )


def gig_logpdf_unnorm(x, theta, psi, chi):
    """Log of the unnormalized GIG density x^(theta-1) exp(-(psi*x+chi/x)/2)."""
    x = np.asarray(x, dtype=float)
    return (theta - 1.0) * np.log(x) - 0.5 * (psi * x + chi / x)


def _lg_std(x, lam, omega):
    # log quasi-density of the standardized two-parameter GIG
    return (lam - 1.0) * np.log(x) - 0.5 * omega * (x + 1.0 / x)


def _gig_mode(lam, omega):
    # written to avoid cancellation on both sides of lam = 1; the unselected
    # branch can divide by ~0 harmlessly under errstate
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = np.where(
            lam >= 1.0,
            (np.sqrt((lam - 1.0) ** 2 + omega**2) + (lam - 1.0)) / omega,
            omega / (np.sqrt((1.0 - lam) ** 2 + omega**2) + (1.0 - lam)),
        )
    return out


def _rejection_loop(n, rng, propose):
    """Run `propose(idx, rng) -> (values, accept_mask)` until all n slots fill."""
    out = np.empty(n)
    pending = np.arange(n)
    # acceptance rates of all three schemes are bounded away from zero, so
    # the loop terminates quickly; the cap only guards against NaN parameters
    for _ in range(10_000):
        vals, ok = propose(pending, rng)
        out[pending[ok]] = vals[ok]
        pending = pending[~ok]
        if pending.size == 0:
            return out
    raise GigError("GIG rejection sampler failed to accept after 10000 rounds")


def _gig_std_rou_noshift(lam, omega, rng):
    """Ratio-of-uniforms without mode shift; lam < 2, moderate omega."""
    xm = _gig_mode(lam, omega)
    lg_xm = _lg_std(xm, lam, omega)
    # maximizer of x^2 * g(x) gives the v bound
    xpl = (np.sqrt((lam + 1.0) ** 2 + omega**2) + (lam + 1.0)) / omega
    vplus = xpl * np.exp(0.5 * (_lg_std(xpl, lam, omega) - lg_xm))
    vplus = vplus * (1.0 + 1e-10)

    def propose(idx, rng):
        u = rng.random(idx.size)
        v = rng.random(idx.size) * vplus[idx]
        with np.errstate(divide="ignore", invalid="ignore"):
            x = v / u
            ok = (u > 0.0) & (2.0 * np.log(u) <= _lg_std(x, lam[idx], omega[idx]) - lg_xm[idx])
        return x, ok

    return _rejection_loop(lam.size, rng, propose)


def _gig_std_rou_shift(lam, omega, rng):
    """Mode-shifted ratio-of-uniforms; lam > 2 or omega > 3."""
    xm = _gig_mode(lam, omega)
    lg_xm = _lg_std(xm, lam, omega)
    # stationary points of (x-xm)^2 g(x) solve a cubic in x
    a = -(2.0 * (lam + 1.0) / omega + xm)
    b = 2.0 * (lam - 1.0) * xm / omega - 1.0
    p = b - a * a / 3.0
    q = 2.0 * a**3 / 27.0 - a * b / 3.0 + xm
    with np.errstate(invalid="ignore"):
        arg = np.clip(-q / (2.0 * np.sqrt(-(p**3) / 27.0)), -1.0, 1.0)
        fi = np.arccos(arg)
        fak = 2.0 * np.sqrt(-p / 3.0)
        y1 = fak * np.cos(fi / 3.0) - a / 3.0
        y2 = fak * np.cos(fi / 3.0 + 4.0 * np.pi / 3.0) - a / 3.0
    y2 = np.maximum(y2, xm * 1e-12)  # cubic cancellation guard; y2 in (0, xm)
    vplus = (y1 - xm) * np.exp(0.5 * (_lg_std(y1, lam, omega) - lg_xm)) * (1.0 + 1e-10)
    vminus = (y2 - xm) * np.exp(0.5 * (_lg_std(y2, lam, omega) - lg_xm)) * (1.0 + 1e-10)

    def propose(idx, rng):
        u = rng.random(idx.size)
        v = vminus[idx] + rng.random(idx.size) * (vplus[idx] - vminus[idx])
        with np.errstate(divide="ignore", invalid="ignore"):
            x = xm[idx] + v / u
            ok = (x > 0.0) & (u > 0.0)
            lg = np.where(ok, _lg_std(np.where(ok, x, 1.0), lam[idx], omega[idx]), -np.inf)
            ok &= 2.0 * np.log(u) <= lg - lg_xm[idx]
        return x, ok

    return _rejection_loop(lam.size, rng, propose)


def _gig_std_tiny(lam, omega, rng):
    """Piecewise envelope rejection for 0 <= lam < 1 with small omega.

    Three dominating pieces: constant g(xm) on (0, x0], the power envelope
    exp(-omega) x^(lam-1) on (x0, 2/omega], and an exponential tail beyond.
    """
    xm = _gig_mode(lam, omega)
    lg_xm = _lg_std(xm, lam, omega)
    x0 = omega / (1.0 - lam)
    xs = np.maximum(x0, 2.0 / omega)

    # piece areas, each scaled by exp(-lg_xm) to keep magnitudes tame
    a0 = x0  # envelope height exp(lg_xm) cancels after scaling
    has_mid = x0 < 2.0 / omega
    k1 = np.exp(-omega - lg_xm)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        a1 = np.where(
            has_mid,
            np.where(
                lam == 0.0,
                k1 * np.log(2.0 / omega**2),
                k1 / np.where(lam == 0.0, 1.0, lam)
                * ((2.0 / omega) ** lam - x0**lam),
            ),
            0.0,
        )
    k2 = np.exp((lam - 1.0) * np.log(xs) - lg_xm)
    a2 = 2.0 * k2 * np.exp(-xs * omega / 2.0) / omega
    atot = a0 + a1 + a2

    def propose(idx, rng):
        lam_i, om_i = lam[idx], omega[idx]
        v = rng.random(idx.size) * atot[idx]
        x = np.empty(idx.size)
        log_hx = np.empty(idx.size)
        in0 = v <= a0[idx]
        x[in0] = x0[idx][in0] * (v[in0] / a0[idx][in0])
        log_hx[in0] = lg_xm[idx][in0]
        v1 = v - a0[idx]
        in1 = (~in0) & (v1 <= a1[idx])
        if np.any(in1):
            ii = idx[in1]
            lz = lam[ii] == 0.0
            xx = np.empty(ii.size)
            with np.errstate(over="ignore"):
                xx[lz] = omega[ii][lz] * np.exp(np.exp(omega[ii][lz] + lg_xm[ii][lz]) * v1[in1][lz])
                nz = ~lz
                xx[nz] = (
                    x0[ii][nz] ** lam[ii][nz]
                    + lam[ii][nz] / np.exp(-omega[ii][nz] - lg_xm[ii][nz]) * v1[in1][nz]
                ) ** (1.0 / lam[ii][nz])
            x[in1] = xx
            log_hx[in1] = -omega[ii] + (lam[ii] - 1.0) * np.log(xx) + 0.0
        in2 = (~in0) & (~in1)
        if np.any(in2):
            ii = idx[in2]
            v2 = v1[in2] - a1[ii]
            # k2 and v2 are both on the exp(-lg_xm) scale, so it cancels here
            inner = np.exp(-xs[ii] * omega[ii] / 2.0) - omega[ii] / (2.0 * k2[ii]) * v2
            xx = -2.0 / omega[ii] * np.log(inner)
            x[in2] = xx
            log_hx[in2] = (lam[ii] - 1.0) * np.log(xs[ii]) - xx * omega[ii] / 2.0
        # log_hx for pieces 1,2 is on the absolute scale; piece 0 used lg_xm.
        u = rng.random(idx.size)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (x > 0.0) & np.isfinite(x)
            lgx = np.where(ok, _lg_std(np.where(ok, x, 1.0), lam_i, om_i), -np.inf)
            ok &= np.log(u) + log_hx <= lgx
        return x, ok

    return _rejection_loop(lam.size, rng, propose)


def _gig_std(lam, omega, rng):
    """Draws from density ~ x^(lam-1) exp(-omega (x + 1/x)/2), lam >= 0."""
    shift = (lam > 2.0) | (omega > 3.0)
    noshift = ~shift & ((lam >= 1.0 - 2.25 * omega**2) | (omega > 0.2))
    if shift.all():
        return _gig_std_rou_shift(lam, omega, rng)
    if noshift.all():
        return _gig_std_rou_noshift(lam, omega, rng)
    out = np.empty(lam.shape)
    tiny = ~(shift | noshift)
    if tiny.all():
        return _gig_std_tiny(lam, omega, rng)
    if shift.any():
        out[shift] = _gig_std_rou_shift(lam[shift], omega[shift], rng)
    if noshift.any():
        out[noshift] = _gig_std_rou_noshift(lam[noshift], omega[noshift], rng)
    if tiny.any():
        out[tiny] = _gig_std_tiny(lam[tiny], omega[tiny], rng)
    return out


def sample_gig(theta, psi, chi, rng, size=None):
    """Draw from the GIG density ~ x^(theta-1) exp(-(psi*x + chi/x)/2).

    Parameters
    ----------
    theta, psi, chi : float or array_like
        Density parameters, broadcast against each other (and `size`).
    rng : numpy.random.Generator
    size : int or tuple, optional
        Output shape. Defaults to the broadcast shape of the parameters.

    Returns
    -------
    numpy.ndarray or float
        Positive draws; scalar when all inputs are scalars and size is None.

    Notes
    -----
    Dispatches between a mode-shifted ratio-of-uniforms sampler, a plain
    ratio-of-uniforms sampler, and a piecewise-envelope sampler for the
    near-zero-concentrated regime, plus exact gamma / inverse-gamma branches
    for chi == 0 / psi == 0.
    """
    theta = np.asarray(theta, dtype=float)
    psi = np.asarray(psi, dtype=float)
    chi = np.asarray(chi, dtype=float)
    scalar = theta.ndim == 0 and psi.ndim == 0 and chi.ndim == 0 and size is None
    if size is None:
        shape = np.broadcast_shapes(theta.shape, psi.shape, chi.shape)
    else:
        shape = (size,) if np.isscalar(size) else tuple(size)
    theta, psi, chi = (np.broadcast_to(x, shape).ravel() for x in (theta, psi, chi))

    ok = (
        ((psi > 0) & (chi >= 0) & (theta > 0))
        | ((psi > 0) & (chi > 0))
        | ((psi >= 0) & (chi > 0) & (theta < 0))
    )
    if not ok.all():
        i = int(np.argmin(ok))
        raise GigError(
            f"invalid GIG parameters at index {i}: "
            f"theta={theta[i]}, psi={psi[i]}, chi={chi[i]}"
        )

    out = np.empty(theta.shape)
    general = (chi > 0.0) & (psi > 0.0)
    if general.all():
        # common case: no boundary branches, no masking overhead
        lpsi, lchi = np.log(psi), np.log(chi)
        omega = np.exp(0.5 * (lpsi + lchi))
        alpha = np.exp(0.5 * (lchi - lpsi))
        y = _gig_std(np.abs(theta), omega, rng)
        out[:] = np.where(theta >= 0.0, alpha * y, alpha / y)
    else:
        gamma_case = chi == 0.0
        invgamma_case = (psi == 0.0) & ~gamma_case
        if gamma_case.any():
            out[gamma_case] = rng.gamma(theta[gamma_case]) * (2.0 / psi[gamma_case])
        if invgamma_case.any():
            out[invgamma_case] = (chi[invgamma_case] / 2.0) / rng.gamma(-theta[invgamma_case])
        if general.any():
            th, ps, ch = theta[general], psi[general], chi[general]
            lpsi, lchi = np.log(ps), np.log(ch)
            omega = np.exp(0.5 * (lpsi + lchi))
            alpha = np.exp(0.5 * (lchi - lpsi))
            y = _gig_std(np.abs(th), omega, rng)
            out[general] = np.where(th >= 0.0, alpha * y, alpha / y)

    out = out.reshape(shape)
    return float(out) if scalar else out


def bessel_k(nu, x):
    """Modified Bessel function of the second kind K_nu(x), x > 0."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("bessel_k requires x > 0")
    return special.kv(nu, x)


def log_bessel_k(nu, x):
    """log K_nu(x), stable for large x and for small x with large |nu|."""
    nu = np.asarray(nu, dtype=float)
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("log_bessel_k requires x > 0")
    with np.errstate(over="ignore"):
        kve = special.kve(nu, x)  # exp(x) * K_nu(x)
    out = np.log(kve) - x
    # kve overflows for tiny x with large |nu|; fall back to the leading
    # small-argument term K_nu(x) ~ Gamma(|nu|) 2^(|nu|-1) x^(-|nu|)
    bad = ~np.isfinite(out)
    if np.any(bad):
        anu = np.abs(np.broadcast_to(nu, out.shape)[bad])
        xb = np.broadcast_to(x, out.shape)[bad]
        out = np.asarray(out)
        out[bad] = special.gammaln(anu) + (anu - 1.0) * np.log(2.0) - anu * np.log(xb)
    return out


def sample_gamma_log(shape, rng, rate=1.0):
    """Log of a Gamma(shape, rate) draw, exact for arbitrarily small shapes.

    For small shapes the draw is boosted: G(a) = G(a+1) * U^(1/a), evaluated
    in log space so the result never collapses to -inf for a >= 1e-8.
    """
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise ValueError("gamma shape must be positive")
    small = shape < 0.1
    out = np.empty(shape.shape)
    if np.any(~small):
        out[~small] = np.log(rng.gamma(shape[~small]))
    if np.any(small):
        a = shape[small]
        boost = rng.gamma(a + 1.0)
        u = rng.random(a.shape)
        out[small] = np.log(boost) + np.log(u) / a
    return out - np.log(rate)


def sample_dirichlet_symmetric(a, k, rng):
    """Draw from a symmetric Dirichlet(a, ..., a) on the k-simplex.

    Stable for very small concentration parameters: gamma draws are kept in
    log space and normalized with log-sum-exp, so the result always sums to
    one and never degenerates to an all-zero vector.
    """
    if a <= 0:
        raise ValueError("Dirichlet concentration must be positive")
    if k < 1:
        raise ValueError("k must be a positive integer")
    if k == 1:
        return np.ones(1)
    lg = sample_gamma_log(np.full(k, float(a)), rng)
    lg -= lg.max()
    w = np.exp(lg)
    return w / w.sum()


def log_dirichlet_symmetric(x_log_sum, a, k):
    """Log density of the symmetric Dirichlet given sum(log x) of the point."""
    return special.gammaln(k * a) - k * special.gammaln(a) + (a - 1.0) * x_log_sum


def sample_discrete(log_weights, rng):
    """Sample an index with probability proportional to exp(log_weights).

    Stable for log-weight spreads far beyond 700; -inf entries get zero
    probability. Raises if no weight is finite.
    """
    lw = np.asarray(log_weights, dtype=float)
    m = np.max(lw)
    if not np.isfinite(m):
        raise ValueError("sample_discrete requires at least one finite log-weight")
    w = np.exp(lw - m)
    c = np.cumsum(w)
    u = rng.random() * c[-1]
    return int(np.searchsorted(c, u, side="right").clip(0, lw.size - 1))
