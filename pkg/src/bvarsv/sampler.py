"""Gibbs sampler for the VAR with stochastic volatility.

The coefficient matrix is drawn column by column with the corrected
triangular algorithm: because the orthogonalized error of equation j is an
affine function of every earlier equation's coefficients, all equations
j >= i carry likelihood information about column i, and the conditional
precision accumulates each of their weighted Gram matrices. Omitting the
j > i terms (the uncorrected per-equation shortcut) samples from the wrong
conditional; the test suite keeps an uncorrected variant around precisely
to demonstrate that failure.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cho_solve, qr, solve_triangular

from .groups import cov_groups, phi_groups, phi_shrink_indices
from .model import Dataset, VarSpec, build_design, n_free_elements, orthogonalizer
from .priors import INTERCEPT_VARIANCE, make_prior
from .sv import SvParams, SvPath, SvPrior, sv_update

__all__ = [
    "McmcConfig",
    "PriorConfig",
    "PosteriorDraws",
    "ChainState",
    "McmcStepError",
    "PhiDrawError",
    "draw_phi_triangular",
    "draw_l",
    "gibbs_sweep",
    "run_mcmc",
    "save_draws",
    "load_draws",
    "write_summary_csv",
    "read_summary_csv",
    "derive_seed",
]


class PhiDrawError(RuntimeError):
    def __init__(self, equation, msg="Cholesky failure in the coefficient draw"):
        super().__init__(f"{msg} (equation {equation})")
        self.equation = equation


class McmcStepError(RuntimeError):
    def __init__(self, iteration, step, cause):
        super().__init__(f"MCMC aborted at iteration {iteration}, step '{step}': {cause}")
        self.iteration = iteration
        self.step = step


@dataclass(frozen=True)
class McmcConfig:
    """Chain settings; `retained` is draws // thin post-burn-in draws."""

    draws: int = 10_000
    burnin: int = 5_000
    thin: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.draws < 1 or self.burnin < 0 or self.thin < 1:
            raise ValueError("need draws >= 1, burnin >= 0, thin >= 1")

    @property
    def retained(self) -> int:
        return self.draws // self.thin


@dataclass(frozen=True)
class PriorConfig:
    """Prior family selection for one coefficient block."""

    family: str = "R2D2"
    grouping: str = "global"
    options: dict = field(default_factory=dict)


def derive_seed(base_seed: int, task_index: int) -> int:
    """Deterministic per-task seed for worker pools: base xor task index."""
    return (int(base_seed) ^ int(task_index)) & 0xFFFFFFFFFFFFFFFF


@dataclass
class PosteriorDraws:
    """Thinned posterior draws plus run diagnostics.

    phi is stored vec'd (column-major, length n including the intercept
    row); sv_params holds (mu, rho, sigma) per series; h_last is the
    log-variance at the final estimation period, the forecasting seed.
    """

    spec: VarSpec
    phi: np.ndarray
    l: np.ndarray
    sv_params: np.ndarray
    h_last: np.ndarray
    hyper_phi: np.ndarray
    hyper_l: np.ndarray
    hyper_phi_names: tuple = ()
    hyper_l_names: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    @property
    def n_retained(self) -> int:
        return self.phi.shape[0]

    def phi_matrices(self):
        """Iterate retained draws as K x M matrices."""
        K, M = self.spec.K, self.spec.M
        for r in range(self.n_retained):
            yield self.phi[r].reshape(K, M, order="F")


def _cholesky_or_raise(P, equation):
    try:
        return np.linalg.cholesky(P)
    except np.linalg.LinAlgError as exc:
        raise PhiDrawError(equation) from exc


def _qr_conditional_draw(rows, targets, rng, equation):
    """Square-root Gaussian regression draw for badly scaled conditionals.

    Stacks prior and weighted-data rows G with targets g so the conditional
    precision is G'G and the mean solves the least-squares problem; the QR
    factor of G is the upper Cholesky factor of the precision without ever
    forming the Gram matrix, which avoids the cancellation that breaks the
    fast path when volatility weights span hundreds of orders of magnitude.
    """
    G = np.vstack(rows)
    g = np.concatenate(targets)
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(g))):
        raise PhiDrawError(equation, "non-finite regression rows")
    try:
        Q, R = qr(G, mode="economic")
    except Exception as exc:
        raise PhiDrawError(equation, "QR failure in the conditional draw") from exc
    sign = np.sign(np.diag(R))
    sign[sign == 0.0] = 1.0
    R = R * sign[:, None]
    Qtg = sign * (Q.T @ g)
    if np.any(np.diag(R) <= 0.0):
        raise PhiDrawError(equation, "rank-deficient conditional draw")
    mean = solve_triangular(R, Qtg, lower=False)
    return mean + solve_triangular(R, rng.standard_normal(R.shape[0]), lower=False)


def draw_phi_triangular(
    Yt, X, Phi, l, H, V, rng, corrected=True, column_constraint=None,
    max_column_tries=1_000,
):
    """Draw each coefficient column from its exact full conditional.

    Parameters
    ----------
    Yt, X : (T, M) and (T, K) design from `build_design`.
    Phi : (K, M) current coefficients (not modified).
    l : covariance-factor free elements.
    H : (T, M) log-variances of the orthogonalized errors.
    V : length-n prior variances in vec(Phi) order.
    rng : numpy.random.Generator
    corrected : bool
        When False, only equation i's own weights enter column i's
        conditional (the uncorrected shortcut, kept for the oracle test).
    column_constraint : callable, optional
        Predicate on the full (K, M) matrix enforcing a truncated prior
        support. Up to `max_column_tries` proposals are drawn from the
        unconstrained conditional and the first admissible one is kept;
        if none is, the column stays at its current value. Because the
        proposal density does not depend on the current point, this
        try-then-stay scheme satisfies detailed balance for the truncated
        conditional exactly. The default places no restriction.

    Returns
    -------
    (K, M) array of new coefficients.
    """
    Yt = np.asarray(Yt, float)
    X = np.asarray(X, float)
    T, M = Yt.shape
    K = X.shape[1]
    W = orthogonalizer(l, M)
    weights = np.exp(-np.asarray(H, float))
    if not np.all(np.isfinite(weights)):
        raise ValueError("non-finite volatility weights")
    Vmat = np.asarray(V, float).reshape(K, M, order="F")
    if np.any(Vmat <= 0):
        raise ValueError("prior variances must be positive")

    with np.errstate(over="ignore", invalid="ignore"):
        XtWX = np.empty((M, K, K))
        for j in range(M):
            XtWX[j] = X.T @ (X * weights[:, j][:, None])

    Phi = np.array(Phi, dtype=float, copy=True)
    F = X @ Phi
    Xi = (Yt - F) @ W.T

    for i in range(M):
        js = [j for j in (range(i, M) if corrected else (i,)) if W[j, i] != 0.0]
        with np.errstate(over="ignore", invalid="ignore"):
            P = np.diag(1.0 / Vmat[:, i])
            bvec = np.zeros(K)
            cs = {}
            for j in js:
                w_ji = W[j, i]
                P += w_ji**2 * XtWX[j]
                cs[j] = Xi[:, j] + w_ji * F[:, i]
                bvec += w_ji * (X.T @ (weights[:, j] * cs[j]))
        use_qr = not (np.all(np.isfinite(P)) and np.all(np.isfinite(bvec)))
        L = None
        if not use_qr:
            try:
                L = np.linalg.cholesky(P)
                mean = cho_solve((L, True), bvec)
            except np.linalg.LinAlgError:
                use_qr = True
        if use_qr:
            # extreme volatility spans break the Gram+Cholesky path (it
            # squares the data scale twice); redo the draw in square-root
            # form, which overflows only at twice the exponent range
            half = np.sqrt(weights)
            rows = [np.diag(1.0 / np.sqrt(Vmat[:, i]))]
            targets = [np.zeros(K)]
            for j in js:
                rows.append(W[j, i] * (X * half[:, j][:, None]))
                targets.append(half[:, j] * cs[j])
        for attempt in range(max_column_tries):
            if use_qr:
                new_col = _qr_conditional_draw(rows, targets, rng, i)
            else:
                new_col = mean + solve_triangular(
                    L, rng.standard_normal(K), lower=True, trans="T"
                )
            if column_constraint is None:
                break
            trial = Phi.copy()
            trial[:, i] = new_col
            if column_constraint(trial):
                break
        else:
            new_col = Phi[:, i].copy()  # stay put: see column_constraint docs
        delta = X @ (new_col - Phi[:, i])
        Phi[:, i] = new_col
        F[:, i] += delta
        Xi -= np.outer(delta, W[:, i])
    return Phi


def draw_l(E, H, v_l, rng):
    """Draw the covariance-factor free elements equation by equation.

    Row i of the orthogonalizer solves a heteroskedastic Bayesian
    regression of equation i's residuals on the preceding equations'
    residuals with weights exp(-h_i).
    """
    E = np.asarray(E, float)
    T, M = E.shape
    v_l = np.asarray(v_l, float)
    if v_l.size != n_free_elements(M):
        raise ValueError("prior variance vector has wrong length")
    weights = np.exp(-np.asarray(H, float))
    out = np.empty(v_l.size)
    pos = 0
    for i in range(1, M):
        Z = -E[:, :i]
        with np.errstate(over="ignore", invalid="ignore"):
            ZW = Z * weights[:, i][:, None]
            P = np.diag(1.0 / v_l[pos : pos + i]) + Z.T @ ZW
            bvec = ZW.T @ E[:, i]
        try:
            if not (np.all(np.isfinite(P)) and np.all(np.isfinite(bvec))):
                raise np.linalg.LinAlgError("non-finite conditional precision")
            L = np.linalg.cholesky(P)
            mean = cho_solve((L, True), bvec)
            draw = mean + solve_triangular(
                L, rng.standard_normal(i), lower=True, trans="T"
            )
        except np.linalg.LinAlgError:
            half = np.sqrt(weights[:, i])
            rows = [np.diag(1.0 / np.sqrt(v_l[pos : pos + i])), Z * half[:, None]]
            targets = [np.zeros(i), half * E[:, i]]
            draw = _qr_conditional_draw(rows, targets, rng, i)
        out[pos : pos + i] = draw
        pos += i
    return out


def _init_sv(Xi):
    paths, params = [], []
    for i in range(Xi.shape[1]):
        level = float(np.log(max(np.var(Xi[:, i]), 1e-8)))
        paths.append(SvPath(h=np.full(Xi.shape[0], level), h0=level))
        params.append(SvParams(mu=level, rho=0.86, sigma=1.0))
    return paths, params


@dataclass
class ChainState:
    """Mutable Gibbs state: coefficients, factor, volatilities, priors."""

    Phi: np.ndarray
    l: np.ndarray
    sv_paths: list
    sv_params: list
    H: np.ndarray
    prior_phi: object
    prior_l: object
    rho_accepts: np.ndarray = None

    def __post_init__(self):
        if self.rho_accepts is None:
            self.rho_accepts = np.zeros(len(self.sv_paths))


def gibbs_sweep(
    state: ChainState,
    X,
    Yt,
    spec: VarSpec,
    shrink_idx,
    rng,
    sv_prior: SvPrior = SvPrior(),
    homoskedastic: bool = False,
    iteration: int = -1,
    phi_constraint=None,
) -> ChainState:
    """One full Gibbs iteration, mutating `state` in place.

    Order: coefficient columns, residuals, covariance factor, per-series
    volatility updates on the orthogonalized errors, coefficient-prior
    hyperparameters, factor-prior hyperparameters. `phi_constraint`
    restricts the coefficient draw to a truncated prior support; the
    production chain leaves it unset.
    """
    M = spec.M
    try:
        V = np.full(spec.n, INTERCEPT_VARIANCE)
        V[shrink_idx] = state.prior_phi.prior_variances()
        state.Phi = draw_phi_triangular(
            Yt, X, state.Phi, state.l, state.H, V, rng,
            column_constraint=phi_constraint,
        )
    except Exception as exc:
        raise McmcStepError(iteration, "phi", exc) from exc
    E = Yt - X @ state.Phi
    try:
        if M > 1:
            state.l = draw_l(E, state.H, state.prior_l.prior_variances(), rng)
    except Exception as exc:
        raise McmcStepError(iteration, "l", exc) from exc
    W = orthogonalizer(state.l, M)
    Xi = E @ W.T
    try:
        for i in range(M):
            state.sv_paths[i], state.sv_params[i], acc = sv_update(
                Xi[:, i], state.sv_paths[i], state.sv_params[i], rng, prior=sv_prior,
                homoskedastic=homoskedastic,
            )
            state.rho_accepts[i] += acc
            state.H[:, i] = state.sv_paths[i].h
    except Exception as exc:
        raise McmcStepError(iteration, "sv", exc) from exc
    try:
        beta = state.Phi.flatten(order="F")[shrink_idx]
        state.prior_phi.update(beta, rng)
    except Exception as exc:
        raise McmcStepError(iteration, "phi-prior", exc) from exc
    try:
        if state.l.size:
            state.prior_l.update(state.l, rng)
    except Exception as exc:
        raise McmcStepError(iteration, "l-prior", exc) from exc
    return state


def run_mcmc(
    dataset: Dataset,
    spec: VarSpec,
    phi_prior: PriorConfig = PriorConfig(),
    l_prior: PriorConfig = PriorConfig(family="R2D2", grouping="global"),
    mcmc: McmcConfig = McmcConfig(),
    sv_prior: SvPrior = SvPrior(),
    homoskedastic: bool = False,
) -> PosteriorDraws:
    """Run the full Gibbs sampler and return thinned posterior draws.

    Sweep order per iteration: coefficient columns (corrected triangular
    draw), residuals, covariance factor, per-series volatility updates on
    the orthogonalized errors, then the hyperparameter blocks of the
    coefficient prior and the factor prior.
    """
    X, Yt = build_design(dataset, spec)
    T_eff, K = X.shape
    M = spec.M
    rng = np.random.default_rng(mcmc.seed)

    groups_phi = phi_groups(spec, phi_prior.grouping)
    shrink_idx = phi_shrink_indices(spec)
    prior_phi = make_prior(
        phi_prior.family, groups_phi, t_obs=T_eff, dataset=dataset, spec=spec,
        options=phi_prior.options,
    )
    groups_l = cov_groups(M)
    prior_l = make_prior(l_prior.family, groups_l, t_obs=T_eff, options=l_prior.options)

    Phi = np.zeros((K, M))
    l = np.zeros(n_free_elements(M))
    E = Yt - X @ Phi
    sv_paths, sv_params = _init_sv(E @ orthogonalizer(l, M).T)
    H = np.column_stack([p.h for p in sv_paths])
    state = ChainState(
        Phi=Phi, l=l, sv_paths=sv_paths, sv_params=sv_params, H=H,
        prior_phi=prior_phi, prior_l=prior_l,
    )

    R = mcmc.retained
    out = PosteriorDraws(
        spec=spec,
        phi=np.empty((R, spec.n)),
        l=np.empty((R, l.size)),
        sv_params=np.empty((R, M, 3)),
        h_last=np.empty((R, M)),
        hyper_phi=np.empty((R, len(prior_phi.hyper_names()))),
        hyper_l=np.empty((R, len(prior_l.hyper_names()))),
        hyper_phi_names=tuple(prior_phi.hyper_names()),
        hyper_l_names=tuple(prior_l.hyper_names()),
    )
    kept = 0

    total = mcmc.burnin + mcmc.draws
    for it in range(total):
        gibbs_sweep(
            state, X, Yt, spec, shrink_idx, rng, sv_prior=sv_prior,
            homoskedastic=homoskedastic, iteration=it,
        )
        d = it - mcmc.burnin
        if d >= 0 and (d + 1) % mcmc.thin == 0 and kept < R:
            phi_vec = state.Phi.flatten(order="F")
            if not np.all(np.isfinite(phi_vec)):
                raise McmcStepError(it, "record", "non-finite coefficient draw")
            out.phi[kept] = phi_vec
            out.l[kept] = state.l
            out.sv_params[kept] = [[p.mu, p.rho, p.sigma] for p in state.sv_params]
            out.h_last[kept] = [p.h[-1] for p in state.sv_paths]
            out.hyper_phi[kept] = prior_phi.hyper_values()
            out.hyper_l[kept] = prior_l.hyper_values()
            kept += 1

    out.diagnostics = {
        "iterations": total,
        "rho_accept_rate": (state.rho_accepts / total).tolist(),
        "clamp_count_phi": prior_phi.clamp_count,
        "clamp_count_l": prior_l.clamp_count,
        "seed": mcmc.seed,
    }
    return out


# --- persistence ------------------------------------------------------------

_MAGIC = b"BVSVDRAW"
_VERSION = 1


def save_draws(draws: PosteriorDraws, path) -> None:
    """Write draws to the flat binary container.

    Layout: 8 magic bytes, uint32 version, ten uint32 dimension fields
    (M, p, intercept, K, n, n_l, retained, n_hyper_phi, n_hyper_l,
    name-block length), a UTF-8 name block (newline-separated hyper names,
    phi block then l block separated by an empty line), then retained
    records in draw-major order as little-endian float64: phi (n), l (n_l),
    sv params (M*3), h_last (M), hyper_phi, hyper_l.
    """
    spec = draws.spec
    names_blob = ("\n".join(draws.hyper_phi_names) + "\n\n" + "\n".join(draws.hyper_l_names)).encode()
    R = draws.n_retained
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(
            struct.pack(
                "<10I",
                spec.M,
                spec.p,
                int(spec.intercept),
                spec.K,
                spec.n,
                draws.l.shape[1],
                R,
                draws.hyper_phi.shape[1],
                draws.hyper_l.shape[1],
                len(names_blob),
            )
        )
        fh.write(names_blob)
        rec = np.hstack(
            [
                draws.phi,
                draws.l,
                draws.sv_params.reshape(R, -1),
                draws.h_last,
                draws.hyper_phi,
                draws.hyper_l,
            ]
        )
        fh.write(np.ascontiguousarray(rec, dtype="<f8").tobytes())


def load_draws(path) -> PosteriorDraws:
    """Read a container written by `save_draws`, validating the header."""
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise ValueError("not a draws container (bad magic bytes)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        M, p, intercept, K, n, n_l, R, nh_phi, nh_l, blob_len = struct.unpack(
            "<10I", fh.read(40)
        )
        blob = fh.read(blob_len).decode()
        payload = np.frombuffer(fh.read(), dtype="<f8")
    spec = VarSpec(M=M, p=p, intercept=bool(intercept))
    if spec.K != K or spec.n != n:
        raise ValueError("inconsistent dimension header")
    width = n + n_l + 3 * M + M + nh_phi + nh_l
    if payload.size != R * width:
        raise ValueError("container payload truncated")
    rec = payload.reshape(R, width)
    parts = np.cumsum([n, n_l, 3 * M, M, nh_phi, nh_l])[:-1]
    phi, l, svp, h_last, hyper_phi, hyper_l = np.hsplit(rec, parts)
    phi_names, _, l_names = blob.partition("\n\n")
    return PosteriorDraws(
        spec=spec,
        phi=phi.copy(),
        l=l.copy(),
        sv_params=svp.reshape(R, M, 3).copy(),
        h_last=h_last.copy(),
        hyper_phi=hyper_phi.copy(),
        hyper_l=hyper_l.copy(),
        hyper_phi_names=tuple(s for s in phi_names.split("\n") if s),
        hyper_l_names=tuple(s for s in l_names.split("\n") if s),
    )


def coefficient_names(spec: VarSpec, names=None):
    """vec(Phi)-ordered labels like 'y1<-y2[lag1]' and 'y1<-const'."""
    names = list(names) if names else [f"y{i+1}" for i in range(spec.M)]
    out = []
    for i in range(spec.M):
        for k in range(spec.K):
            if spec.intercept and k == spec.K - 1:
                out.append(f"{names[i]}<-const")
            else:
                lag, src = k // spec.M + 1, k % spec.M
                out.append(f"{names[i]}<-{names[src]}[lag{lag}]")
    return out


def write_summary_csv(draws: PosteriorDraws, path, names=None) -> None:
    """Posterior summary per coefficient at 17 significant digits."""
    labels = coefficient_names(draws.spec, names)
    qs = np.quantile(draws.phi, [0.05, 0.25, 0.5, 0.75, 0.95], axis=0)
    mean = draws.phi.mean(axis=0)
    sd = draws.phi.std(axis=0, ddof=1) if draws.n_retained > 1 else np.zeros_like(mean)
    with open(path, "w") as fh:
        fh.write("coefficient,mean,sd,q05,q25,median,q75,q95\n")
        for j, lab in enumerate(labels):
            row = [mean[j], sd[j], qs[0, j], qs[1, j], qs[2, j], qs[3, j], qs[4, j]]
            fh.write(lab + "," + ",".join(f"{v:.17g}" for v in row) + "\n")


def read_summary_csv(path):
    """Parse a summary CSV back into (labels, column dict of float arrays)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        labels, cols = [], {h: [] for h in header[1:]}
        for line in fh:
            parts = line.rstrip("\n").split(",")
            labels.append(parts[0])
            for h, v in zip(header[1:], parts[1:]):
                cols[h].append(float(v))
    return labels, {h: np.asarray(v) for h, v in cols.items()}
