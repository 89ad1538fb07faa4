"""Shrinkage-prior states and their Gibbs hyperparameter updates.

Every family exposes the same surface: ``update(beta, rng)`` performs one
sweep of the hyperparameter conditionals given the current coefficient
vector, ``prior_variances()`` returns the implied diagonal prior variances,
and ``draw_prior(rng)`` refreshes the hyperparameters from their prior
(ancestral sampling, used by prior simulation and the simulator-consistency
tests).

The updates operate on the flat vector of shrinkable coefficients defined
by a :class:`~bvarsv.groups.CoefGroups` partition; semi-global variants are
plain group structure, so a single group reproduces the global variant
draw for draw.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit, gammaln

from .dists import sample_dirichlet_symmetric, sample_discrete, sample_gamma_log, sample_gig
from .groups import CoefGroups, cov_groups, phi_groups, phi_shrink_indices
from .model import Dataset, VarSpec, build_design

__all__ = [
    "BETA_FLOOR",
    "R2d2State",
    "DlState",
    "SsvsState",
    "HmState",
    "HierNormalState",
    "FlatState",
    "r2d2_update",
    "dl_update",
    "ssvs_update",
    "hm_update",
    "prior_variances",
    "ssvs_semiautomatic_scales",
    "hm_scale_constants",
    "make_prior",
    "INTERCEPT_VARIANCE",
]

# Coefficients this small are floored before hyperparameter updates. The
# floor only guards exact zeros / subnormal squares; all conditionals are
# sampled in GIG form, which is numerically safe far below any statistically
# visible magnitude.
BETA_FLOOR = 1e-140

# Fixed prior variance of the (unshrunk) intercept coefficients.
INTERCEPT_VARIANCE = 100.0

_TINY = 1e-300


def _floored_abs(beta, state):
    b = np.abs(np.asarray(beta, dtype=float))
    n_clamped = int(np.count_nonzero(b < BETA_FLOOR))
    if n_clamped:
        state.clamp_count += n_clamped
        b = np.maximum(b, BETA_FLOOR)
    return b


def r2d2_api_rule(b, n_group, t_obs):
    """Dirichlet concentration from the consistency rule 1/(n^{b/2} T^{b/2} log T)."""
    return 1.0 / (n_group ** (b / 2.0) * t_obs ** (b / 2.0) * np.log(t_obs))


@dataclass
class R2d2State:
    """Gaussian scale mixture with Dirichlet-decomposed beta-prime variance.

    Prior variance of coefficient j is psi_j * theta_j * zeta_g / 2.
    """

    groups: CoefGroups
    t_obs: int
    b_grid: np.ndarray
    learn_b: bool = True
    psi: np.ndarray = None
    theta: np.ndarray = None
    zeta: np.ndarray = None
    xi: np.ndarray = None
    b: np.ndarray = None
    clamp_count: int = 0

    def __post_init__(self):
        G, n = self.groups.n_groups, self.groups.n
        if self.t_obs < 2:
            raise ValueError("R2D2 needs at least 2 observations (log T > 0)")
        self.b_grid = np.asarray(self.b_grid, dtype=float)
        if self.b is None:
            mid = self.b_grid[self.b_grid.size // 2] if self.learn_b else self.b_grid[0]
            self.b = np.full(G, mid)
        if self.psi is None:
            self.psi = np.full(n, 2.0)
        if self.theta is None:
            self.theta = 1.0 / self.groups.sizes[self.groups.group_id].astype(float)
        if self.xi is None:
            self.xi = self.b.copy()
        if self.zeta is None:
            self.zeta = self.a / np.maximum(self.xi, _TINY)

    @property
    def a_pi(self):
        return r2d2_api_rule(self.b, self.groups.sizes, self.t_obs)

    @property
    def a(self):
        return self.groups.sizes * self.a_pi

    def prior_variances(self):
        return self.psi * self.theta * self.zeta[self.groups.group_id] / 2.0

    def update(self, beta, rng):
        g = self.groups
        gid = g.group_id
        sizes = g.sizes.astype(float)
        absb = _floored_abs(beta, self)
        b2 = absb**2
        a_pi, a = self.a_pi, self.a

        # psi_j | theta, zeta: GIG(1/2, 1, 2 beta^2/(theta zeta)); equals the
        # reciprocal of the inverse-Gaussian draw stated for 1/psi_j
        chi = 2.0 * b2 / np.maximum(self.theta * self.zeta[gid], _TINY)
        self.psi = np.maximum(sample_gig(0.5, 1.0, np.maximum(chi, _TINY), rng), _TINY)

        # zeta_g | psi, theta, xi: GIG(a - n_g/2, 2 xi, sum 2 beta^2/(psi theta))
        chi_g = g.group_sum(2.0 * b2 / np.maximum(self.psi * self.theta, _TINY))
        self.zeta = np.maximum(
            sample_gig(a - sizes / 2.0, 2.0 * self.xi, np.maximum(chi_g, _TINY), rng), _TINY
        )

        # xi_g | zeta, b: Gamma(a + b, rate 1 + zeta)
        self.xi = np.maximum(rng.gamma(a + self.b) / (1.0 + self.zeta), _TINY)

        # (theta, zeta) | psi, xi jointly: T_j ~ GIG(a_pi - 1/2, 2 xi, 2 b^2/psi),
        # theta = T/sum, zeta = sum. Setting zeta from the block draw keeps the
        # pair consistent with the freshly drawn theta.
        T = sample_gig(
            a_pi[gid] - 0.5,
            2.0 * self.xi[gid],
            np.maximum(2.0 * b2 / self.psi, _TINY),
            rng,
        )
        T = np.maximum(T, _TINY)
        Tsum = g.group_sum(T)
        self.theta = np.maximum(T / Tsum[gid], _TINY)
        self.zeta = np.maximum(Tsum, _TINY)

        if self.learn_b:
            log_theta_sum = g.group_sum(np.log(self.theta))
            for gi in range(g.n_groups):
                ng = sizes[gi]
                a_pi_c = r2d2_api_rule(self.b_grid, ng, self.t_obs)
                a_c = ng * a_pi_c
                logw = (
                    -ng * gammaln(a_pi_c)
                    + (a_pi_c - 1.0) * log_theta_sum[gi]
                    + a_c * np.log(self.xi[gi])
                    + (a_c - 1.0) * np.log(self.zeta[gi])
                    - gammaln(self.b_grid)
                    + (self.b_grid - 1.0) * np.log(self.xi[gi])
                )
                self.b[gi] = self.b_grid[sample_discrete(logw, rng)]
        return self

    def draw_prior(self, rng):
        g = self.groups
        sizes = g.sizes.astype(float)
        if self.learn_b:
            self.b = self.b_grid[rng.integers(0, self.b_grid.size, size=g.n_groups)]
        a_pi, a = self.a_pi, self.a
        self.xi = np.maximum(np.exp(sample_gamma_log(self.b, rng)), _TINY)
        self.zeta = np.maximum(np.exp(sample_gamma_log(a, rng, rate=self.xi)), _TINY)
        theta = np.empty(g.n)
        for gi in range(g.n_groups):
            m = g.members(gi)
            theta[m] = sample_dirichlet_symmetric(a_pi[gi], m.size, rng)
        self.theta = np.maximum(theta, _TINY)
        self.psi = np.maximum(rng.exponential(2.0, size=g.n), _TINY)
        return self

    def hyper_names(self):
        out = []
        for lab in self.groups.labels:
            out += [f"r2d2.zeta[{lab}]", f"r2d2.xi[{lab}]", f"r2d2.b[{lab}]"]
        return out

    def hyper_values(self):
        return np.column_stack([self.zeta, self.xi, self.b]).ravel()


@dataclass
class DlState:
    """Dirichlet-Laplace prior; variance of coefficient j is psi_j theta_j^2 zeta_g^2."""

    groups: CoefGroups
    a_grid: np.ndarray
    learn_a: bool = True
    psi: np.ndarray = None
    theta: np.ndarray = None
    zeta: np.ndarray = None
    a: np.ndarray = None
    clamp_count: int = 0

    def __post_init__(self):
        G, n = self.groups.n_groups, self.groups.n
        self.a_grid = np.atleast_1d(np.asarray(self.a_grid, dtype=float))
        if self.a is None:
            mid = self.a_grid[self.a_grid.size // 2] if self.learn_a else self.a_grid[0]
            self.a = np.full(G, mid)
        if self.psi is None:
            self.psi = np.full(n, 2.0)
        if self.theta is None:
            self.theta = 1.0 / self.groups.sizes[self.groups.group_id].astype(float)
        if self.zeta is None:
            self.zeta = 2.0 * self.groups.sizes * self.a

    def prior_variances(self):
        return self.psi * self.theta**2 * self.zeta[self.groups.group_id] ** 2

    def update(self, beta, rng):
        g = self.groups
        gid = g.group_id
        sizes = g.sizes.astype(float)
        absb = _floored_abs(beta, self)

        # (theta, zeta) | beta, a jointly: T_j ~ GIG(a - 1, 1, 2|beta_j|),
        # theta = T/sum, zeta = sum. This block draw integrates psi out, so
        # psi must be refreshed afterwards and before anything reads it.
        T = np.maximum(sample_gig(self.a[gid] - 1.0, 1.0, 2.0 * absb, rng), _TINY)
        Tsum = g.group_sum(T)
        self.theta = np.maximum(T / Tsum[gid], _TINY)
        self.zeta = np.maximum(Tsum, _TINY)

        # psi_j | theta, zeta, beta: GIG(1/2, 1, beta^2/(theta zeta)^2)
        chi = (absb / np.maximum(self.theta * self.zeta[gid], _TINY)) ** 2
        self.psi = np.maximum(sample_gig(0.5, 1.0, np.maximum(chi, _TINY), rng), _TINY)

        if self.learn_a:
            log_theta_sum = g.group_sum(np.log(self.theta))
            for gi in range(g.n_groups):
                ng = sizes[gi]
                na = ng * self.a_grid
                logw = (
                    -ng * gammaln(self.a_grid)
                    + (self.a_grid - 1.0) * log_theta_sum[gi]
                    + na * np.log(0.5)
                    + (na - 1.0) * np.log(self.zeta[gi])
                )
                self.a[gi] = self.a_grid[sample_discrete(logw, rng)]
        return self

    def draw_prior(self, rng):
        g = self.groups
        if self.learn_a:
            self.a = self.a_grid[rng.integers(0, self.a_grid.size, size=g.n_groups)]
        theta = np.empty(g.n)
        for gi in range(g.n_groups):
            m = g.members(gi)
            theta[m] = sample_dirichlet_symmetric(self.a[gi], m.size, rng)
        self.theta = np.maximum(theta, _TINY)
        self.zeta = np.maximum(
            np.exp(sample_gamma_log(self.groups.sizes * self.a, rng, rate=0.5)), _TINY
        )
        self.psi = np.maximum(rng.exponential(2.0, size=g.n), _TINY)
        return self

    def hyper_names(self):
        out = []
        for lab in self.groups.labels:
            out += [f"dl.zeta[{lab}]", f"dl.a[{lab}]"]
        return out

    def hyper_values(self):
        return np.column_stack([self.zeta, self.a]).ravel()


@dataclass
class SsvsState:
    """Spike-and-slab mixture of two Gaussians with inclusion indicators."""

    groups: CoefGroups
    tau0: np.ndarray
    tau1: np.ndarray
    learn_p: bool = False
    s1: float = 1.0
    s2: float = 1.0
    p_incl: np.ndarray = None
    gamma: np.ndarray = None
    clamp_count: int = 0

    def __post_init__(self):
        self.tau0 = np.broadcast_to(np.asarray(self.tau0, float), (self.groups.n,)).copy()
        self.tau1 = np.broadcast_to(np.asarray(self.tau1, float), (self.groups.n,)).copy()
        if np.any(self.tau0 >= self.tau1):
            raise ValueError("spike scales tau0 must be strictly below slab scales tau1")
        if self.p_incl is None:
            default = self.s1 / (self.s1 + self.s2)
            self.p_incl = np.full(self.groups.n_groups, default)
        if self.gamma is None:
            self.gamma = np.ones(self.groups.n, dtype=bool)

    def prior_variances(self):
        return np.where(self.gamma, self.tau1**2, self.tau0**2)

    def update(self, beta, rng):
        g = self.groups
        beta = np.asarray(beta, dtype=float)
        p = self.p_incl[g.group_id]
        log_odds = (
            np.log(p)
            - np.log1p(-p)
            + np.log(self.tau0 / self.tau1)
            + 0.5 * beta**2 * (1.0 / self.tau0**2 - 1.0 / self.tau1**2)
        )
        self.gamma = rng.random(g.n) < expit(log_odds)
        if self.learn_p:
            k = g.group_sum(self.gamma.astype(float))
            n_g = g.sizes.astype(float)
            self.p_incl = rng.beta(self.s1 + k, self.s2 + n_g - k)
        return self

    def draw_prior(self, rng):
        if self.learn_p:
            self.p_incl = rng.beta(
                np.full(self.groups.n_groups, self.s1),
                np.full(self.groups.n_groups, self.s2),
            )
        self.gamma = rng.random(self.groups.n) < self.p_incl[self.groups.group_id]
        return self

    def hyper_names(self):
        return [f"ssvs.p[{lab}]" for lab in self.groups.labels] + ["ssvs.share_included"]

    def hyper_values(self):
        return np.append(self.p_incl, self.gamma.mean())


@dataclass
class HmState:
    """Hierarchical Minnesota prior: lag-decaying scales, two learned shrinkers.

    Variance of coefficient j is lambda1 * rtilde_j (own-lag) or
    lambda2 * rtilde_j (cross-lag), with rtilde fixed by the lag order and
    the AR(6) residual-variance ratios.
    """

    groups: CoefGroups
    sigma_hat: np.ndarray
    c1: float = 0.01
    d1: float = 0.01
    c2: float = 0.01
    d2: float = 0.01
    ratio_of: str = "variance"
    lam: np.ndarray = None
    scale_const: np.ndarray = field(default=None, repr=False)
    clamp_count: int = 0

    def __post_init__(self):
        g = self.groups
        self.sigma_hat = np.asarray(self.sigma_hat, dtype=float)
        if self.ratio_of not in ("variance", "sd"):
            raise ValueError("ratio_of must be 'variance' or 'sd'")
        if self.scale_const is None:
            sig = self.sigma_hat if self.ratio_of == "variance" else np.sqrt(self.sigma_hat)
            rt = 1.0 / g.lag.astype(float) ** 2
            cross = ~g.own
            rt[cross] *= sig[g.equation[cross]] / sig[g.source[cross]]
            self.scale_const = rt
        if self.lam is None:
            self.lam = np.array([self.c1 / self.d1, self.c2 / self.d2])

    def prior_variances(self):
        lam_per = np.where(self.groups.own, self.lam[0], self.lam[1])
        return lam_per * self.scale_const

    def update(self, beta, rng):
        absb = _floored_abs(beta, self)
        ratio = absb**2 / self.scale_const
        for i, mask in enumerate((self.groups.own, ~self.groups.own)):
            if not np.any(mask):
                continue
            c, d = (self.c1, self.d1) if i == 0 else (self.c2, self.d2)
            chi = max(float(ratio[mask].sum()), _TINY)
            self.lam[i] = sample_gig(c - mask.sum() / 2.0, 2.0 * d, chi, rng)
        return self

    def draw_prior(self, rng):
        self.lam = np.array(
            [
                np.exp(sample_gamma_log(np.array([self.c1]), rng, rate=self.d1)[0]),
                np.exp(sample_gamma_log(np.array([self.c2]), rng, rate=self.d2)[0]),
            ]
        )
        self.lam = np.maximum(self.lam, _TINY)
        return self

    def hyper_names(self):
        return ["hm.lambda1", "hm.lambda2"]

    def hyper_values(self):
        return self.lam.copy()


@dataclass
class HierNormalState:
    """Conditionally normal elements with one gamma-hyperprior variance.

    The dense covariance-factor prior: coefficients ~ N(0, lambda),
    lambda ~ G(c, d).
    """

    groups: CoefGroups
    c: float = 0.01
    d: float = 0.01
    lam: float = None
    clamp_count: int = 0

    def __post_init__(self):
        if self.lam is None:
            self.lam = self.c / self.d

    def prior_variances(self):
        return np.full(self.groups.n, self.lam)

    def update(self, beta, rng):
        absb = _floored_abs(beta, self)
        chi = max(float((absb**2).sum()), _TINY)
        self.lam = float(sample_gig(self.c - self.groups.n / 2.0, 2.0 * self.d, chi, rng))
        return self

    def draw_prior(self, rng):
        self.lam = max(float(np.exp(sample_gamma_log(np.array([self.c]), rng, rate=self.d)[0])), _TINY)
        return self

    def hyper_names(self):
        return ["hn.lambda"]

    def hyper_values(self):
        return np.array([self.lam])


@dataclass
class FlatState:
    """Fixed prior variances, no hyperparameters."""

    groups: CoefGroups
    v: float = 10.0
    clamp_count: int = 0

    def prior_variances(self):
        return np.full(self.groups.n, self.v)

    def update(self, beta, rng):
        return self

    def draw_prior(self, rng):
        return self

    def hyper_names(self):
        return []

    def hyper_values(self):
        return np.empty(0)


# spec-style functional aliases


def r2d2_update(state: R2d2State, beta, groups: CoefGroups, rng) -> R2d2State:
    _check_groups(state, groups, beta)
    return state.update(beta, rng)


def dl_update(state: DlState, beta, groups: CoefGroups, rng) -> DlState:
    _check_groups(state, groups, beta)
    return state.update(beta, rng)


def ssvs_update(state: SsvsState, beta, groups: CoefGroups, rng) -> SsvsState:
    _check_groups(state, groups, beta)
    return state.update(beta, rng)


def hm_update(state: HmState, beta, groups: CoefGroups, rng) -> HmState:
    _check_groups(state, groups, beta)
    return state.update(beta, rng)


def prior_variances(state, groups: CoefGroups = None) -> np.ndarray:
    if groups is not None and groups.n != state.groups.n:
        raise ValueError("groups inconsistent with state")
    return state.prior_variances()


def _check_groups(state, groups, beta):
    if groups.n != state.groups.n or np.asarray(beta).size != state.groups.n:
        raise ValueError("beta/groups dimensions inconsistent with state")


def ssvs_semiautomatic_scales(dataset: Dataset, spec: VarSpec, c0=0.01, c1=100.0):
    """Spike/slab scales from the closed-form flat normal-Wishart posterior.

    tau0 = c0 * sd, tau1 = c1 * sd, where sd is the posterior standard
    deviation of each lag coefficient under a conjugate flat prior:
    Var(phi_{k,i}) = E[Sigma_ii | data] * (X'X)^{-1}_{kk} with
    E[Sigma | data] = S / (T - K - M - 1).
    """
    X, Yt = build_design(dataset, spec)
    t_eff, K = X.shape
    M = spec.M
    dof = t_eff - K - M - 1
    if dof <= 0:
        raise ValueError("flat normal-Wishart posterior variance is not finite (T too small)")
    XtX = X.T @ X
    try:
        XtX_inv = np.linalg.inv(XtX)
    except np.linalg.LinAlgError as exc:
        raise ValueError("singular design in semiautomatic scales") from exc
    B_hat = XtX_inv @ (X.T @ Yt)
    resid = Yt - X @ B_hat
    S = resid.T @ resid
    var = np.outer(np.diag(XtX_inv), np.diag(S) / dof)  # K x M, vec-compatible
    var_vec = var.flatten(order="F")
    shrink = phi_shrink_indices(spec)
    sd = np.sqrt(var_vec[shrink])
    if not np.all(np.isfinite(sd)):
        raise ValueError("non-finite posterior variance in semiautomatic scales")
    return c0 * sd, c1 * sd


def hm_scale_constants(dataset: Dataset, ar_order: int = 6) -> np.ndarray:
    """Residual variance of a univariate AR fit (with intercept) per series."""
    Y = dataset.Y
    T, M = Y.shape
    rows = T - ar_order
    if rows <= ar_order + 1:
        raise ValueError(f"need more than {2 * ar_order + 1} observations for the AR({ar_order}) fits")
    out = np.empty(M)
    for i in range(M):
        y = Y[:, i]
        Z = np.column_stack(
            [np.ones(rows)] + [y[ar_order - j - 1 : T - j - 1] for j in range(ar_order)]
        )
        resp = y[ar_order:]
        if np.linalg.matrix_rank(Z) < Z.shape[1]:
            raise ValueError(f"singular AR({ar_order}) design for series {i}")
        coef, _, _, _ = np.linalg.lstsq(Z, resp, rcond=None)
        resid = resp - Z @ coef
        dof = rows - Z.shape[1]
        if dof <= 0:
            raise ValueError(f"no residual degrees of freedom in AR({ar_order}) fit")
        out[i] = resid @ resid / dof
        if not np.isfinite(out[i]) or out[i] <= 0:
            raise ValueError(f"degenerate AR({ar_order}) residual variance for series {i}")
    return out


def default_dl_grid(n_group: int, size: int = 1000) -> np.ndarray:
    """1000 support points on [1/n, 1/2] for the DL concentration."""
    return np.linspace(1.0 / n_group, 0.5, size)


def default_b_grid(size: int = 100) -> np.ndarray:
    """100 equispaced support points on [0.01, 1] for the R2D2 shape."""
    return np.linspace(0.01, 1.0, size)


def make_prior(
    family: str,
    groups: CoefGroups,
    t_obs: int,
    dataset: Dataset = None,
    spec: VarSpec = None,
    options: dict = None,
):
    """Construct a prior state for a coefficient block.

    Parameters
    ----------
    family : str
        One of R2D2, DL, SSVS, HM, HN, FLAT (case-insensitive).
    groups : CoefGroups
        Partition of the shrinkable coefficients.
    t_obs : int
        Estimation-sample length used by the R2D2 concentration rule.
    dataset, spec : optional
        Required by SSVS semiautomatic scales and by HM scale constants.
    options : dict, optional
        Family-specific settings, see the state classes.
    """
    fam = family.upper()
    opt = dict(options or {})
    if fam == "R2D2":
        learn = opt.pop("b_mode", "learned") == "learned"
        grid = np.asarray(opt.pop("b_grid", default_b_grid()), dtype=float)
        if not learn:
            grid = np.atleast_1d(np.asarray(opt.pop("b_value", 0.5), dtype=float))
        return R2d2State(groups=groups, t_obs=t_obs, b_grid=grid, learn_b=learn, **opt)
    if fam == "DL":
        learn = opt.pop("a_mode", "learned") == "learned"
        if learn:
            grid = np.asarray(
                opt.pop("a_grid", default_dl_grid(int(groups.sizes.max()))), dtype=float
            )
        else:
            fallback = 1.0 / (spec.K if spec is not None else groups.n)
            grid = np.atleast_1d(np.asarray(opt.pop("a_value", fallback), dtype=float))
        return DlState(groups=groups, a_grid=grid, learn_a=learn, **opt)
    if fam == "SSVS":
        c0 = opt.pop("c0", 0.01)
        c1 = opt.pop("c1", 100.0)
        if "tau0" in opt and "tau1" in opt:
            tau0, tau1 = opt.pop("tau0"), opt.pop("tau1")
        else:
            if dataset is None or spec is None:
                raise ValueError("SSVS semiautomatic scales need dataset and spec")
            tau0, tau1 = ssvs_semiautomatic_scales(dataset, spec, c0=c0, c1=c1)
        learn = opt.pop("p_mode", "fixed") == "learned"
        p_val = opt.pop("p_value", 0.5)
        st = SsvsState(groups=groups, tau0=tau0, tau1=tau1, learn_p=learn, **opt)
        if not learn:
            st.p_incl = np.full(groups.n_groups, float(p_val))
        return st
    if fam == "HM":
        if "sigma_hat" in opt:
            sigma_hat = np.asarray(opt.pop("sigma_hat"), dtype=float)
        else:
            if dataset is None:
                raise ValueError("HM scale constants need the dataset")
            sigma_hat = hm_scale_constants(dataset)
        return HmState(groups=groups, sigma_hat=sigma_hat, **opt)
    if fam == "HN":
        return HierNormalState(groups=groups, **opt)
    if fam == "FLAT":
        return FlatState(groups=groups, **opt)
    raise ValueError(f"unknown prior family {family!r}")
