"""VAR data structures and linear-algebra primitives.

Conventions used throughout the package:

* ``Phi`` is the K x M coefficient matrix with rows ordered lag-block-major:
  rows 0..M-1 are the first-lag block, rows M..2M-1 the second, and the
  optional final row is the intercept. ``vec(Phi)`` always means
  column-major flattening (``Phi.flatten(order="F")``), length n = K*M.
* The covariance decomposition is parameterized by the lower unitriangular
  orthogonalizer ``W`` that maps reduced-form errors to orthogonalized
  errors, ``xi_t = W eps_t`` with ``Var(xi_t) = D_t`` diagonal. The free
  elements below the diagonal are stored row-major in a flat vector ``l``
  of length M(M-1)/2. The implied error covariance is
  ``Sigma_t = W^{-1} D_t W^{-T}``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "VarSpec",
    "Dataset",
    "EigenFailure",
    "build_design",
    "make_regressor",
    "companion_matrix",
    "companion_stable",
    "orthogonalizer",
    "free_elements",
    "n_free_elements",
    "sigma_from_factor",
    "reduced_from_structural",
]


class EigenFailure(RuntimeError):
    """Eigen-solver did not converge while checking companion stability."""


@dataclass(frozen=True)
class VarSpec:
    """Model dimensions: M series, lag order p, optional intercept."""

    M: int
    p: int
    intercept: bool = False

    def __post_init__(self):
        if self.M < 1:
            raise ValueError("M must be at least 1")
        if self.p < 1:
            raise ValueError("p must be at least 1")

    @property
    def K(self) -> int:
        """Number of regressors per equation."""
        return self.M * self.p + (1 if self.intercept else 0)

    @property
    def n(self) -> int:
        """Total number of coefficients, K * M."""
        return self.K * self.M

    @property
    def n_lag_rows(self) -> int:
        """Rows of Phi that carry lag coefficients (excludes intercept)."""
        return self.M * self.p


@dataclass(frozen=True)
class Dataset:
    """Observed T x M matrix with naming and transform metadata."""

    Y: np.ndarray
    names: tuple = ()
    dates: tuple = ()
    transforms: tuple = ()

    def __post_init__(self):
        Y = np.asarray(self.Y, dtype=float)
        object.__setattr__(self, "Y", Y)
        if Y.ndim != 2:
            raise ValueError("Y must be a T x M matrix")
        if not np.all(np.isfinite(Y)):
            raise ValueError("dataset contains non-finite values")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"y{i+1}" for i in range(Y.shape[1])))
        if not self.dates:
            object.__setattr__(self, "dates", tuple(str(t) for t in range(Y.shape[0])))

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def M(self) -> int:
        return self.Y.shape[1]

    def head(self, t: int) -> "Dataset":
        """First t observations, keeping metadata aligned."""
        return Dataset(self.Y[:t], self.names, tuple(self.dates[:t]), self.transforms)


def build_design(dataset: Dataset, spec: VarSpec):
    """Stack lagged regressors and aligned responses.

    Returns
    -------
    X : (T-p) x K array
        Row t is (y'_{t-1}, ..., y'_{t-p}[, 1]).
    Yt : (T-p) x M array
        Responses aligned so that Yt = X Phi + E for the generating process.
    """
    Y = dataset.Y
    T, M = Y.shape
    if M != spec.M:
        raise ValueError(f"dataset has {M} series but spec.M = {spec.M}")
    p = spec.p
    if T <= p:
        raise ValueError(f"need T > p, got T={T}, p={p}")
    rows = T - p
    X = np.empty((rows, spec.K))
    for j in range(p):
        X[:, j * M : (j + 1) * M] = Y[p - 1 - j : T - 1 - j]
    if spec.intercept:
        X[:, -1] = 1.0
    Yt = Y[p:]
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(Yt))):
        raise ValueError("design contains non-finite values")
    return X, Yt


def make_regressor(Y: np.ndarray, spec: VarSpec) -> np.ndarray:
    """Regressor vector for the period following the last row of Y."""
    Y = np.asarray(Y, dtype=float)
    if Y.shape[0] < spec.p:
        raise ValueError("need at least p observations to form a regressor")
    x = np.empty(spec.K)
    M = spec.M
    for j in range(spec.p):
        x[j * M : (j + 1) * M] = Y[-1 - j]
    if spec.intercept:
        x[-1] = 1.0
    return x


def companion_matrix(Phi: np.ndarray, spec: VarSpec) -> np.ndarray:
    """Mp x Mp companion matrix of the lag polynomial (intercept excluded)."""
    M, p = spec.M, spec.p
    A = np.asarray(Phi, dtype=float)[: M * p]
    C = np.zeros((M * p, M * p))
    for j in range(p):
        # y_t = sum_j A_j' y_{t-j}: block row uses transposed lag blocks
        C[:M, j * M : (j + 1) * M] = A[j * M : (j + 1) * M].T
    if p > 1:
        C[M:, : M * (p - 1)] = np.eye(M * (p - 1))
    return C


def companion_stable(Phi: np.ndarray, spec: VarSpec, strict: bool = False) -> bool:
    """True iff no companion eigenvalue has modulus greater than one.

    With ``strict=True`` the boundary is pulled to 1 - 1e-8 so that unit
    roots are rejected as well.
    """
    C = companion_matrix(Phi, spec)
    try:
        radius = np.max(np.abs(np.linalg.eigvals(C)))
    except np.linalg.LinAlgError as exc:
        raise EigenFailure("eigenvalue computation did not converge") from exc
    return bool(radius < 1.0 - 1e-8) if strict else bool(radius <= 1.0)


def n_free_elements(M: int) -> int:
    return M * (M - 1) // 2


def orthogonalizer(l: np.ndarray, M: int) -> np.ndarray:
    """Lower unitriangular W with the free elements of `l` filled row-major."""
    l = np.asarray(l, dtype=float)
    if l.size != n_free_elements(M):
        raise ValueError(f"expected {n_free_elements(M)} free elements, got {l.size}")
    W = np.eye(M)
    idx = np.tril_indices(M, k=-1)
    W[idx] = l
    return W


def free_elements(W: np.ndarray) -> np.ndarray:
    """Row-major strict lower triangle of W (inverse of `orthogonalizer`)."""
    M = W.shape[0]
    return np.asarray(W)[np.tril_indices(M, k=-1)].copy()


def sigma_from_factor(l: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Error covariance W^{-1} diag(d) W^{-T} for positive variances d."""
    d = np.asarray(d, dtype=float)
    M = d.size
    W = orthogonalizer(l, M)
    Winv = np.linalg.inv(W)
    S = Winv @ np.diag(d) @ Winv.T
    return 0.5 * (S + S.T)


def reduced_from_structural(B: np.ndarray, l: np.ndarray) -> np.ndarray:
    """Map structural coefficients B to reduced-form Phi.

    Solves W Phi' = B' for the lower unitriangular orthogonalizer W built
    from ``l``; equivalently Phi = B W^{-T}, whose first column equals the
    first column of B.
    """
    B = np.asarray(B, dtype=float)
    M = B.shape[1]
    W = orthogonalizer(l, M)
    PhiT = solve_triangular(W, B.T, lower=True, unit_diagonal=True)
    return PhiT.T
