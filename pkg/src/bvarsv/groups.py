"""Coefficient grouping for (semi-)global shrinkage priors.

A prior state operates on a flat vector of "shrinkable" coefficients. For
the VAR coefficient matrix that vector is vec(Phi) with the intercept
coordinates removed; for the covariance factor it is the free-element
vector itself. Groups partition the shrinkable coordinates; the global
variants are the special case of a single group.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import VarSpec, n_free_elements

__all__ = ["CoefGroups", "phi_groups", "cov_groups", "phi_shrink_indices"]

GROUPING_MODES = ("global", "semi-global", "semi-global-local")


@dataclass(frozen=True)
class CoefGroups:
    """Partition of shrinkable coefficients with per-coefficient labels.

    Attributes
    ----------
    n : int
        Number of shrinkable coefficients.
    group_id : ndarray of int
        Group membership per coefficient, values in [0, n_groups).
    labels : tuple of str
        One label per group.
    lag : ndarray of int
        Lag order per coefficient (0 for covariance elements).
    own : ndarray of bool
        True for own-lag coefficients.
    equation, source : ndarray of int
        Response-equation and source-variable indices per coefficient.
    """

    n: int
    group_id: np.ndarray
    labels: tuple
    lag: np.ndarray
    own: np.ndarray
    equation: np.ndarray
    source: np.ndarray

    @property
    def n_groups(self) -> int:
        return len(self.labels)

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.group_id, minlength=self.n_groups)

    def members(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.group_id == g)

    def group_sum(self, values: np.ndarray) -> np.ndarray:
        """Per-group sums of a per-coefficient vector."""
        return np.bincount(self.group_id, weights=values, minlength=self.n_groups)


def phi_shrink_indices(spec: VarSpec) -> np.ndarray:
    """Indices into vec(Phi) (column-major) of the lag coefficients."""
    K, M = spec.K, spec.M
    rows = np.arange(spec.n) % K
    return np.flatnonzero(rows < spec.n_lag_rows)


def phi_groups(spec: VarSpec, mode: str = "global") -> CoefGroups:
    """Grouping of the M^2 p lag coefficients of a VAR.

    ``global`` puts everything in one group; the semi-global modes create
    one group per (lag, own/cross) pair.
    """
    if mode not in GROUPING_MODES:
        raise ValueError(f"unknown grouping mode {mode!r}; choose from {GROUPING_MODES}")
    K, M = spec.K, spec.M
    idx = phi_shrink_indices(spec)
    rows = idx % K
    equation = idx // K
    lag = rows // M + 1
    source = rows % M
    own = source == equation
    if mode == "global":
        group_id = np.zeros(idx.size, dtype=int)
        labels = ("all",)
    else:
        raw_id = (lag - 1) * 2 + (~own).astype(int)
        raw_labels = [
            f"lag{r}:{cls}" for r in range(1, spec.p + 1) for cls in ("own", "cross")
        ]
        # drop empty groups (a univariate system has no cross-lag group)
        present = np.unique(raw_id)
        remap = {g: i for i, g in enumerate(present)}
        group_id = np.array([remap[g] for g in raw_id], dtype=int)
        labels = tuple(raw_labels[g] for g in present)
    return CoefGroups(
        n=idx.size,
        group_id=group_id,
        labels=labels,
        lag=lag.astype(int),
        own=own,
        equation=equation.astype(int),
        source=source.astype(int),
    )


def cov_groups(M: int) -> CoefGroups:
    """Single-group partition of the covariance-factor free elements."""
    n = n_free_elements(M)
    eq = np.concatenate([np.full(i, i) for i in range(1, M)]) if n else np.empty(0, int)
    src = np.concatenate([np.arange(i) for i in range(1, M)]) if n else np.empty(0, int)
    return CoefGroups(
        n=n,
        group_id=np.zeros(n, dtype=int),
        labels=("cov",),
        lag=np.zeros(n, dtype=int),
        own=np.zeros(n, dtype=bool),
        equation=eq.astype(int),
        source=src.astype(int),
    )
