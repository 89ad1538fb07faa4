"""Dynamic model averaging over a panel of log predictive likelihoods.

The whole recursion lives in log space: the prediction step raises the
previous updated weights to the forgetting power alpha and renormalizes,
the update step adds the period's log predictive likelihoods and
renormalizes. Joint predictive likelihoods of larger systems span hundreds
of log units, so linear-space weights would degenerate immediately.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .forecast import ScorePanel

__all__ = ["DmaState", "dma_run"]

# weights are floored here before the forgetting power so that a model with
# one catastrophic period is never absorbed at exactly zero forever
_WEIGHT_FLOOR_LOG = np.log(1e-300)


@dataclass
class DmaState:
    """Weight trajectories and per-window scores of the DMA recursion."""

    model_names: list
    window_labels: list
    alpha: float
    predicted: np.ndarray  # (T, M) omega_{t|t-1}
    updated: np.ndarray  # (T, M) omega_{t|t}
    log_scores: np.ndarray  # (T,) log sum_i omega_{t|t-1,i} PL_{t|t-1,i}

    def weights_to_csv(self, path, kind="updated") -> None:
        W = self.updated if kind == "updated" else self.predicted
        with open(path, "w") as fh:
            fh.write("window," + ",".join(self.model_names) + "\n")
            for lab, row in zip(self.window_labels, W):
                fh.write(lab + "," + ",".join(f"{v:.17g}" for v in row) + "\n")

    def scores_to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("window,dma_log_score\n")
            for lab, v in zip(self.window_labels, self.log_scores):
                fh.write(f"{lab},{v:.17g}\n")


def dma_run(panel: ScorePanel, alpha: float, init=None) -> DmaState:
    """Run the forgetting-factor model-averaging recursion over a panel.

    Parameters
    ----------
    panel : ScorePanel
        Finite log predictive likelihoods, windows by models.
    alpha : float in [0, 1]
        Forgetting factor; 1 recovers static Bayesian model averaging and 0
        resets the predicted weights to uniform every period.
    init : array, optional
        Initial weight simplex (default uniform).

    Returns
    -------
    DmaState with predicted weights, updated weights and the per-window DMA
    log score log(sum_i omega_{t|t-1,i} PL_i).
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    lpl = np.asarray(panel.lpl, dtype=float)
    if not np.all(np.isfinite(lpl)):
        raise ValueError("panel contains non-finite log predictive likelihoods")
    T, M = lpl.shape
    if init is None:
        lw = np.full(M, -np.log(M))
    else:
        init = np.asarray(init, dtype=float)
        if init.shape != (M,) or np.any(init < 0) or abs(init.sum() - 1.0) > 1e-9:
            raise ValueError("init must be a length-M probability vector")
        with np.errstate(divide="ignore"):
            lw = np.log(init)

    predicted = np.empty((T, M))
    updated = np.empty((T, M))
    scores = np.empty(T)
    for t in range(T):
        lw_pred = alpha * np.maximum(lw, _WEIGHT_FLOOR_LOG)
        lw_pred -= logsumexp(lw_pred)
        predicted[t] = np.exp(lw_pred)
        scores[t] = logsumexp(lw_pred + lpl[t])
        lw = lw_pred + lpl[t] - scores[t]
        updated[t] = np.exp(lw)
    return DmaState(
        model_names=list(panel.model_names),
        window_labels=list(panel.window_labels),
        alpha=alpha,
        predicted=predicted,
        updated=updated,
        log_scores=scores,
    )
