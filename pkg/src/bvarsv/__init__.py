"""Bayesian VARs with stochastic volatility under hierarchical shrinkage priors."""

from .dma import DmaState, dma_run
from .forecast import (
    ModelDef,
    PredictiveMixture,
    ScorePanel,
    log_predictive_likelihood,
    predictive_mixture,
    recursive_exercise,
)
from .model import Dataset, VarSpec, build_design, companion_stable, reduced_from_structural
from .sampler import (
    McmcConfig,
    PosteriorDraws,
    PriorConfig,
    load_draws,
    run_mcmc,
    save_draws,
)
from .sv import SvParams, SvPath, SvPrior, sv_forecast, sv_update

__all__ = [
    "Dataset",
    "VarSpec",
    "build_design",
    "companion_stable",
    "reduced_from_structural",
    "McmcConfig",
    "PriorConfig",
    "PosteriorDraws",
    "run_mcmc",
    "save_draws",
    "load_draws",
    "SvParams",
    "SvPath",
    "SvPrior",
    "sv_update",
    "sv_forecast",
    "ModelDef",
    "PredictiveMixture",
    "ScorePanel",
    "predictive_mixture",
    "log_predictive_likelihood",
    "recursive_exercise",
    "DmaState",
    "dma_run",
]

__version__ = "0.1.0"
