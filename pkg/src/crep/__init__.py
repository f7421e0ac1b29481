"""Community and reciprocity model for directed weighted networks."""

from .graph import DirectedGraph, EdgeListError, FoldMask, degree_stats, load_edge_list, make_folds
from .model import CrepParams, lambda0, marginal_mean
from .inference import EmConfig, FitError, FitResult, e_step, fit, log_pseudo_likelihood
from .generators import (
    HLParams,
    PlantedConfig,
    build_planted_params,
    generate_planted,
    sample_benchmark,
    sample_hl,
    sample_sbm,
)

__all__ = [
    "DirectedGraph", "EdgeListError", "FoldMask", "degree_stats", "load_edge_list", "make_folds",
    "CrepParams", "lambda0", "marginal_mean",
    "EmConfig", "FitError", "FitResult", "e_step", "fit", "log_pseudo_likelihood",
    "HLParams", "PlantedConfig", "build_planted_params", "generate_planted",
    "sample_benchmark", "sample_hl", "sample_sbm",
]
__version__ = "0.1.0"
