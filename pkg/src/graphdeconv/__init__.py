"""Latent-graph recovery from observed convolutional mixtures.

The package couples an unrolled proximal-gradient network (trained on
(observation, latent graph) pairs) with classical deconvolution baselines
and a reproducible synthetic-benchmark harness.
"""

from .baselines import (
    glasso,
    grad_g_full,
    grad_g_linear,
    hard_threshold,
    lsopt_fit_coeffs,
    lsopt_solve,
    network_deconvolution,
)
from .datasets import DatasetConfig, GraphPairDataset, build_dataset
from .diffusion import (
    diffuse_white,
    ensemble_covariance,
    normalize_observation,
    sample_correlation,
    sample_covariance,
    sample_unit_sphere_coeffs,
)
from .estimators import GraphDeconvolver, HardThreshold, NetworkDeconvolution
from .experiments import (
    ExperimentConfig,
    run_benchmark,
    run_prior_ablation,
    run_size_generalization,
)
from .gdn import GdnArch, GdnParams, LayerParams, backward, forward, forward_k0, init_params
from .graphs import (
    EnsembleSpec,
    edge_density,
    gen_ba,
    gen_er,
    gen_rg,
    gen_sbm,
    sample_constrained,
)
from .io import read_checkpoint, read_dataset, write_checkpoint, write_dataset
from .linalg import cholesky_logdet, mat_poly, max_abs_eigval, sym_eig
from .training import (
    EvalReport,
    TrainConfig,
    adam_step,
    hinge_loss,
    link_error,
    mae_loss,
    mse_loss,
    train,
    tune_threshold,
)

__version__ = "0.1.0"

__all__ = [
    "DatasetConfig", "EnsembleSpec", "EvalReport", "ExperimentConfig",
    "GdnArch", "GdnParams", "GraphDeconvolver", "GraphPairDataset",
    "HardThreshold", "LayerParams", "NetworkDeconvolution", "TrainConfig",
    "adam_step", "backward", "build_dataset", "cholesky_logdet",
    "diffuse_white", "edge_density", "ensemble_covariance", "forward",
    "forward_k0", "gen_ba", "gen_er", "gen_rg", "gen_sbm", "glasso",
    "grad_g_full", "grad_g_linear", "hard_threshold", "hinge_loss",
    "init_params", "link_error", "lsopt_fit_coeffs", "lsopt_solve",
    "mae_loss", "mat_poly", "max_abs_eigval", "mse_loss",
    "network_deconvolution", "normalize_observation", "read_checkpoint",
    "read_dataset", "run_benchmark", "run_prior_ablation",
    "run_size_generalization", "sample_constrained", "sample_correlation",
    "sample_covariance", "sample_unit_sphere_coeffs", "sym_eig", "train",
    "tune_threshold", "write_checkpoint", "write_dataset",
]
