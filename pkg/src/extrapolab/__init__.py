"""Numerical laboratory for studying how neural networks extrapolate.

Small feed-forward and message-passing models trained from scratch, a
closed-form kernel for infinitely wide two-layer ReLU networks, synthetic
regression and graph-algorithm tasks, an orbital-mechanics simulator, and
diagnostics that measure behavior outside the training support.
"""

from .diagnostics import (
    DirectionalSweep,
    ExtrapolationReport,
    extrapolation_report,
    mape,
    sweep_directions,
)
from .gnn import GnnConfig, GnnModel, gnn_forward, gnn_train, init_gnn, predict_graphs
from .graphgen import Graph, sample_graph, shortest_path_bf, shortest_path_dijkstra
from .mlp import MlpModel, TrainConfig, init_mlp, predict_batch, train
from .nbody import SimConfig, SystemState, encode_frame, rollout_dataset, sample_orbit_system
from .ntk import (
    KernelPredictor,
    KernelSpec,
    exact_extrapolation_check,
    kernel_regress,
    ntk2_relu,
    ntk_gram,
)
from .numerics import RandomSource, fit_line, random_orthogonal, solve_spd
from .synthdata import (
    Ball,
    DomainSpec,
    HyperCube,
    LabeledSet,
    Sphere,
    make_labeled,
    make_splits,
    sample_domain,
)

__version__ = "0.1.0"

__all__ = [
    "Ball",
    "DirectionalSweep",
    "DomainSpec",
    "ExtrapolationReport",
    "GnnConfig",
    "GnnModel",
    "Graph",
    "HyperCube",
    "KernelPredictor",
    "KernelSpec",
    "LabeledSet",
    "MlpModel",
    "RandomSource",
    "SimConfig",
    "Sphere",
    "SystemState",
    "TrainConfig",
    "encode_frame",
    "exact_extrapolation_check",
    "extrapolation_report",
    "fit_line",
    "gnn_forward",
    "gnn_train",
    "init_gnn",
    "init_mlp",
    "kernel_regress",
    "make_labeled",
    "make_splits",
    "mape",
    "ntk2_relu",
    "ntk_gram",
    "predict_batch",
    "predict_graphs",
    "random_orthogonal",
    "rollout_dataset",
    "sample_domain",
    "sample_graph",
    "sample_orbit_system",
    "shortest_path_bf",
    "shortest_path_dijkstra",
    "solve_spd",
    "sweep_directions",
    "train",
    "__version__",
]
