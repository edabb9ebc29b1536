"""Heterogeneous graph convolution with hierarchical virtual nodes."""

from vnhgcn.augment import AugmentationConfig, AugmentedGraph, augment, sample_drop_edge
from vnhgcn.graph import (HeteroGraph, NetworkSchema, build_graph, hop_distances, khop_nodes,
                          row_normalize)
from vnhgcn.metrics import F1Report, f1_scores
from vnhgcn.model import ModelParams, forward, init_params, make_dim_plan, param_count, predict
from vnhgcn.numerics import BACKEND
from vnhgcn.train import Split, TrainConfig, fit, make_split

__version__ = "0.1.0"

__all__ = [
    "AugmentationConfig", "AugmentedGraph", "BACKEND", "F1Report", "HeteroGraph",
    "ModelParams", "NetworkSchema", "Split", "TrainConfig", "augment", "build_graph",
    "f1_scores", "fit", "forward", "hop_distances", "init_params", "khop_nodes",
    "make_dim_plan", "make_split", "param_count", "predict", "row_normalize",
    "sample_drop_edge",
]
