"""EEG brain biometrics: connectivity graphs plus a hybrid conv/graph-conv classifier.

The pipeline: preprocess multichannel EEG (bandpass, decimation, analytic
phase), compute an electrode-connectivity adjacency per trial, renormalize
it into a propagation operator, and classify subjects with a depthwise-conv
front end feeding two graph-convolution layers and a dense head.
"""

from . import connectivity, experiment, graph, model, montage, neural, signal
from .connectivity import (
    AdjacencyMatrix,
    ElectrodeLayout,
    euclidean_distance_matrix,
    identity_adjacency,
    normalize_adjacency,
    pearson_matrix,
    pli_matrix,
    plv_matrix,
    random_adjacency,
    relative_phase,
    rho_matrix,
)
from .graph import NormalizedOperator, gcn_layer_forward, renormalize
from .model import EarlyStopper, ModelConfig, Network, TrainedModel, feature_length, fit, predict
from .signal import PhaseSeries, Trial, bandpass_filter, downsample, instantaneous_phase

__version__ = "0.1.0"

__all__ = [
    "AdjacencyMatrix",
    "EarlyStopper",
    "ElectrodeLayout",
    "ModelConfig",
    "Network",
    "NormalizedOperator",
    "PhaseSeries",
    "TrainedModel",
    "Trial",
    "bandpass_filter",
    "connectivity",
    "downsample",
    "euclidean_distance_matrix",
    "experiment",
    "feature_length",
    "fit",
    "gcn_layer_forward",
    "graph",
    "identity_adjacency",
    "instantaneous_phase",
    "model",
    "montage",
    "neural",
    "normalize_adjacency",
    "pearson_matrix",
    "pli_matrix",
    "plv_matrix",
    "predict",
    "random_adjacency",
    "relative_phase",
    "renormalize",
    "rho_matrix",
    "signal",
]
