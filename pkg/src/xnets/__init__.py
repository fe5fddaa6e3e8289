"""Sparse neural network layers whose connectivity is a bipartite expander graph."""

from .arch import desk_cnn, flop_count, load_arch, param_count, vgg16, xvgg16
from .connectivity import (
    LayeredNetworkSpec,
    SensitivityMap,
    VerificationResult,
    exhaustive_mixing_check,
    min_sensitive_depth,
    mixing_discrepancy,
    random_walk_mixing,
    sensitivity_map,
)
from .data import Dataset, load_cifar10, synthetic_dataset
from .errors import *  # noqa: F401,F403
from .graphs import (
    BipartiteGraph,
    CayleyParams,
    cayley_expander,
    dense_graph,
    grouped_graph,
    identity_graph,
    load_graph,
    random_expander,
    sample_cayley_generators,
    save_graph,
    validate,
)
from .layers import (
    XConvLayer,
    XLinearLayer,
    init_xconv,
    init_xlinear,
    xconv_backward,
    xconv_forward,
    xconv_forward_fast,
    xconv_forward_sparse,
    xlinear_backward,
    xlinear_forward,
)
from .model import build_network, network_sensitivity
from .spectral import singular_values, spectral_gap, vertex_expansion
from .trainer import TrainConfig, evaluate, multi_seed_report, train

__version__ = "0.1.0"
