"""Skellam latent distance models for signed weighted graphs.

Fits SLDM/SLIM (and their directed variants) by minibatch MAP optimization,
samples synthetic polarized networks from the matching generative process,
runs link-prediction benchmarks, and exports figure-ready layouts.
"""

__version__ = "0.1.0"

from .backend import BACKEND, available_backends
from .errors import DataError, NumericError, SeriesTruncationWarning, SldmError
from .graph import (
    EdgeRecord,
    HoldoutSplit,
    NetworkStats,
    SignedGraph,
    aggregate_temporal,
    build_graph,
    degree_stats,
    largest_connected_component,
    parse_edge_list,
    read_graph,
    split_train_test,
    symmetrize,
    write_graph,
)
from .skellam import (
    SkellamRates,
    bessel_ratio,
    log_bessel_i,
    poisson_sample,
    skellam_log_pmf,
    skellam_sample,
)
from .model import (
    DirectedParams,
    DirectedSlimParams,
    SldmParams,
    SlimParams,
    TrainConfig,
    compose_archetypes,
    gate_matrix,
    gradient,
    load_checkpoint,
    loss_and_gradient,
    mixture_weights,
    negative_log_posterior,
    rates_directed,
    rates_sldm,
    rates_slim,
    save_checkpoint,
)
from .optim import AdamState, FitResult, adam_step, fit, sample_node_block
from .init import SpectralEmbedding, furthest_sum, init_params, signed_normalized_laplacian, spectral_embedding
from .generate import (
    GenerativeConfig,
    GroundTruth,
    calibrate_effect_means,
    regenerate_from_params,
    reorder_by_membership,
    sample_network,
)
from .evaluate import EvalReport, auc_pr, auc_roc, dyad_features, logistic_fit, run_benchmark
from .viz import LayoutExport, circular_layout, edge_overlay, pca_project
