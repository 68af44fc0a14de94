"""Attributed graph clustering on restructured homophilic and heterophilic graphs."""

from .errors import ConfigError, DataError, LoadError, NumericalError, PFGCError, ShapeError, UsageError
from .evaluation import ClusterMetrics, accuracy, evaluate_clustering, kmeans, mask_by_attention, nmi
from .graph import (
    AttributedGraph,
    NormalizedOperators,
    classify_edges_by_commonality,
    homophily_ratio,
    normalize,
)
from .io import load_graph
from .model import (
    ModelConfig,
    ModelState,
    TrainReport,
    check_gradients,
    encode,
    loss_clu,
    loss_hs,
    loss_re,
    predict,
    se_block,
    soft_assign,
    target_distribution,
    train,
)
from .restructure import RestructuredGraphs, SimilarityKernels, restructure
from .spectral import EigenCache, FilterKind, SpectralBasis, apply_filter, eig_sym, filter_response
from .theorem import DiscriminativenessReport, SbmConfig, mc_cluster_gap, sbm_generate, verify_theorem

__version__ = "0.1.0"
