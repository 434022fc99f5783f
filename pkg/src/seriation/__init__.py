"""Spectral seriation of graphs sampled from Robinsonian graphons."""

from .graphon import (
    EdgeListError,
    Family,
    Graphon,
    SampledGraph,
    banded_graph,
    builtin_nice_graphons,
    degree_function,
    evaluate,
    graphon_from_config,
    model_matrix,
    psi_functions,
    sample_graph,
)
from .order import (
    Alignment,
    Ordering,
    check_aligned,
    kendall_tau,
    l1_distance,
    linf_distance,
    merge_orderings,
    ordering_from_values,
    reverse,
)
from .postproc import (
    GoodPartition,
    NeighborStats,
    SplitConfig,
    empirical_cutoffs,
    estimate_extremes,
    fhat_compare,
    full_postprocess,
    learn_alpha_beta,
    neighbor_stats,
    sample_good_partition,
    score_and_order,
    split_postprocess,
)
from .spectral import (
    DisconnectedGraphError,
    SolverError,
    discretized_graphon_laplacian,
    fiedler_pair,
    laplacian,
    operator_norm_diff,
    spectral_seriation,
)

__version__ = "0.1.0"
