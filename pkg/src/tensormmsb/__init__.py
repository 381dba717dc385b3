"""Learning mixed membership community models with tensor methods."""
from .errors import *  # noqa: F401,F403
from .model import (
    Graph,
    MmsbModel,
    homogeneous_model,
    make_homogeneous,
    sample_block_labels,
    sample_dirichlet,
    sample_graph,
)
from .moments import (
    Partition5,
    edge_mean,
    modified_adjacency,
    partition_nodes,
    raw_threestar,
    whitened_threestar,
)
from .whitening import compute_symmetrizer, compute_whitener, k_rank_svd, whitening_residual
from .tensor_power import EigenPairs, apply_Ivv, default_iteration_count, tensor_eigen
from .reconstruction import (
    ModelEstimate,
    align_estimates,
    build_Q,
    default_tau,
    estimate_members,
    estimate_P,
    support_recovery,
)
from .pipeline import FitConfig, Metrics, TheoryDiagnostics, check_assumptions, evaluate, fit
from .experiments import run_experiment

__version__ = "0.1.0"
