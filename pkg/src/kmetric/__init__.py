"""kmetric: supervised Mahalanobis distance learning with kernelization.

Linear learners (NCA, LMNN, DNE) run on raw features; their kernel versions
run the same code on explicit kernel-PCA coordinates.  Kernels can be picked
by cross-validation, built by alignment to the label structure (QP or LP),
or summed unweighted.  A kNN harness with repeated random splits measures
everything.
"""

from .align import AlignmentSolution, KernelBank, align_lp, align_qp, build_bank, unweighted_sum
from .data import Dataset, SplitPlan, load_csv, make_synthetic, split, standardize
from .dne import KdneSolution, SingularKernelError, dne_fit, kdne_kernel_trick_fit
from .evaluate import (
    SIGMA_GRID,
    ExperimentReport,
    FittedPipeline,
    MethodConfig,
    accuracy,
    base_kernel_sweep,
    cross_validate_kernel,
    fit_pipeline,
    knn_predict,
    run_experiment,
)
from .kernels import (
    GramMatrix,
    IdealKernel,
    KernelSpec,
    Linear,
    Polynomial,
    ScaledRbf,
    WeightedSum,
    alignment,
    cross_gram,
    eval_kernel,
    frobenius_normalize,
    gram,
    ideal_kernel,
)
from .kpca import DegenerateKernelError, KpcaModel, kpca_fit, kpca_transform
from .lmnn import LmnnConfig, lmnn_fit, lmnn_objective
from .maps import LinearMap, Metric, as_linear_map, metric_to_map
from .nca import GradientDescentConfig, nca_fit, nca_gradient, nca_objective
from .neighbors import NeighborGraph, build_neighbor_graph
from .numerics import (
    InfeasibleProblemError,
    QpProblem,
    SymEigResult,
    UnboundedProblemError,
    check_gradient,
    psd_project,
    solve_lp,
    solve_qp,
    sym_eig,
)

__version__ = "0.1.0"
