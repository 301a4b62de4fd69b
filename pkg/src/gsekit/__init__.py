"""Interaction-graph kernels with variance-guided rate search, a
precomputed-kernel SVM harness, and even-descent model explanations."""

from .data import (
    Dataset,
    SyntheticSpec,
    TrainStatScaler,
    load_feature_csv,
    load_interactions_tsv,
    synth_generate,
    write_feature_csv,
    write_interactions_tsv,
    zscore_fit_apply,
)
from .errors import ConvergenceError, DataError, GsekitError, GuardError, NonConvergenceWarning
from .evaluation import (
    CvResult,
    FStatisticSelector,
    SplitPlan,
    cross_validate,
    f_statistic,
    f_statistic_select,
    nu_sweep,
    roc_auc,
    run_benchmark,
    stratified_shuffle_splits,
)
from .explain import (
    ExplanationReport,
    PiecewiseDensity,
    SamplerConfig,
    StepEstimate,
    Trajectory,
    even_descent,
    even_sample,
    fit_surrogate,
    gradient_fd,
    tau0,
    theta_scale,
    update_density,
    write_trajectory_csv,
)
from .graphs import (
    EdgeWeightTransform,
    InstanceGraph,
    InteractionNetwork,
    build_network,
    complete_network,
    dense_matrix_view,
    edge_value_matrix,
    instance_graph,
    instance_graphs,
    pairwise_sq_distances,
    squared_frobenius_distance,
    subnetwork,
)
from .kernels import (
    GraphSpaceEmbedding,
    KernelMatrix,
    KernelSpec,
    gse_from_distances,
    gse_matrix,
    gse_series_reference,
    gse_value,
    kernel_matrix,
    min_eigenvalue_ratio,
    rbf_matrix,
    read_kernel_binary,
    read_kernel_csv,
    rw_exp_kernel,
    rw_finite_kernel,
    write_kernel_binary,
    write_kernel_csv,
)
from .nu import (
    DistanceSet,
    NuSearchConfig,
    NuSearchResult,
    find_nu_star,
    kernel_variance,
    lipschitz_rate,
    variance_gradient,
)
from .svm import PrecomputedKernelSVC, SvmModel, decision_values, dual_objective, smo_train
from .tree import WeightedTreeRegressor

__version__ = "0.1.0"
