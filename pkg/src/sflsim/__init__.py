"""Deterministic simulator and rate-verification toolkit for sequential
vs. parallel federated learning on heterogeneous data."""

from .bounds import (
    BoundParams,
    BoundPreconditionError,
    BoundResult,
    partial_participation_bound,
    pfl_upper_bound,
    sfl_lower_bound,
    sfl_upper_bound,
    tuned_rate_sfl,
    two_lr_bound,
)
from .data import (
    Dataset,
    LibsvmParseError,
    Partition,
    PartitionError,
    dump_libsvm,
    generate_synthetic,
    parse_libsvm,
    partition_by_labels,
)
from .harness import (
    ExperimentConfig,
    FStar,
    MetricRow,
    OracleError,
    figure2,
    fstar_oracle,
    grid_search,
    run_experiment,
)
from .lemma_oracles import (
    PermStats,
    RecursionInput,
    exact_abs_partial_sum_iid,
    exact_perm_stats,
    second_moment_recursion,
    t_function,
)
from .objectives import (
    HeterogeneityProfile,
    LogisticClient,
    MultiDimClient,
    MultiDimInstance,
    ObjectiveError,
    QuadraticClient,
    SmoothnessProfile,
    build_hard_instance,
    build_quadratic_group,
    eval_gradient,
    eval_value,
    heterogeneity_stats,
    sample_stochastic_gradient,
    smoothness_stats,
)
from .trainers import (
    DivergenceError,
    RunRecord,
    TrainingConfig,
    local_sgd,
    run_pfl,
    run_sfl,
    sample_round_schedule,
)

__version__ = "0.1.0"
