"""pdlab: exact ensembles, Poisson-Dirichlet sampling, and split-merge dynamics
for condensing particle systems with product stationary weights."""

__version__ = "0.1.0"

from .diagnostics import (
    alpha_from_second_moment,
    condensed_fraction,
    pd_gof,
    strictly_decreasing,
    trend_report,
    variance_one_norm,
)
from .ensembles import (
    GrandCanonical,
    LogZTable,
    OutOfDomainError,
    SupercriticalDensityError,
    build_logz,
    critical_density,
    grand_canonical_stats,
    invert_density,
    load_logz_cache,
    local_clt_report,
    save_logz_cache,
    pair_zero_probability,
    phi_sequence,
    relative_entropy_bound,
    single_site_marginal,
    single_site_marginals,
    size_biased_marginal,
    size_biased_marginals,
    tv_distance_marginal,
    zratio_diagnostic,
)
from .partitions import (
    OrderedPartition,
    SizeBiasedSample,
    StickBreakingResult,
    norms,
    pd_degenerate,
    pd_moment_targets,
    positive_size_biased,
    size_biased,
    stick_breaking,
    stick_breaking_batch,
)
from .report import DiagnosticsReport, ReportRow
from .sampler import (
    Configuration,
    SeededRng,
    sample_configuration,
    sample_configurations,
    sample_size_biased_block,
    sample_size_biased_blocks,
    to_partition,
    zero_fraction_stats,
)
from .splitmerge import (
    EXP_NEG_P1,
    FUNCTION_LIBRARY,
    P1,
    P1_P2,
    P1_PLUS_P2,
    P1_SQUARED,
    CylinderFunction,
    DefectResult,
    SplitMergeState,
    cutoff_generator_apply,
    discrete_generator_apply,
    generator_apply,
    lift_merge,
    lift_split,
    lift_split_append,
    merge,
    reversibility_defect,
    rn_derivative_check,
    simulate,
    split,
    time_averaged_l2,
)
from .weights import (
    WeightFamily,
    assumption_report,
    limit_weight_row,
    log_limit_weight,
    log_weight,
    log_weight_row,
    weight_sup_distance,
)
