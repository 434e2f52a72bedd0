"""Confidence intervals and significance tests for metric/human-judgment correlations."""

from .ci import BootMethod, ConfidenceInterval, bootstrap_ci, boot_sample, fisher_ci, fisher_ci_matrices
from .correl import (
    Coefficient,
    CorrelationResult,
    CorrelationSpec,
    Level,
    kendall,
    pearson,
    rank_with_ties,
    spearman,
    summary_level,
    system_level,
)
from .hypo import (
    PermMethod,
    TestResult,
    bonferroni_reject,
    paired_bootstrap_test,
    perm_sample,
    permutation_test,
    standardize,
    williams_from_matrices,
    williams_test,
)
from .numerics import RngStream, normal_quantile, normal_sf, student_t_sf
from .scores import ScoreError, ScoreMatrix, ScoreRecord, ScoreSet, build_score_set, parse_scores
from .sim import (
    SyntheticWorld,
    coverage_simulation,
    generate_world,
    power_simulation,
    proportions_z_test,
)

__version__ = "0.1.0"
