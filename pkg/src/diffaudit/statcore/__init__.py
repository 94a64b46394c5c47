"""Deterministic statistics used by validation, consolidation and the harness."""
from .anova import VarianceDecomposition, variance_decomposition
from .fdr import SaffronState, bh_reject, saffron_run, saffron_step
from .metrics import (
    Stat,
    brier,
    cohen_kappa,
    fleiss_kappa,
    jaccard_top_fraction,
    mean_pearson,
    pearson,
    percent_agreement,
    ratings_to_fleiss_table,
    spearman,
    unigram_jaccard_diversity,
)
from .power import (
    min_detectable_auc,
    min_significant_auc,
    normal_cdf,
    normal_quantile,
    null_auc_se,
    required_judgments,
)
from .ranktests import (
    SignedRankOutcome,
    TestOutcome,
    auc,
    mwu_one_sided,
    u_statistic,
    wilcoxon_signed_rank_one_sided,
)
