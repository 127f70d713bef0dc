from .metrics import rank_target, rank_targets, ndcg_at_k, mrr_at_k
from .models import (
    RankResult,
    EvalReport,
    LogitDistribution,
    PopulationStats,
    SuppressionStats,
    EfficiencyReport,
)
from .evaluator import (
    Evaluator,
    PolicyScorer,
    PopularityScorer,
    evaluate,
    export_logit_distributions,
    write_histogram_csv,
    write_raw_logits,
    write_report_json,
    mean_false_negative_rank,
    false_negative_suppression,
)

__all__ = [
    "rank_target",
    "rank_targets",
    "ndcg_at_k",
    "mrr_at_k",
    "RankResult",
    "EvalReport",
    "LogitDistribution",
    "PopulationStats",
    "SuppressionStats",
    "EfficiencyReport",
    "Evaluator",
    "PolicyScorer",
    "PopularityScorer",
    "evaluate",
    "export_logit_distributions",
    "write_histogram_csv",
    "write_raw_logits",
    "write_report_json",
    "mean_false_negative_rank",
    "false_negative_suppression",
]
