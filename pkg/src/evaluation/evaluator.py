"""
Evaluator - 전체 카탈로그 랭킹 평가, 로짓 분포 내보내기, 거짓 음성 진단
"""
import json
import logging
import time
from collections import Counter
from pathlib import Path
from typing import Dict, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

from ..domain.errors import CatalogMismatchError, ConfigError, EmptyEvaluationError, LabelsUnavailableError
from ..domain.interfaces import IScorer
from ..domain.models import ItemCatalog, NegativeTrace, SplitDataset, SyntheticLabels, TrainingExample
from ..encoder.model import SequentialEncoder
from .metrics import mrr_at_k, ndcg_at_k, rank_targets
from .models import EvalReport, LogitDistribution, PopulationStats, RankResult, SuppressionStats

logger = logging.getLogger(__name__)

MIN_BINS = 10


# ============ Scorers ============

class PolicyScorer(IScorer):
    """인코더 평가 모드 점수 (노이즈 / 테이프 없음)"""

    def __init__(self, encoder: SequentialEncoder, batch_size: int = 256, name: str = "policy"):
        self.encoder = encoder
        self.batch_size = batch_size
        self.name = name

    @property
    def n_items(self) -> int:
        return self.encoder.catalog.n_items

    def score_examples(self, examples: Sequence[TrainingExample]) -> np.ndarray:
        return self.encoder.score_examples(examples, self.batch_size)


class PopularityScorer(IScorer):
    """학습 뷰 인기도 점수 (컨텍스트 무관 기준선)"""

    name = "popularity"

    def __init__(self, catalog: ItemCatalog):
        self.popularity = np.asarray(catalog.popularity, dtype=np.float64)

    @property
    def n_items(self) -> int:
        return int(self.popularity.shape[0])

    def score_examples(self, examples: Sequence[TrainingExample]) -> np.ndarray:
        return np.tile(self.popularity, (len(examples), 1))


# ============ Ranking evaluation ============

class Evaluator:
    """leave-one-out 분할 평가기 (난수 / 파라미터 변경 없음)"""

    def __init__(self, split: SplitDataset):
        self.split = split

    def _examples(self, which: str) -> Sequence[TrainingExample]:
        if which not in ("valid", "test"):
            raise ConfigError(f"split must be 'valid' or 'test', got {which!r}")
        examples = self.split.eval_examples(which)
        if not examples:
            raise EmptyEvaluationError(f"no users in {which} split")
        return examples

    def _check_catalog(self, scorer: IScorer) -> None:
        if scorer.n_items != self.split.n_items:
            raise CatalogMismatchError(f"scorer ranks {scorer.n_items} items, split has {self.split.n_items}")

    def rank(self, scorer: IScorer, which: str = "test", ks: Sequence[int] = (5, 10)) -> RankResult:
        self._check_catalog(scorer)
        examples = self._examples(which)
        logits = scorer.score_examples(examples)
        ranks = rank_targets(logits, [e.target for e in examples])
        return RankResult(user_ids=np.array([e.user_id for e in examples]), ranks=ranks, ks=list(ks))

    def evaluate(self, scorer: IScorer, which: str = "test", ks: Sequence[int] = (5, 10)) -> EvalReport:
        """NDCG@K / MRR@K (K ∈ ks)"""
        started = time.perf_counter()
        result = self.rank(scorer, which, ks)
        metrics: Dict[str, float] = {}
        for k in ks:
            metrics[f"ndcg@{k}"] = ndcg_at_k(result.ranks, k)
            metrics[f"mrr@{k}"] = mrr_at_k(result.ranks, k)
        report = EvalReport(
            split=which,
            n_users=result.n_users,
            metrics=metrics,
            ks=list(ks),
            timings={"wall_ms": (time.perf_counter() - started) * 1000.0},
            scorer=getattr(scorer, "name", type(scorer).__name__),
        )
        logger.info(f"평가 완료: {which}, " + ", ".join(f"{k}={v:.4f}" for k, v in metrics.items()))
        return report


def evaluate(scorer: IScorer, split: SplitDataset, ks: Sequence[int] = (5, 10), which: str = "test") -> EvalReport:
    return Evaluator(split).evaluate(scorer, which, ks)


# ============ Logit distributions ============

def _population_stats(values: np.ndarray, counts: np.ndarray, edges: np.ndarray) -> PopulationStats:
    widths = np.diff(edges)
    density = counts / (max(values.size, 1) * widths)
    peak = int(np.argmax(counts))
    return PopulationStats(
        mean=float(values.mean()),
        variance=float(values.var()),
        peak_bin=peak,
        peak_density=float(density[peak]),
    )


def export_logit_distributions(
    scorer: IScorer,
    split: SplitDataset,
    bins: int = 100,
    which: str = "test",
) -> LogitDistribution:
    """정답 로짓 s(x, y_w) 와 하드 네거티브 로짓 max_{i≠y_w} s(x, i) 히스토그램

    두 분포는 같은 구간 경계를 쓴다.
    """
    if bins < MIN_BINS:
        raise ConfigError(f"bins must be >= {MIN_BINS}, got {bins}")
    evaluator = Evaluator(split)
    evaluator._check_catalog(scorer)
    examples = evaluator._examples(which)
    logits = np.asarray(scorer.score_examples(examples), dtype=np.float64)
    rows = np.arange(len(examples))
    targets = np.array([e.target for e in examples], dtype=np.int64)
    positive = logits[rows, targets]
    masked = logits.copy()
    masked[rows, targets] = -np.inf
    hard_negative = masked.max(axis=1)

    low = float(min(positive.min(), hard_negative.min()))
    high = float(max(positive.max(), hard_negative.max()))
    if high <= low:
        low, high = low - 0.5, high + 0.5
    edges = np.linspace(low, high, bins + 1)
    count_pos, _ = np.histogram(positive, bins=edges)
    count_hardneg, _ = np.histogram(hard_negative, bins=edges)
    return LogitDistribution(
        edges=edges,
        count_pos=count_pos.astype(np.int64),
        count_hardneg=count_hardneg.astype(np.int64),
        positive=positive,
        hard_negative=hard_negative,
        positive_stats=_population_stats(positive, count_pos, edges),
        hard_negative_stats=_population_stats(hard_negative, count_hardneg, edges),
    )


def write_histogram_csv(distribution: LogitDistribution, path: Union[str, Path]) -> Path:
    """bin_low,bin_high,count_pos,count_hardneg"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame({
        "bin_low": distribution.edges[:-1],
        "bin_high": distribution.edges[1:],
        "count_pos": distribution.count_pos,
        "count_hardneg": distribution.count_hardneg,
    })
    frame.to_csv(path, index=False, encoding="utf-8")
    return path


def write_raw_logits(distribution: LogitDistribution, path: Union[str, Path]) -> Path:
    """외부 KDE 플롯용 원시 로짓 (사용자별 1행)"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({
        "positive": distribution.positive,
        "hard_negative": distribution.hard_negative,
    }).to_csv(path, index=False, encoding="utf-8")
    return path


def write_report_json(report: Union[EvalReport, Mapping], path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = report.to_dict() if hasattr(report, "to_dict") else dict(report)
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, indent=2, ensure_ascii=False)
    return path


# ============ False-negative diagnostics ============

def mean_false_negative_rank(
    scorer: IScorer,
    split: SplitDataset,
    labels: Optional[SyntheticLabels],
    which: str = "test",
) -> Optional[float]:
    """심어진 거짓 음성 아이템의 평균 순위 (없으면 None)"""
    if labels is None:
        raise LabelsUnavailableError("false-negative labels are only available for synthetic datasets")
    examples = [e for e in split.eval_examples(which) if labels.false_negatives.get(e.user_id)]
    if not examples:
        return None
    logits = np.asarray(scorer.score_examples(examples))
    ranks = []
    for row, example in enumerate(examples):
        items = np.fromiter(sorted(labels.false_negatives[example.user_id]), dtype=np.int64)
        values = logits[row, items]
        ranks.extend((logits[row][None, :] >= values[:, None]).sum(axis=1).tolist())
    return float(np.mean(ranks))


def false_negative_suppression(
    trace: NegativeTrace,
    labels: Optional[SyntheticLabels],
    n_items: int,
    final_ranks: Optional[Mapping[str, Optional[float]]] = None,
) -> Dict[str, SuppressionStats]:
    """전략별 (a) 패자가 거짓 음성인 비율 (b) (사용자, 아이템) 최대 반복 충돌 (c) 거짓 음성 평균 순위

    expected_random_fraction 은 균등 샘플링 시의 기대 비율 |FN_u \\ {y_w}| / (|I| − 1) 평균이다.
    """
    if labels is None:
        raise LabelsUnavailableError("false-negative labels are only available for synthetic datasets")
    final_ranks = final_ranks or {}
    stats: Dict[str, SuppressionStats] = {}
    for strategy, records in trace.by_strategy().items():
        hits = Counter()
        expected = 0.0
        for record in records:
            planted = labels.false_negatives.get(record.user_id, frozenset())
            if record.loser in planted:
                hits[(record.user_id, record.loser)] += 1
            expected += len(planted - {record.winner}) / (n_items - 1)
        n = len(records)
        total_hits = int(sum(hits.values()))
        stats[strategy] = SuppressionStats(
            strategy=strategy,
            n_updates=n,
            false_negative_hits=total_hits,
            hit_fraction=total_hits / n if n else 0.0,
            max_collisions=max(hits.values()) if hits else 0,
            expected_random_fraction=expected / n if n else 0.0,
            mean_false_negative_rank=final_ranks.get(strategy),
        )
    return stats
