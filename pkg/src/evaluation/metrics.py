"""
Ranking Metrics - 전체 카탈로그 순위와 NDCG@K / MRR@K
"""
from typing import Sequence

import numpy as np

from ..domain.errors import ConfigError, ContractViolationError, EmptyEvaluationError


def rank_target(scores, target: int) -> int:
    """1 기반 순위, 동점 아이템은 타깃보다 위로 센다 (비관적 규칙)"""
    logits = np.asarray(getattr(scores, "logits", scores))
    if not 0 <= target < logits.shape[0]:
        raise ContractViolationError(f"target {target} outside 0..{logits.shape[0] - 1}")
    value = logits[target]
    return int(np.count_nonzero(logits > value) + np.count_nonzero(logits == value))


def rank_targets(logits: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """배치 버전: (B, |I|) 로짓과 B 개 타깃 → (B,) 순위"""
    logits = np.asarray(logits)
    targets = np.asarray(targets, dtype=np.int64)
    if logits.ndim != 2 or logits.shape[0] != targets.shape[0]:
        raise ContractViolationError(f"logits {logits.shape} do not match {targets.shape[0]} targets")
    if targets.size and (targets.min() < 0 or targets.max() >= logits.shape[1]):
        raise ContractViolationError("target outside the scorable catalog")
    target_logits = logits[np.arange(targets.shape[0]), targets][:, None]
    return (logits >= target_logits).sum(axis=1).astype(np.int64)


def _checked_ranks(ranks: Sequence[int], k: int) -> np.ndarray:
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    ranks = np.asarray(ranks, dtype=np.int64)
    if ranks.size == 0:
        raise EmptyEvaluationError("no users to evaluate")
    if ranks.min() < 1:
        raise ContractViolationError("ranks are 1-based")
    return ranks


def ndcg_at_k(ranks: Sequence[int], k: int) -> float:
    """mean(1 / log2(rank + 1)) (rank > K 는 0)"""
    ranks = _checked_ranks(ranks, k)
    gains = np.where(ranks <= k, 1.0 / np.log2(ranks + 1.0), 0.0)
    return float(gains.mean())


def mrr_at_k(ranks: Sequence[int], k: int) -> float:
    """mean(1 / rank) (rank > K 는 0)"""
    ranks = _checked_ranks(ranks, k)
    return float(np.where(ranks <= k, 1.0 / ranks, 0.0).mean())
