"""
Candidate Pool - 현재 정책 로짓 기준 상위 K 비타깃 후보
"""
from typing import Iterable, Optional

import numpy as np

from ..domain.errors import ConfigError, ContractViolationError
from ..domain.models import CandidatePool


def _as_logits(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "logits", scores), dtype=np.float64)


def build_candidate_pool(scores, winner: int, k: int, exclude: Optional[Iterable[int]] = None) -> CandidatePool:
    """C_K(x) = TopK({s(x,i) | i ∈ I \\ {y_w}}, K)

    전체 정렬 없이 부분 선택하며, 동점은 낮은 id 가 우선한다.

    Args:
        scores: 길이 |I| 로짓 (ScoreVector 또는 배열)
        winner: 정답 아이템 y_w
        k: 풀 크기 K
        exclude: 추가로 제외할 아이템 (이력 제외 변형)
    """
    if k < 1:
        raise ConfigError(f"K must be >= 1, got {k}")
    logits = _as_logits(scores)
    n = logits.shape[0]
    if n < 2:
        raise ContractViolationError(f"need at least 2 items to build a pool, got {n}")
    if not 0 <= winner < n:
        raise ContractViolationError(f"winner {winner} outside 0..{n - 1}")

    masked = logits.copy()
    masked[winner] = -np.inf
    if exclude is not None:
        drop = np.fromiter((i for i in exclude if 0 <= i < n), dtype=np.int64)
        masked[drop] = -np.inf
    feasible = int(np.isfinite(masked).sum())
    if feasible == 0:
        raise ContractViolationError("candidate pool is empty after exclusions")

    size = min(k, feasible)
    kth = np.partition(masked, n - size)[n - size]
    above = np.flatnonzero(masked > kth)
    ties = np.flatnonzero(masked == kth)[: size - above.size]
    chosen = np.concatenate([above, ties])
    order = np.lexsort((chosen, -masked[chosen]))
    items = chosen[order]
    return CandidatePool(winner=winner, k=k, items=items, logits=logits[items])
