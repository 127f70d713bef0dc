"""
Negative Sampling Strategies - random / argmax / stochastic top-K
"""
import logging
from typing import Iterable, List, Optional, Sequence

import numpy as np

from ..domain.errors import ConfigError, ContractViolationError
from ..domain.interfaces import INegativeSampler
from ..domain.models import PreferencePair, SamplingStrategy
from .pool import build_candidate_pool

logger = logging.getLogger(__name__)


class RandomSampler(INegativeSampler):
    """정답을 제외한 전체 아이템에서 균등 추출"""

    strategy = SamplingStrategy.RANDOM

    def sample(self, scores, winner: int, rng: np.random.Generator, exclude: Optional[Iterable[int]] = None) -> int:
        n = int(np.asarray(getattr(scores, "logits", scores)).shape[0])
        if n < 2:
            raise ContractViolationError("random sampling needs at least 2 items")
        if exclude is None:
            draw = int(rng.integers(n - 1))
            return draw if draw < winner else draw + 1
        feasible = np.setdiff1d(np.arange(n), np.fromiter(set(exclude) | {winner}, dtype=np.int64))
        if feasible.size == 0:
            raise ContractViolationError("no feasible negative after exclusions")
        return int(feasible[rng.integers(feasible.size)])


class ArgmaxSampler(INegativeSampler):
    """가장 높은 점수의 비타깃 아이템 (난수 미사용)"""

    strategy = SamplingStrategy.ARGMAX

    def sample(self, scores, winner: int, rng: np.random.Generator, exclude: Optional[Iterable[int]] = None) -> int:
        return int(build_candidate_pool(scores, winner, 1, exclude).items[0])


class TopKSampler(INegativeSampler):
    """상위 K 후보 풀에서 균등 추출"""

    strategy = SamplingStrategy.TOPK

    def __init__(self, k: int = 50):
        if k < 1:
            raise ConfigError(f"K must be >= 1, got {k}")
        self.k = k

    def sample(self, scores, winner: int, rng: np.random.Generator, exclude: Optional[Iterable[int]] = None) -> int:
        pool = build_candidate_pool(scores, winner, self.k, exclude)
        return int(pool.items[rng.integers(len(pool))])


def get_sampler(strategy, k: int = 50) -> INegativeSampler:
    """전략 이름 → 샘플러"""
    try:
        tag = strategy if isinstance(strategy, SamplingStrategy) else SamplingStrategy.parse(strategy)
    except ValueError as e:
        raise ConfigError(str(e))
    if tag == SamplingStrategy.TOPK:
        return TopKSampler(k)
    if tag == SamplingStrategy.ARGMAX:
        return ArgmaxSampler()
    return RandomSampler()


def sample_negative(scores, winner: int, strategy, rng: np.random.Generator, k: int = 50, exclude=None) -> int:
    return get_sampler(strategy, k).sample(scores, winner, rng, exclude)


def make_pairs(
    scores: np.ndarray,
    user_ids: Sequence[int],
    winners: Sequence[int],
    sampler: INegativeSampler,
    rng: np.random.Generator,
    histories: Optional[Sequence[Sequence[int]]] = None,
    false_negatives=None,
) -> List[PreferencePair]:
    """배치 예제 순서대로 패자를 샘플링해 선호 쌍 생성

    Args:
        scores: (B, |I|) 현재 정책 로짓
        histories: 이력 제외 변형일 때 예제별 컨텍스트 아이템
        false_negatives: 합성 라벨의 사용자별 거짓 음성 집합 (있으면 플래그 기록)
    """
    n_items = scores.shape[1]
    pairs = []
    for row, (user, winner) in enumerate(zip(user_ids, winners)):
        exclude = histories[row] if histories is not None else None
        loser = sampler.sample(scores[row], int(winner), rng, exclude)
        flag = None
        if false_negatives is not None:
            flag = loser in false_negatives.get(int(user), ())
        pairs.append(
            PreferencePair(
                user_id=int(user),
                winner=int(winner),
                loser=int(loser),
                strategy=sampler.strategy,
                padding_id=n_items,
                is_false_negative=flag,
            )
        )
    return pairs
