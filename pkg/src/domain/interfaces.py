"""
Domain Interfaces - 의존성 역전을 위한 인터페이스 정의 (ISP, DIP 준수)
"""
from abc import ABC, abstractmethod
from typing import Any, Dict, Iterable, Optional, Sequence

import numpy as np

from .models import SamplingStrategy, TrainingExample


class IScorer(ABC):
    """전체 카탈로그 점수 계산기 인터페이스"""

    @property
    @abstractmethod
    def n_items(self) -> int:
        """점수 벡터 길이 (|I|)"""
        pass

    @abstractmethod
    def score_examples(self, examples: Sequence[TrainingExample]) -> np.ndarray:
        """예제별 전체 아이템 로짓 (B × |I|)"""
        pass


class INegativeSampler(ABC):
    """음성 아이템 샘플러 인터페이스"""

    strategy: SamplingStrategy

    @abstractmethod
    def sample(
        self,
        scores: np.ndarray,
        winner: int,
        rng: np.random.Generator,
        exclude: Optional[Iterable[int]] = None,
    ) -> int:
        """패자 아이템 1개 샘플링"""
        pass


class IMetricsSink(ABC):
    """구조화 메트릭 기록 인터페이스"""

    @abstractmethod
    def write(self, record: Dict[str, Any]) -> None:
        """레코드 1건 추가"""
        pass
