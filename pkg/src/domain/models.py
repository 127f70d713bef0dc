"""
Domain Models - 추천 데이터 / 선호 쌍 엔티티 정의
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np
import pandas as pd

from .errors import ContractViolationError, DataFormatError


class SamplingStrategy(Enum):
    """음성 샘플링 전략 (설정 / 로그 문자열과 동일)"""
    RANDOM = "random"
    ARGMAX = "argmax"
    TOPK = "topk"

    @classmethod
    def parse(cls, value: str) -> "SamplingStrategy":
        try:
            return cls(str(value))
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"Unknown sampling strategy: {value} (valid: {valid})")


@dataclass
class RawInteractions:
    """원본 상호작용 로그 (user_key, item_key, timestamp)"""
    frame: pd.DataFrame
    user_ids: Dict[str, int]
    item_ids: Dict[str, int]
    duplicates_dropped: int = 0

    COLUMNS = ("user_key", "item_key", "timestamp")

    def __len__(self) -> int:
        return len(self.frame)

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)


@dataclass(frozen=True)
class InteractionSequence:
    """한 사용자의 시간순 (아이템, 타임스탬프) 이력"""
    user_id: int
    items: Tuple[int, ...]
    timestamps: Tuple[int, ...]

    def __post_init__(self):
        if len(self.items) != len(self.timestamps):
            raise DataFormatError(
                f"user {self.user_id}: {len(self.items)} items vs {len(self.timestamps)} timestamps"
            )
        if any(b < a for a, b in zip(self.timestamps, self.timestamps[1:])):
            raise DataFormatError(f"user {self.user_id}: timestamps must be non-decreasing")

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class ItemCatalog:
    """아이템 카탈로그 (텍스트 / 이미지 특성, 인기도)"""
    n_items: int
    text_features: np.ndarray
    image_features: np.ndarray
    popularity: np.ndarray
    missing_text: int = 0
    missing_image: int = 0

    def __post_init__(self):
        for name, matrix in (("text", self.text_features), ("image", self.image_features)):
            if matrix.ndim != 2 or matrix.shape[0] != self.n_items:
                raise DataFormatError(
                    f"{name} features have shape {matrix.shape}, expected ({self.n_items}, d)"
                )
            if not np.all(np.isfinite(matrix)):
                raise DataFormatError(f"{name} features contain non-finite values")
        if self.popularity.shape != (self.n_items,):
            raise DataFormatError(f"popularity has shape {self.popularity.shape}")

    @property
    def padding_id(self) -> int:
        """패딩 아이템 id (= |I|)"""
        return self.n_items

    @property
    def d_txt(self) -> int:
        return int(self.text_features.shape[1])

    @property
    def d_img(self) -> int:
        return int(self.image_features.shape[1])

    @classmethod
    def featureless(cls, n_items: int, d_txt: int, d_img: int, popularity: Optional[np.ndarray] = None) -> "ItemCatalog":
        """특성 파일이 없는 데이터셋용 0 특성 카탈로그"""
        return cls(
            n_items=n_items,
            text_features=np.zeros((n_items, d_txt), dtype=np.float32),
            image_features=np.zeros((n_items, d_img), dtype=np.float32),
            popularity=popularity if popularity is not None else np.zeros(n_items, dtype=np.int64),
        )


@dataclass(frozen=True)
class TrainingExample:
    """다음 아이템 예측 학습 예제 (컨텍스트 → 타깃)"""
    user_id: int
    items: Tuple[int, ...]
    timestamps: Tuple[int, ...]
    target: int


@dataclass(frozen=True)
class UserSplit:
    """leave-one-out 사용자 분할

    train_items 는 시퀀스에서 마지막 두 아이템을 제외한 전체 이력이며,
    컨텍스트를 만들 때 max_seq_len 으로 잘린다.
    """
    user_id: int
    train_items: Tuple[int, ...]
    train_timestamps: Tuple[int, ...]
    valid_target: int
    valid_timestamp: int
    test_target: int
    test_timestamp: int

    def context(self, which: str) -> Tuple[Tuple[int, ...], Tuple[int, ...]]:
        """평가 컨텍스트 반환 (valid: train, test: train + valid)"""
        if which == "valid":
            return self.train_items, self.train_timestamps
        if which == "test":
            return (
                self.train_items + (self.valid_target,),
                self.train_timestamps + (self.valid_timestamp,),
            )
        raise ValueError(f"Unknown split: {which}")

    def target(self, which: str) -> int:
        if which == "valid":
            return self.valid_target
        if which == "test":
            return self.test_target
        raise ValueError(f"Unknown split: {which}")

    @property
    def full_items(self) -> Tuple[int, ...]:
        return self.train_items + (self.valid_target, self.test_target)


@dataclass
class SplitDataset:
    """leave-one-out 분할 데이터셋"""
    users: List[UserSplit]
    n_items: int
    max_seq_len: int

    @property
    def padding_id(self) -> int:
        return self.n_items

    @property
    def n_users(self) -> int:
        return len(self.users)

    def _truncate(self, items: Tuple[int, ...], timestamps: Tuple[int, ...]):
        return items[-self.max_seq_len:], timestamps[-self.max_seq_len:]

    def training_examples(self) -> List[TrainingExample]:
        """학습 뷰 내부의 모든 (prefix → 다음 아이템) 예제"""
        examples = []
        for user in self.users:
            for pos in range(1, len(user.train_items)):
                items, stamps = self._truncate(user.train_items[:pos], user.train_timestamps[:pos])
                examples.append(TrainingExample(user.user_id, items, stamps, user.train_items[pos]))
        return examples

    def eval_examples(self, which: str) -> List[TrainingExample]:
        """검증 / 테스트 예제 (사용자당 1개)"""
        examples = []
        for user in self.users:
            items, stamps = self._truncate(*user.context(which))
            examples.append(TrainingExample(user.user_id, items, stamps, user.target(which)))
        return examples


@dataclass
class SyntheticLabels:
    """합성 데이터 정답 라벨 (효용, 노출, 거짓 음성)"""
    utility: np.ndarray
    exposure: np.ndarray
    false_negatives: Dict[int, FrozenSet[int]]

    def mean_false_negative_count(self) -> float:
        if not self.false_negatives:
            return 0.0
        return float(np.mean([len(v) for v in self.false_negatives.values()]))


@dataclass
class SyntheticDataset:
    """정답 라벨이 심어진 합성 데이터셋"""
    split: SplitDataset
    catalog: ItemCatalog
    sequences: List[InteractionSequence]
    labels: SyntheticLabels


@dataclass
class PreparedDataset:
    """학습 / 평가에 쓰이는 전처리 완료 데이터셋"""
    split: SplitDataset
    catalog: ItemCatalog
    labels: Optional[SyntheticLabels] = None

    def __post_init__(self):
        if self.split.n_items != self.catalog.n_items:
            raise DataFormatError(
                f"split has {self.split.n_items} items but catalog has {self.catalog.n_items}"
            )


@dataclass(frozen=True)
class DatasetStats:
    """데이터셋 통계 (users / items / actions / 평균 길이 / 희소도)"""
    n_users: int
    n_items: int
    n_actions: int
    avg_length: float
    sparsity: float

    def to_dict(self) -> dict:
        return {
            "users": self.n_users,
            "items": self.n_items,
            "actions": self.n_actions,
            "avg_length": round(self.avg_length, 4),
            "sparsity": round(self.sparsity, 6),
        }

    def get_summary(self) -> str:
        return (
            f"#Users: {self.n_users:,}  #Items: {self.n_items:,}  #Actions: {self.n_actions:,}  "
            f"Avg.Len: {self.avg_length:.2f}  Sparsity: {self.sparsity * 100:.2f}%"
        )


@dataclass(frozen=True)
class PreferencePair:
    """DPO 선호 쌍 (컨텍스트, 승자, 패자, 전략)"""
    user_id: int
    winner: int
    loser: int
    strategy: SamplingStrategy
    padding_id: Optional[int] = None
    is_false_negative: Optional[bool] = None

    def __post_init__(self):
        if self.winner == self.loser:
            raise ContractViolationError(f"winner and loser are both item {self.winner}")
        if self.padding_id is not None and self.padding_id in (self.winner, self.loser):
            raise ContractViolationError("preference pair contains the padding id")
        if self.winner < 0 or self.loser < 0:
            raise ContractViolationError(f"negative item id in pair ({self.winner}, {self.loser})")

    def to_dict(self) -> dict:
        return {
            "user": self.user_id,
            "winner": self.winner,
            "loser": self.loser,
            "strategy": self.strategy.value,
            "is_false_negative": self.is_false_negative,
        }


@dataclass(frozen=True)
class CandidatePool:
    """상위 K 비타깃 후보 풀 (점수 내림차순, 동점 시 낮은 id 우선)"""
    winner: int
    k: int
    items: np.ndarray
    logits: np.ndarray

    def __len__(self) -> int:
        return int(self.items.shape[0])


@dataclass(frozen=True)
class NegativeRecord:
    """Stage 2 스텝별 샘플링 기록"""
    step: int
    user_id: int
    winner: int
    loser: int
    strategy: str

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "user": self.user_id,
            "winner": self.winner,
            "loser": self.loser,
            "strategy": self.strategy,
        }


@dataclass
class NegativeTrace:
    """학습 중 샘플링된 패자 기록"""
    records: List[NegativeRecord] = field(default_factory=list)

    def append(self, record: NegativeRecord) -> None:
        self.records.append(record)

    def extend(self, records: List[NegativeRecord]) -> None:
        self.records.extend(records)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def by_strategy(self) -> Dict[str, List[NegativeRecord]]:
        grouped: Dict[str, List[NegativeRecord]] = {}
        for record in self.records:
            grouped.setdefault(record.strategy, []).append(record)
        return grouped
