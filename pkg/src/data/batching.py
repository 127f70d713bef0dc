"""
Batching - 좌측 패딩 미니배치 구성
"""
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from ..domain.errors import ConfigError
from ..domain.models import SplitDataset, TrainingExample


@dataclass
class Batch:
    """좌측 패딩된 컨텍스트 배치

    item_ids 의 패딩 위치는 padding_id(= |I|), timestamps 는 0 이다.
    """
    user_ids: np.ndarray
    item_ids: np.ndarray
    timestamps: np.ndarray
    mask: np.ndarray
    targets: np.ndarray

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @property
    def seq_len(self) -> int:
        return int(self.item_ids.shape[1])


def collate(examples: Sequence[TrainingExample], max_seq_len: int, padding_id: int) -> Batch:
    """예제 목록을 (B, max_seq_len) 배치로 변환 (최근 아이템 기준 truncation)"""
    size = len(examples)
    item_ids = np.full((size, max_seq_len), padding_id, dtype=np.int64)
    timestamps = np.zeros((size, max_seq_len), dtype=np.int64)
    mask = np.zeros((size, max_seq_len), dtype=bool)
    for row, example in enumerate(examples):
        items = example.items[-max_seq_len:]
        stamps = example.timestamps[-max_seq_len:]
        n = len(items)
        if n:
            item_ids[row, -n:] = items
            timestamps[row, -n:] = stamps
            mask[row, -n:] = True
    return Batch(
        user_ids=np.array([e.user_id for e in examples], dtype=np.int64),
        item_ids=item_ids,
        timestamps=timestamps,
        mask=mask,
        targets=np.array([e.target for e in examples], dtype=np.int64),
    )


def batch_iterator(
    split: SplitDataset,
    batch_size: int,
    shuffle_seed: Optional[int] = None,
    start_batch: int = 0,
    examples: Optional[Sequence[TrainingExample]] = None,
) -> Iterator[Batch]:
    """에폭 1회분 학습 배치 스트림

    Args:
        split: 분할 데이터셋
        batch_size: 배치 크기
        shuffle_seed: None 이면 원래 순서, 아니면 seed 로 결정되는 순열
        start_batch: 재개 시 건너뛸 배치 수
        examples: 미리 만든 학습 예제 (None 이면 split 에서 생성)
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if examples is None:
        examples = split.training_examples()
    n = len(examples)
    order = np.arange(n) if shuffle_seed is None else np.random.default_rng(shuffle_seed).permutation(n)
    for start in range(start_batch * batch_size, n, batch_size):
        chunk = [examples[i] for i in order[start:start + batch_size]]
        yield collate(chunk, split.max_seq_len, split.padding_id)
