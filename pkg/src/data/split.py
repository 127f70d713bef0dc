"""
Leave-One-Out Split - 마지막 아이템 테스트, 직전 아이템 검증
"""
import logging
from typing import Sequence

from ..domain.errors import ConfigError, DatasetEliminatedError
from ..domain.models import InteractionSequence, SplitDataset, UserSplit

logger = logging.getLogger(__name__)

MIN_SEQUENCE_LENGTH = 3


def leave_one_out_split(sequences: Sequence[InteractionSequence], n_items: int, max_seq_len: int = 50) -> SplitDataset:
    """사용자별 leave-one-out 분할

    길이 3 미만 사용자는 경고와 함께 제외된다.
    """
    if max_seq_len < 1:
        raise ConfigError(f"max_seq_len must be >= 1, got {max_seq_len}")

    users = []
    dropped = 0
    for seq in sequences:
        if len(seq) < MIN_SEQUENCE_LENGTH:
            dropped += 1
            continue
        if max(seq.items) >= n_items or min(seq.items) < 0:
            raise ConfigError(f"user {seq.user_id} has an item id outside 0..{n_items - 1}")
        users.append(
            UserSplit(
                user_id=seq.user_id,
                train_items=seq.items[:-2],
                train_timestamps=seq.timestamps[:-2],
                valid_target=seq.items[-2],
                valid_timestamp=seq.timestamps[-2],
                test_target=seq.items[-1],
                test_timestamp=seq.timestamps[-1],
            )
        )

    if dropped:
        logger.warning(f"길이 {MIN_SEQUENCE_LENGTH} 미만 사용자 {dropped}명 제외")
    if not users:
        raise DatasetEliminatedError("no user has enough interactions for a leave-one-out split")
    return SplitDataset(users=users, n_items=n_items, max_seq_len=max_seq_len)
