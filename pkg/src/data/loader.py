"""
Interaction Loader - 상호작용 로그 로드 / k-core 필터 / 시퀀스 구성
"""
import json
import logging
from pathlib import Path
from typing import Dict, List, Tuple, Union

import numpy as np
import pandas as pd

from ..domain.errors import ConfigError, DataFormatError, DatasetEliminatedError
from ..domain.models import DatasetStats, InteractionSequence, RawInteractions

logger = logging.getLogger(__name__)

COLUMNS = list(RawInteractions.COLUMNS)


def _dense_ids(keys: pd.Series) -> Dict[str, int]:
    """첫 등장 순서대로 0..n-1 id 부여"""
    return {key: idx for idx, key in enumerate(dict.fromkeys(keys.tolist()))}


def load_interactions(path: Union[str, Path]) -> RawInteractions:
    """탭 구분 상호작용 파일 로드

    형식: user_key \\t item_key \\t unix_timestamp, '#' 으로 시작하는 줄은 무시

    Args:
        path: 입력 파일 경로

    Returns:
        RawInteractions (중복 (user, item, timestamp) 제거 완료)
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"interactions file not found: {path}")

    users: List[str] = []
    items: List[str] = []
    stamps: List[int] = []
    with path.open("r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.rstrip("\r\n")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise DataFormatError(f"expected 3 tab-separated fields, got {len(fields)}", line_no, str(path))
            user_key, item_key, raw_ts = fields
            if not user_key or not item_key:
                raise DataFormatError("empty user or item key", line_no, str(path))
            try:
                timestamp = int(raw_ts)
            except ValueError:
                raise DataFormatError(f"timestamp is not an integer: {raw_ts!r}", line_no, str(path))
            if timestamp < 0:
                raise DataFormatError(f"negative timestamp: {timestamp}", line_no, str(path))
            users.append(user_key)
            items.append(item_key)
            stamps.append(timestamp)

    if not users:
        raise DataFormatError("no interaction records", path=str(path))

    frame = pd.DataFrame({"user_key": users, "item_key": items, "timestamp": np.asarray(stamps, dtype=np.int64)})
    duplicated = frame.duplicated(subset=COLUMNS, keep="first")
    n_duplicates = int(duplicated.sum())
    if n_duplicates:
        logger.warning(f"중복 상호작용 {n_duplicates}건 제거: {path}")
        frame = frame.loc[~duplicated].reset_index(drop=True)

    raw = RawInteractions(
        frame=frame,
        user_ids=_dense_ids(frame["user_key"]),
        item_ids=_dense_ids(frame["item_key"]),
        duplicates_dropped=n_duplicates,
    )
    logger.info(f"상호작용 로드: {len(raw):,} records, {raw.n_users:,} users, {raw.n_items:,} items")
    return raw


def kcore_filter(raw: RawInteractions, k: int) -> RawInteractions:
    """사용자 / 아이템 상호작용 수가 k 미만이면 반복 제거 (fixpoint 까지)"""
    if k < 1:
        raise ConfigError(f"kcore must be >= 1, got {k}")

    frame = raw.frame
    rounds = 0
    while True:
        user_counts = frame.groupby("user_key")["item_key"].transform("size")
        item_counts = frame.groupby("item_key")["user_key"].transform("size")
        keep = (user_counts >= k) & (item_counts >= k)
        if bool(keep.all()):
            break
        frame = frame.loc[keep]
        rounds += 1
        if frame.empty:
            raise DatasetEliminatedError(f"{k}-core filtering removed every interaction")

    frame = frame.reset_index(drop=True)
    if rounds:
        logger.info(f"{k}-core 필터: {len(raw):,} → {len(frame):,} records ({rounds} rounds)")
    return RawInteractions(
        frame=frame,
        user_ids=_dense_ids(frame["user_key"]),
        item_ids=_dense_ids(frame["item_key"]),
        duplicates_dropped=raw.duplicates_dropped,
    )


def build_sequences(raw: RawInteractions) -> Tuple[List[InteractionSequence], int]:
    """사용자별 시간순 시퀀스 구성 (동일 시각은 입력 순서 유지)

    Returns:
        (시퀀스 목록 (user id 순), 아이템 수)
    """
    frame = raw.frame.assign(
        user_id=raw.frame["user_key"].map(raw.user_ids),
        item_id=raw.frame["item_key"].map(raw.item_ids),
    )
    frame = frame.sort_values(["user_id", "timestamp"], kind="stable")
    sequences = [
        InteractionSequence(
            user_id=int(user_id),
            items=tuple(int(i) for i in group["item_id"]),
            timestamps=tuple(int(t) for t in group["timestamp"]),
        )
        for user_id, group in frame.groupby("user_id", sort=True)
    ]
    return sequences, raw.n_items


def dataset_statistics(sequences: List[InteractionSequence], n_items: int) -> DatasetStats:
    """데이터셋 통계 (users / items / actions / 평균 길이 / 희소도)"""
    n_users = len(sequences)
    n_actions = sum(len(s) for s in sequences)
    avg_length = n_actions / n_users if n_users else 0.0
    density = n_actions / (n_users * n_items) if n_users and n_items else 0.0
    return DatasetStats(
        n_users=n_users,
        n_items=n_items,
        n_actions=n_actions,
        avg_length=avg_length,
        sparsity=1.0 - density,
    )


def write_id_maps(path: Union[str, Path], raw: RawInteractions) -> None:
    """key → dense id 매핑 저장"""
    payload = {"users": raw.user_ids, "items": raw.item_ids}
    Path(path).write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")

