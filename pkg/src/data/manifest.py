"""
Split Manifest - 분할 매니페스트 입출력 및 전처리 데이터셋 로드
"""
import json
import logging
from pathlib import Path
from typing import Union

import numpy as np

from ..domain.errors import DataFormatError
from ..domain.models import ItemCatalog, PreparedDataset, SplitDataset, UserSplit
from .features import load_modal_features
from .synthetic import has_synthetic_labels, load_synthetic_labels

logger = logging.getLogger(__name__)

MANIFEST_VERSION = 1
SPLIT_MANIFEST_FILE = "split_manifest.json"
TEXT_FEATURES_FILE = "text_features.fm"
IMAGE_FEATURES_FILE = "image_features.fm"


def write_split_manifest(path: Union[str, Path], split: SplitDataset) -> None:
    """사용자별 train / valid / test 아이템 목록 저장"""
    payload = {
        "version": MANIFEST_VERSION,
        "n_items": split.n_items,
        "max_seq_len": split.max_seq_len,
        "users": [
            {
                "user": u.user_id,
                "train": list(u.train_items),
                "train_ts": list(u.train_timestamps),
                "valid": [u.valid_target, u.valid_timestamp],
                "test": [u.test_target, u.test_timestamp],
            }
            for u in split.users
        ],
    }
    Path(path).write_text(json.dumps(payload, separators=(",", ":")), encoding="utf-8")


def read_split_manifest(path: Union[str, Path]) -> SplitDataset:
    """분할 매니페스트 로드"""
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        if payload.get("version") != MANIFEST_VERSION:
            raise DataFormatError(f"unsupported manifest version {payload.get('version')}", path=str(path))
        users = [
            UserSplit(
                user_id=int(row["user"]),
                train_items=tuple(int(i) for i in row["train"]),
                train_timestamps=tuple(int(t) for t in row["train_ts"]),
                valid_target=int(row["valid"][0]),
                valid_timestamp=int(row["valid"][1]),
                test_target=int(row["test"][0]),
                test_timestamp=int(row["test"][1]),
            )
            for row in payload["users"]
        ]
        return SplitDataset(users=users, n_items=int(payload["n_items"]), max_seq_len=int(payload["max_seq_len"]))
    except (KeyError, TypeError, IndexError, ValueError) as e:
        raise DataFormatError(f"malformed split manifest: {e}", path=str(path))


def _train_popularity(split: SplitDataset) -> np.ndarray:
    popularity = np.zeros(split.n_items, dtype=np.int64)
    for user in split.users:
        np.add.at(popularity, np.asarray(user.train_items, dtype=np.int64), 1)
    return popularity


def load_prepared_dataset(
    data_dir: Union[str, Path],
    d_txt: int = 32,
    d_img: int = 32,
    max_seq_len: int = 0,
) -> PreparedDataset:
    """전처리 디렉터리에서 분할 / 카탈로그 / (있으면) 합성 라벨 로드

    특성 파일이 없으면 설정 차원의 0 특성을 쓴다.

    Args:
        data_dir: preprocess / synth 산출 디렉터리
        d_txt: 설정상 텍스트 특성 차원
        d_img: 설정상 이미지 특성 차원
        max_seq_len: 0 이 아니면 매니페스트 값을 덮어씀
    """
    data_dir = Path(data_dir)
    manifest_path = data_dir / SPLIT_MANIFEST_FILE
    if not manifest_path.is_file():
        raise FileNotFoundError(f"split manifest not found: {manifest_path}")
    split = read_split_manifest(manifest_path)
    if max_seq_len:
        split.max_seq_len = max_seq_len

    features = {}
    missing = {}
    for name, filename, dim in (("text", TEXT_FEATURES_FILE, d_txt), ("image", IMAGE_FEATURES_FILE, d_img)):
        path = data_dir / filename
        if path.is_file():
            matrix = load_modal_features(path, split.n_items, dim)
            features[name], missing[name] = matrix.values, matrix.n_missing
        else:
            logger.info(f"{name} 특성 파일 없음, 0 특성 사용 (d={dim})")
            features[name], missing[name] = np.zeros((split.n_items, dim), dtype=np.float32), 0

    catalog = ItemCatalog(
        n_items=split.n_items,
        text_features=features["text"],
        image_features=features["image"],
        popularity=_train_popularity(split),
        missing_text=missing["text"],
        missing_image=missing["image"],
    )
    labels = load_synthetic_labels(data_dir) if has_synthetic_labels(data_dir) else None
    return PreparedDataset(split=split, catalog=catalog, labels=labels)
