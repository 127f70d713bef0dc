"""
Synthetic Benchmark - 거짓 음성(미노출 선호 아이템)이 심어진 합성 데이터 생성기
"""
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, FrozenSet, List, Union

import numpy as np

from ..domain.errors import ConfigError, DataFormatError
from ..domain.models import (
    InteractionSequence,
    ItemCatalog,
    SyntheticDataset,
    SyntheticLabels,
)
from .features import write_modal_features
from .loader import dataset_statistics
from .split import MIN_SEQUENCE_LENGTH, leave_one_out_split

logger = logging.getLogger(__name__)

UTILITY_FILE = "utility.npy"
EXPOSURE_FILE = "exposure.npy"
FALSE_NEGATIVES_FILE = "false_negatives.json"
EXPOSURE_MODES = ("uniform", "popularity")
BASE_TIMESTAMP = 1_600_000_000
MEAN_GAP_SECONDS = 86_400.0


@dataclass
class SyntheticConfig:
    """합성 데이터 생성 파라미터"""
    n_users: int = 1000
    n_items: int = 500
    latent_dim: int = 8
    seq_len_mean: float = 12.0
    exposure_rate: float = 0.3
    seed: int = 0
    exposure_mode: str = "uniform"
    d_txt: int = 32
    d_img: int = 32
    feature_noise: float = 0.5
    max_seq_len: int = 50
    max_retries: int = 20

    def validate(self) -> None:
        for name in ("n_users", "n_items", "latent_dim", "d_txt", "d_img", "max_seq_len"):
            if getattr(self, name) < 1:
                raise ConfigError(f"synthetic {name} must be positive")
        if self.n_items < MIN_SEQUENCE_LENGTH:
            raise ConfigError(f"synthetic n_items must be >= {MIN_SEQUENCE_LENGTH}")
        if not 0.0 < self.exposure_rate <= 1.0:
            raise ConfigError(f"exposure_rate must be in (0, 1], got {self.exposure_rate}")
        if self.seq_len_mean < MIN_SEQUENCE_LENGTH:
            raise ConfigError(f"seq_len_mean must be >= {MIN_SEQUENCE_LENGTH}")
        if self.exposure_mode not in EXPOSURE_MODES:
            raise ConfigError(f"Unknown exposure_mode: {self.exposure_mode}")

    def to_dict(self) -> dict:
        return asdict(self)


def _exposure_propensity(cfg: SyntheticConfig, rng: np.random.Generator) -> np.ndarray:
    """아이템별 노출 확률 (평균 exposure_rate)"""
    if cfg.exposure_mode == "uniform" or cfg.exposure_rate >= 1.0:
        return np.full(cfg.n_items, cfg.exposure_rate)
    # 인기 편향: Zipf 형태 가중치를 평균이 exposure_rate 가 되도록 스케일
    ranks = rng.permutation(cfg.n_items) + 1
    weights = 1.0 / np.sqrt(ranks)
    return np.clip(weights * cfg.exposure_rate / weights.mean(), 0.0, 1.0)


def _sample_without_replacement(logits: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """softmax(logits) 비례 비복원 순차 추출 (Gumbel top-k)"""
    keys = logits + rng.gumbel(size=logits.shape)
    return np.argsort(-keys, kind="stable")[:size]


def generate_synthetic(cfg: SyntheticConfig) -> SyntheticDataset:
    """합성 데이터셋 생성 (seed 고정 시 완전 결정적)

    Args:
        cfg: 생성 파라미터

    Returns:
        SyntheticDataset (분할, 카탈로그, 효용 / 노출 / 거짓 음성 라벨)
    """
    cfg.validate()
    rng = np.random.default_rng(cfg.seed)

    user_latent = rng.standard_normal((cfg.n_users, cfg.latent_dim))
    item_latent = rng.standard_normal((cfg.n_items, cfg.latent_dim))
    utility = user_latent @ item_latent.T
    propensity = _exposure_propensity(cfg, rng)

    exposure = np.zeros((cfg.n_users, cfg.n_items), dtype=bool)
    sequences: List[InteractionSequence] = []
    retries = 0
    for user in range(cfg.n_users):
        for _ in range(cfg.max_retries + 1):
            row = rng.random(cfg.n_items) < propensity
            if row.sum() >= MIN_SEQUENCE_LENGTH:
                break
            retries += 1
        else:
            raise DataFormatError(
                f"user {user}: fewer than {MIN_SEQUENCE_LENGTH} exposed items after {cfg.max_retries} retries"
            )
        exposure[user] = row
        exposed = np.flatnonzero(row)
        length = min(exposed.size, MIN_SEQUENCE_LENGTH + int(rng.poisson(cfg.seq_len_mean - MIN_SEQUENCE_LENGTH)))
        chosen = exposed[_sample_without_replacement(utility[user, exposed], length, rng)]
        gaps = np.floor(rng.exponential(MEAN_GAP_SECONDS, size=length - 1)).astype(np.int64)
        start = BASE_TIMESTAMP + int(rng.integers(0, 30 * 86_400))
        stamps = start + np.concatenate([[0], np.cumsum(gaps)])
        sequences.append(
            InteractionSequence(
                user_id=user,
                items=tuple(int(i) for i in chosen),
                timestamps=tuple(int(t) for t in stamps),
            )
        )
    if retries:
        logger.info(f"노출 재샘플링 {retries}회")

    top_n = max(1, math.ceil(cfg.n_items / 10))
    false_negatives: Dict[int, FrozenSet[int]] = {}
    for user in range(cfg.n_users):
        top_items = np.argsort(-utility[user], kind="stable")[:top_n]
        false_negatives[user] = frozenset(int(i) for i in top_items if not exposure[user, i])

    text_map = rng.standard_normal((cfg.latent_dim, cfg.d_txt)) / math.sqrt(cfg.latent_dim)
    image_map = rng.standard_normal((cfg.latent_dim, cfg.d_img)) / math.sqrt(cfg.latent_dim)
    text = item_latent @ text_map + cfg.feature_noise * rng.standard_normal((cfg.n_items, cfg.d_txt))
    image = item_latent @ image_map + cfg.feature_noise * rng.standard_normal((cfg.n_items, cfg.d_img))

    split = leave_one_out_split(sequences, cfg.n_items, cfg.max_seq_len)
    popularity = np.zeros(cfg.n_items, dtype=np.int64)
    for user in split.users:
        np.add.at(popularity, np.asarray(user.train_items, dtype=np.int64), 1)
    catalog = ItemCatalog(
        n_items=cfg.n_items,
        text_features=text.astype(np.float32),
        image_features=image.astype(np.float32),
        popularity=popularity,
    )
    labels = SyntheticLabels(utility=utility, exposure=exposure, false_negatives=false_negatives)
    logger.info(
        f"합성 데이터 생성: {cfg.n_users} users × {cfg.n_items} items, "
        f"평균 거짓 음성 {labels.mean_false_negative_count():.2f}개/사용자"
    )
    return SyntheticDataset(split=split, catalog=catalog, sequences=sequences, labels=labels)


def save_synthetic(dataset: SyntheticDataset, output_dir: Union[str, Path], cfg: SyntheticConfig) -> Dict[str, Path]:
    """합성 데이터셋 + 정답 라벨 사이드카 저장

    Returns:
        산출물 이름 → 경로
    """
    from .manifest import write_split_manifest

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "interactions": out / "interactions.tsv",
        "split_manifest": out / "split_manifest.json",
        "id_maps": out / "id_maps.json",
        "stats": out / "stats.json",
        "text_features": out / "text_features.fm",
        "image_features": out / "image_features.fm",
        "utility": out / UTILITY_FILE,
        "exposure": out / EXPOSURE_FILE,
        "false_negatives": out / FALSE_NEGATIVES_FILE,
    }

    with paths["interactions"].open("w", encoding="utf-8", newline="\n") as f:
        for seq in dataset.sequences:
            for item, ts in zip(seq.items, seq.timestamps):
                f.write(f"u{seq.user_id}\ti{item}\t{ts}\n")

    write_split_manifest(paths["split_manifest"], dataset.split)
    id_maps = {
        "users": {f"u{u}": u for u in range(cfg.n_users)},
        "items": {f"i{i}": i for i in range(cfg.n_items)},
    }
    paths["id_maps"].write_text(json.dumps(id_maps, indent=1), encoding="utf-8")
    stats = dataset_statistics(dataset.sequences, cfg.n_items).to_dict()
    stats["synthetic"] = cfg.to_dict()
    stats["mean_false_negatives"] = dataset.labels.mean_false_negative_count()
    paths["stats"].write_text(json.dumps(stats, indent=2), encoding="utf-8")

    write_modal_features(paths["text_features"], dataset.catalog.text_features)
    write_modal_features(paths["image_features"], dataset.catalog.image_features)

    np.save(paths["utility"], dataset.labels.utility)
    np.save(paths["exposure"], dataset.labels.exposure)
    fn_payload = {str(u): sorted(items) for u, items in sorted(dataset.labels.false_negatives.items())}
    paths["false_negatives"].write_text(json.dumps(fn_payload), encoding="utf-8")
    return paths


def load_synthetic_labels(data_dir: Union[str, Path]) -> SyntheticLabels:
    """정답 라벨 사이드카 로드"""
    data_dir = Path(data_dir)
    utility = np.load(data_dir / UTILITY_FILE)
    exposure = np.load(data_dir / EXPOSURE_FILE)
    payload = json.loads((data_dir / FALSE_NEGATIVES_FILE).read_text(encoding="utf-8"))
    false_negatives = {int(u): frozenset(items) for u, items in payload.items()}
    return SyntheticLabels(utility=utility, exposure=exposure, false_negatives=false_negatives)


def has_synthetic_labels(data_dir: Union[str, Path]) -> bool:
    data_dir = Path(data_dir)
    return (data_dir / UTILITY_FILE).is_file() and (data_dir / FALSE_NEGATIVES_FILE).is_file()
