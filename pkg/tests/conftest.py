"""
Test Fixtures - 테스트용 공통 픽스처
"""
import pytest

import sys
import os
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..'))

import numpy as np

from src.data.synthetic import SyntheticConfig, generate_synthetic, save_synthetic
from src.domain.models import PreparedDataset
from src.encoder.model import SequentialEncoder
from src.encoder.params import EncoderConfig
from src.experiment.config_parser import RunConfig

TINY_SEQ_LEN = 4


def tiny_synthetic_config(**overrides) -> SyntheticConfig:
    """24 users × 20 items 합성 설정"""
    values = dict(
        n_users=24,
        n_items=20,
        latent_dim=4,
        seq_len_mean=7.0,
        exposure_rate=0.5,
        seed=3,
        d_txt=4,
        d_img=4,
        max_seq_len=TINY_SEQ_LEN,
    )
    values.update(overrides)
    return SyntheticConfig(**values)


def tiny_run_config_dict(output_dir: str, dataset_dir: str = "") -> dict:
    return {
        "seed": 0,
        "output_dir": output_dir,
        "data": {"dataset_dir": dataset_dir, "max_seq_len": TINY_SEQ_LEN, "d_txt": 4, "d_img": 4},
        "model": {"d": 8, "n_layers": 1, "n_heads": 2, "n_buckets": 8},
        "moe": {"n_experts": 2, "active_k": 1},
        "dpo": {"strategy": "topk", "K": 5, "beta": 1.0, "lambda": 1.0},
        "train": {"stage1_epochs": 2, "stage2_max_epochs": 2, "batch_size": 8, "patience": 10},
        "eval": {"ks": [5, 10], "batch_size": 16},
    }


@pytest.fixture
def tiny_synthetic():
    """정답 라벨이 있는 소형 합성 데이터셋"""
    return generate_synthetic(tiny_synthetic_config())


@pytest.fixture
def tiny_dataset(tiny_synthetic) -> PreparedDataset:
    return PreparedDataset(split=tiny_synthetic.split, catalog=tiny_synthetic.catalog, labels=tiny_synthetic.labels)


@pytest.fixture
def dataset_dir(tmp_path):
    """synth 산출 디렉터리 (load_prepared_dataset 로 읽을 수 있음)"""
    cfg = tiny_synthetic_config()
    directory = tmp_path / "data"
    save_synthetic(generate_synthetic(cfg), directory, cfg)
    return directory


@pytest.fixture
def tiny_config(tmp_path, dataset_dir) -> RunConfig:
    """d=8, 1층, 전문가 2개, float32 실행 설정"""
    return RunConfig.from_dict(tiny_run_config_dict(str(tmp_path / "run"), str(dataset_dir)))


@pytest.fixture
def tiny_config_file(tmp_path, tiny_config):
    path = tmp_path / "config.yaml"
    tiny_config.save_to_file(str(path))
    return path


@pytest.fixture
def tiny_encoder_config() -> EncoderConfig:
    """그래디언트 검사용 double precision 인코더 설정"""
    return EncoderConfig(
        d=8,
        max_seq_len=TINY_SEQ_LEN,
        n_layers=1,
        n_heads=2,
        n_buckets=8,
        n_experts=2,
        active_k=1,
        dtype="float64",
    )


@pytest.fixture
def tiny_encoder(tiny_encoder_config, tiny_dataset) -> SequentialEncoder:
    return SequentialEncoder.initialize(tiny_encoder_config, tiny_dataset.catalog, np.random.default_rng(0))
