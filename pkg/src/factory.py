"""
Factory Module - 의존성 주입 및 객체 생성 (DIP 준수)
"""
from pathlib import Path
from typing import Optional, Union

from .data.manifest import load_prepared_dataset
from .domain.errors import ConfigError
from .domain.interfaces import IMetricsSink
from .domain.models import NegativeTrace, PreparedDataset
from .encoder.model import SequentialEncoder
from .encoder.snapshot import PolicySnapshot
from .evaluation.evaluator import Evaluator, PolicyScorer, PopularityScorer
from .experiment.config_parser import RunConfig
from .infrastructure.config import Settings
from .trainer.engine import TrainingEngine
from .trainer.metrics_log import MetricsLogger


class RunFactory:
    """RunConfig 기반 객체 생성 팩토리"""

    def __init__(self, config: RunConfig, settings: Optional[Settings] = None):
        """
        팩토리 초기화

        Args:
            config: 실험 설정
            settings: 환경 설정 (None이면 기본값)
        """
        self._config = config
        self._settings = settings or Settings()
        self._dataset: Optional[PreparedDataset] = None

    @property
    def config(self) -> RunConfig:
        return self._config

    @property
    def settings(self) -> Settings:
        return self._settings

    def load_dataset(self) -> PreparedDataset:
        """전처리 데이터셋 로드 (한 번만)"""
        if self._dataset is None:
            data = self._config.data
            if not data.dataset_dir:
                raise ConfigError("data.dataset_dir is not set")
            self._dataset = load_prepared_dataset(
                data.dataset_dir,
                d_txt=data.d_txt,
                d_img=data.d_img,
                max_seq_len=data.max_seq_len,
            )
        return self._dataset

    def create_metrics_logger(self, path: Optional[Union[str, Path]] = None) -> MetricsLogger:
        return MetricsLogger(path, flush_every=self._settings.metrics_flush)

    def create_engine(
        self,
        config: Optional[RunConfig] = None,
        metrics: Optional[IMetricsSink] = None,
        trace: Optional[NegativeTrace] = None,
    ) -> TrainingEngine:
        """학습 엔진 생성 (config 를 주면 데이터셋은 공유하고 설정만 교체)"""
        return TrainingEngine(config or self._config, self.load_dataset(), metrics=metrics, trace=trace)

    def create_encoder(self, snapshot: PolicySnapshot, config: Optional[RunConfig] = None) -> SequentialEncoder:
        run_config = config or self._config
        return SequentialEncoder.from_snapshot(run_config.encoder_config(), self.load_dataset().catalog, snapshot)

    def create_scorer(self, snapshot: PolicySnapshot, config: Optional[RunConfig] = None) -> PolicyScorer:
        return PolicyScorer(self.create_encoder(snapshot, config), batch_size=self._config.eval.batch_size)

    def create_popularity_scorer(self) -> PopularityScorer:
        return PopularityScorer(self.load_dataset().catalog)

    def create_evaluator(self) -> Evaluator:
        return Evaluator(self.load_dataset().split)
