"""
Efficiency - 학습 스텝 / 추론 배치 소요 시간 측정
"""
import logging
import time
from itertools import cycle, islice
from typing import Callable, List

import numpy as np

from ..data.batching import collate
from ..domain.errors import ConfigError, DatasetEliminatedError
from ..domain.models import PreparedDataset
from ..encoder.params import count_parameters
from ..encoder.snapshot import PolicySnapshot
from ..experiment.config_parser import RunConfig
from ..preference.strategies import get_sampler
from ..trainer.checkpoint import TrainState
from ..trainer.engine import MODE_CE, MODE_RODPO, TrainingEngine
from ..trainer.reference import ReferencePolicy, snapshot_reference
from .models import EfficiencyReport

logger = logging.getLogger(__name__)

MIN_ITERATIONS = 20


def _timed(fn: Callable[[], object], iterations: int, warmup: int) -> List[float]:
    for _ in range(warmup):
        fn()
    samples = []
    for _ in range(iterations):
        started = time.perf_counter()
        fn()
        samples.append((time.perf_counter() - started) * 1000.0)
    return samples


def measure_efficiency(
    config: RunConfig,
    dataset: PreparedDataset,
    snapshot: PolicySnapshot,
    batch_size: int,
    iterations: int = MIN_ITERATIONS,
    warmup: int = 3,
) -> EfficiencyReport:
    """CE 스텝, Stage 2 스텝, 추론 배치의 중앙값 시간 (ms)

    측정용 엔진을 따로 만들기 때문에 호출자의 RNG 스트림은 소비하지 않는다.
    """
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    if iterations < MIN_ITERATIONS:
        raise ConfigError(f"need at least {MIN_ITERATIONS} timed iterations, got {iterations}")
    engine = TrainingEngine(config, dataset)
    examples = dataset.split.training_examples()
    if not examples:
        raise DatasetEliminatedError("no training examples to time")
    batch = collate(list(islice(cycle(examples), batch_size)), dataset.split.max_seq_len, dataset.split.padding_id)

    engine.streams.begin_stage(2)
    ce_encoder = engine.build_encoder(snapshot)
    ce_optimizer = engine.make_optimizer(ce_encoder)
    ce_state = TrainState(stage=2, policy=snapshot)
    ce_ms = _timed(lambda: engine.train_step(ce_encoder, ce_optimizer, batch, MODE_CE, None, ce_state), iterations, warmup)

    engine.reference = ReferencePolicy(snapshot_reference(snapshot), engine.encoder_config, dataset.catalog)
    sampler = get_sampler(config.dpo.strategy, config.dpo.k)
    dpo_encoder = engine.build_encoder(snapshot)
    dpo_optimizer = engine.make_optimizer(dpo_encoder)
    dpo_state = TrainState(stage=2, policy=snapshot)
    dpo_ms = _timed(
        lambda: engine.train_step(dpo_encoder, dpo_optimizer, batch, MODE_RODPO, sampler, dpo_state),
        iterations,
        warmup,
    )

    inference_encoder = engine.build_encoder(snapshot)
    calls_before = engine.reference.calls
    inference_ms = _timed(lambda: inference_encoder.score_batch(batch), iterations, warmup)
    median_inference = float(np.median(inference_ms))

    report = EfficiencyReport(
        n_parameters=count_parameters(
            engine.encoder_config, dataset.catalog.n_items, dataset.catalog.d_txt, dataset.catalog.d_img
        ),
        batch_size=batch_size,
        iterations=iterations,
        ce_step_ms=float(np.median(ce_ms)),
        stage2_step_ms=float(np.median(dpo_ms)),
        inference_ms=median_inference,
        inference_cv=float(np.std(inference_ms) / median_inference) if median_inference > 0 else 0.0,
        reference_calls_during_inference=engine.reference.calls - calls_before,
    )
    logger.info(f"효율 측정 완료: overhead x{report.overhead_ratio:.2f}")
    return report
