"""
Training Engine - 2단계 학습 (Stage 1 CE 워밍업, Stage 2 CE + λ·DPO)
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Union

import numpy as np

from ..data.batching import Batch, batch_iterator
from ..domain.errors import ConfigError, ContractViolationError, DatasetEliminatedError, NonFiniteError
from ..domain.interfaces import IMetricsSink
from ..domain.models import NegativeRecord, NegativeTrace, PreparedDataset
from ..encoder.model import SequentialEncoder
from ..encoder.snapshot import PolicySnapshot
from ..evaluation.metrics import mrr_at_k, ndcg_at_k, rank_targets
from ..experiment.config_parser import RunConfig
from ..numerics import Tape, Tensor, add, scale
from ..preference.losses import batch_ce_loss, batch_dpo_loss
from ..preference.strategies import get_sampler, make_pairs
from .checkpoint import STATE_FILE, TrainState, load_checkpoint, save_checkpoint
from .metrics_log import MetricsLogger
from .optimizer import Adam
from .reference import ReferencePolicy, snapshot_reference
from .rng import RngStreams

logger = logging.getLogger(__name__)

# 학습 모드: Stage 1 워밍업, Stage 2 RoDPO, Stage 2 예산의 CE 전용 연장
MODE_WARMUP = "stage1"
MODE_RODPO = "stage2"
MODE_CE = "ce"

_STAGE_OF_MODE = {MODE_WARMUP: 1, MODE_RODPO: 2, MODE_CE: 2}


@dataclass
class StepResult:
    """학습 스텝 1회 결과"""
    loss_ce: float
    loss_dpo: Optional[float]
    loss_balance: float
    loss_total: float
    grad_norm: float
    wall_ms: float


class TrainingEngine:
    """2단계 학습 엔진

    RNG 스트림 소비 순서:
        init         initial_policy() 에서만
        data-shuffle 에폭 시드 (stage, epoch) 로 파생, 상태 미소비
        moe-noise    학습 모드 정책 forward 의 게이트 노이즈
        sampler      Stage 2 패자 샘플링
    """

    def __init__(
        self,
        config: RunConfig,
        dataset: PreparedDataset,
        metrics: Optional[IMetricsSink] = None,
        trace: Optional[NegativeTrace] = None,
    ):
        self.config = config
        self.encoder_config = config.encoder_config()
        self.encoder_config.validate()
        if dataset.split.max_seq_len != self.encoder_config.max_seq_len:
            raise ConfigError(
                f"dataset max_seq_len {dataset.split.max_seq_len} != model max_seq_len {self.encoder_config.max_seq_len}"
            )
        self.dataset = dataset
        self.metrics = metrics if metrics is not None else MetricsLogger()
        self.trace = trace if trace is not None else NegativeTrace()
        self.streams = RngStreams(config.seed)
        self.reference: Optional[ReferencePolicy] = None
        self.last_state: Optional[TrainState] = None
        self.step_history: List[StepResult] = []
        self._examples = dataset.split.training_examples()
        self._valid_examples = dataset.split.eval_examples("valid")

    # ============ Policies ============

    def initial_policy(self) -> PolicySnapshot:
        """init 스트림으로 초기화한 정책 (호출마다 동일)"""
        encoder = SequentialEncoder.initialize(self.encoder_config, self.dataset.catalog, self.streams.fresh("init"))
        return encoder.to_snapshot()

    def build_encoder(self, snapshot: PolicySnapshot) -> SequentialEncoder:
        return SequentialEncoder.from_snapshot(self.encoder_config, self.dataset.catalog, snapshot)

    def make_optimizer(self, encoder: SequentialEncoder) -> Adam:
        train_cfg = self.config.train
        return Adam(
            encoder.params,
            lr=train_cfg.learning_rate,
            betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
            eps=train_cfg.adam_eps,
            max_grad_norm=train_cfg.grad_clip,
        )

    # ============ Public stages ============

    def stage1_warmup(
        self,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        stop_at_step: Optional[int] = None,
        resume: bool = False,
    ) -> PolicySnapshot:
        """CE 워밍업 → π_sft (마지막 스냅샷)"""
        state = self.run(
            MODE_WARMUP,
            self.initial_policy(),
            self.config.train.stage1_epochs,
            checkpoint_dir=checkpoint_dir,
            stop_at_step=stop_at_step,
            resume=resume,
        )
        return state.final_policy

    def stage2_rodpo(
        self,
        sft: PolicySnapshot,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        stop_at_step: Optional[int] = None,
        resume: bool = False,
    ) -> PolicySnapshot:
        """π_θ ← π_sft, π_ref ← freeze(π_sft) 후 CE + λ·DPO 학습 → 검증 최고 π_θ"""
        state = self.run(
            MODE_RODPO,
            sft,
            self.config.train.stage2_max_epochs,
            checkpoint_dir=checkpoint_dir,
            stop_at_step=stop_at_step,
            resume=resume,
        )
        return state.final_policy

    def continue_ce(
        self,
        sft: PolicySnapshot,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        stop_at_step: Optional[int] = None,
        resume: bool = False,
    ) -> TrainState:
        """Stage 2 와 같은 예산 / 시드로 CE 만 계속 학습 (DPO 제외 기준선)"""
        return self.run(
            MODE_CE,
            sft,
            self.config.train.stage2_max_epochs,
            checkpoint_dir=checkpoint_dir,
            stop_at_step=stop_at_step,
            resume=resume,
        )

    # ============ Loop ============

    def run(
        self,
        mode: str,
        start: PolicySnapshot,
        epochs: int,
        checkpoint_dir: Optional[Union[str, Path]] = None,
        stop_at_step: Optional[int] = None,
        resume: bool = False,
    ) -> TrainState:
        """공통 학습 루프

        Args:
            mode: stage1 / stage2 / ce
            start: 시작 정책
            epochs: 최대 에폭 수
            checkpoint_dir: 주어지면 종료 / 중단 시 체크포인트 저장
            stop_at_step: 전체 스텝 수가 이 값에 도달하면 중단 (재개 가능 상태로 저장)
            resume: checkpoint_dir 에 상태가 있으면 이어서 학습
        """
        if mode not in _STAGE_OF_MODE:
            raise ConfigError(f"Unknown training mode: {mode}")
        if not self._examples:
            raise DatasetEliminatedError("no training examples; every user has fewer than 2 training items")
        stage = _STAGE_OF_MODE[mode]
        train_cfg = self.config.train

        state = self._resume_state(checkpoint_dir, stage) if resume else None
        if state is not None and state.completed:
            logger.info(f"[{mode}] 완료된 체크포인트 사용: {checkpoint_dir}")
            self.last_state = state
            return state

        encoder = self.build_encoder(start if state is None else state.policy)
        optimizer = self.make_optimizer(encoder)
        if state is None:
            state = TrainState(stage=stage, policy=start)
            self.streams.begin_stage(stage)
            if mode == MODE_RODPO:
                state.reference = snapshot_reference(start)
                state.reference_checksum = state.reference.checksum()
        else:
            optimizer.load_state(state.adam_m.tensors, state.adam_v.tensors, state.adam_t)
            self.streams.set_state(state.rng_states)
            logger.info(f"[{mode}] 재개: epoch={state.epoch}, step={state.step}")

        self.reference = None
        if mode == MODE_RODPO:
            self.reference = ReferencePolicy(state.reference, self.encoder_config, self.dataset.catalog)
            if self.reference.checksum != state.reference_checksum:
                raise ContractViolationError("reference snapshot in checkpoint does not match its recorded checksum")
            sampler = get_sampler(self.config.dpo.strategy, self.config.dpo.k)
            logger.info(
                f"[{mode}] strategy={sampler.strategy.value}, K={self.config.dpo.k}, "
                f"beta={self.config.dpo.beta}, lambda={self.config.dpo.lam}"
            )
        else:
            sampler = None

        while state.epoch < epochs and not state.stopped_early:
            epoch_start = time.perf_counter()
            seed = self.streams.epoch_seed(stage, state.epoch)
            losses: List[StepResult] = []
            for batch in batch_iterator(
                self.dataset.split,
                train_cfg.batch_size,
                shuffle_seed=seed,
                start_batch=state.batch_in_epoch,
                examples=self._examples,
            ):
                if stop_at_step is not None and state.step >= stop_at_step:
                    return self._finish(state, encoder, optimizer, checkpoint_dir)
                result = self.train_step(encoder, optimizer, batch, mode, sampler, state)
                losses.append(result)
                self._log_step(mode, state, result)
                state.step += 1
                state.batch_in_epoch += 1

            self._end_epoch(mode, state, encoder, losses, time.perf_counter() - epoch_start)
            state.epoch += 1
            state.batch_in_epoch = 0

        state.completed = True
        return self._finish(state, encoder, optimizer, checkpoint_dir)

    def _resume_state(self, checkpoint_dir, stage: int) -> Optional[TrainState]:
        if checkpoint_dir is None or not (Path(checkpoint_dir) / STATE_FILE).is_file():
            return None
        state = load_checkpoint(checkpoint_dir)
        if state.stage != stage:
            raise ConfigError(f"checkpoint {checkpoint_dir} holds stage {state.stage}, expected stage {stage}")
        return state

    def _finish(self, state: TrainState, encoder: SequentialEncoder, optimizer: Adam, checkpoint_dir) -> TrainState:
        if self.reference is not None:
            self.reference.verify()
        state.policy = encoder.to_snapshot()
        m, v = optimizer.state_arrays()
        state.adam_m = PolicySnapshot.from_arrays(m)
        state.adam_v = PolicySnapshot.from_arrays(v)
        state.adam_t = optimizer.step_count
        state.rng_states = self.streams.get_state()
        if checkpoint_dir is not None:
            save_checkpoint(checkpoint_dir, state)
        flush = getattr(self.metrics, "flush", None)
        if flush is not None:
            flush()
        self.last_state = state
        return state

    # ============ Step ============

    def _parameter_norms(self, encoder: SequentialEncoder) -> Dict[str, float]:
        return {name: float(np.linalg.norm(t.values)) for name, t in encoder.params.items()}

    def _sample_losers(self, logits: np.ndarray, batch: Batch, sampler, step: int) -> np.ndarray:
        histories = None
        if self.config.dpo.exclude_history:
            histories = [batch.item_ids[row][batch.mask[row]].tolist() for row in range(len(batch))]
        labels = self.dataset.labels
        pairs = make_pairs(
            logits,
            batch.user_ids,
            batch.targets,
            sampler,
            self.streams["sampler"],
            histories=histories,
            false_negatives=labels.false_negatives if labels is not None else None,
        )
        self.trace.extend([
            NegativeRecord(step=step, user_id=p.user_id, winner=p.winner, loser=p.loser, strategy=p.strategy.value)
            for p in pairs
        ])
        return np.array([p.loser for p in pairs], dtype=np.int64)

    def _balance_term(self, encoder: SequentialEncoder) -> Optional[Tensor]:
        term = None
        for layer in encoder.moe_layers():
            for decision in layer.decisions:
                loss = layer.balance_loss(decision)
                term = loss if term is None else add(term, loss)
        return term

    def train_step(
        self,
        encoder: SequentialEncoder,
        optimizer: Adam,
        batch: Batch,
        mode: str,
        sampler,
        state: TrainState,
    ) -> StepResult:
        started = time.perf_counter()
        dpo_cfg = self.config.dpo
        coef = self.config.moe.balance_coef
        for layer in encoder.moe_layers():
            layer.clear_decisions()
        try:
            with Tape() as tape:
                out = encoder.forward(batch, training=True, rng=self.streams["moe-noise"])
                ce = batch_ce_loss(out.logits, batch.targets)
                total = ce
                dpo_value = None
                if mode == MODE_RODPO:
                    losers = self._sample_losers(out.logits.values, batch, sampler, state.step)
                    if dpo_cfg.lam > 0:
                        reference_logits = self.reference.score_batch(batch)
                        dpo = batch_dpo_loss(out.logits, reference_logits, batch.targets, losers, dpo_cfg.beta)
                        dpo_value = dpo.item()
                        total = add(ce, scale(dpo, dpo_cfg.lam))
                balance_value = 0.0
                if coef > 0:
                    balance = self._balance_term(encoder)
                    if balance is not None:
                        balance_value = balance.item()
                        total = add(total, scale(balance, coef))
                total_value = total.item()
                if not np.isfinite(total_value):
                    raise NonFiniteError(f"non-finite loss {total_value}")
                tape.backward(total)
            optimizer.step()
        except NonFiniteError as e:
            error = NonFiniteError(
                f"training diverged: {e}",
                step=state.step,
                batch_index=state.batch_in_epoch,
                parameter_norms=self._parameter_norms(encoder),
            )
            logger.error(f"학습 중단: {error}")
            raise error from e

        result = StepResult(
            loss_ce=ce.item(),
            loss_dpo=dpo_value,
            loss_balance=balance_value,
            loss_total=total_value,
            grad_norm=optimizer.last_grad_norm,
            wall_ms=(time.perf_counter() - started) * 1000.0,
        )
        self.step_history.append(result)
        return result

    # ============ Logging / validation ============

    def _log_step(self, mode: str, state: TrainState, result: StepResult) -> None:
        self.metrics.write({
            "stage": mode,
            "epoch": state.epoch,
            "step": state.step,
            "loss_ce": result.loss_ce,
            "loss_dpo": result.loss_dpo,
            "loss_total": result.loss_total,
            "ndcg@5": None,
            "mrr@5": None,
            "wall_ms": round(result.wall_ms, 3),
            "kind": "step",
        })

    def validate(self, encoder: SequentialEncoder) -> Dict[str, float]:
        """검증 NDCG@5 / MRR@5 (평가 모드, 난수 미사용)"""
        logits = encoder.score_examples(self._valid_examples, self.config.eval.batch_size)
        ranks = rank_targets(logits, [e.target for e in self._valid_examples])
        return {"ndcg@5": ndcg_at_k(ranks, 5), "mrr@5": mrr_at_k(ranks, 5)}

    def _end_epoch(
        self,
        mode: str,
        state: TrainState,
        encoder: SequentialEncoder,
        losses: List[StepResult],
        elapsed: float,
    ) -> None:
        scores = self.validate(encoder)
        dpo_values = [r.loss_dpo for r in losses if r.loss_dpo is not None]
        record = {
            "stage": mode,
            "epoch": state.epoch,
            "step": state.step,
            "loss_ce": float(np.mean([r.loss_ce for r in losses])) if losses else None,
            "loss_dpo": float(np.mean(dpo_values)) if dpo_values else None,
            "loss_total": float(np.mean([r.loss_total for r in losses])) if losses else None,
            "ndcg@5": scores["ndcg@5"],
            "mrr@5": scores["mrr@5"],
            "wall_ms": round(elapsed * 1000.0, 3),
            "kind": "epoch",
        }
        self.metrics.write(record)
        loss_text = f"{record['loss_total']:.4f}" if record["loss_total"] is not None else "n/a"
        logger.info(
            f"[{mode}] epoch {state.epoch + 1}: loss={loss_text} "
            f"valid NDCG@5={scores['ndcg@5']:.4f} MRR@5={scores['mrr@5']:.4f}"
        )

        if self.reference is not None:
            self.reference.verify()

        metric = scores["ndcg@5"]
        if metric > state.best_metric:
            state.best_metric = metric
            state.best_epoch = state.epoch
            state.best = encoder.to_snapshot()
            state.epochs_without_improvement = 0
        else:
            state.epochs_without_improvement += 1
        if state.stage == 2 and state.epochs_without_improvement >= self.config.train.patience:
            state.stopped_early = True
            logger.info(f"[{mode}] 조기 종료: {state.epochs_without_improvement} 에폭 동안 개선 없음")
