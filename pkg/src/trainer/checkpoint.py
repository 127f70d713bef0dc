"""
Checkpoint - 학습 상태 저장 / 복원

디렉터리 구성:
    policy.snap      현재 정책 파라미터
    adam_m.snap      Adam 1차 모멘트
    adam_v.snap      Adam 2차 모멘트
    best.snap        검증 최고 스냅샷 (있을 때)
    reference.snap   고정 참조 정책 (Stage 2)
    state.json       스텝 / 에폭 / RNG 상태 / 조기 종료 카운터
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

from ..domain.errors import DataFormatError
from ..encoder.snapshot import PolicySnapshot, load_snapshot, save_snapshot

logger = logging.getLogger(__name__)

CHECKPOINT_VERSION = 1
STATE_FILE = "state.json"
POLICY_FILE = "policy.snap"
ADAM_M_FILE = "adam_m.snap"
ADAM_V_FILE = "adam_v.snap"
BEST_FILE = "best.snap"
REFERENCE_FILE = "reference.snap"


@dataclass
class TrainState:
    """재개 가능한 학습 상태"""
    stage: int
    policy: PolicySnapshot
    epoch: int = 0
    step: int = 0
    batch_in_epoch: int = 0
    adam_m: Optional[PolicySnapshot] = None
    adam_v: Optional[PolicySnapshot] = None
    adam_t: int = 0
    rng_states: Dict[str, Any] = field(default_factory=dict)
    best: Optional[PolicySnapshot] = None
    best_metric: float = float("-inf")
    best_epoch: int = -1
    epochs_without_improvement: int = 0
    reference: Optional[PolicySnapshot] = None
    reference_checksum: str = ""
    stopped_early: bool = False
    completed: bool = False

    @property
    def final_policy(self) -> PolicySnapshot:
        """Stage 2 는 검증 최고 스냅샷, 그 외는 마지막 스냅샷"""
        if self.stage == 2 and self.best is not None:
            return self.best
        return self.policy

    def scalars(self) -> Dict[str, Any]:
        return {
            "version": CHECKPOINT_VERSION,
            "stage": self.stage,
            "epoch": self.epoch,
            "step": self.step,
            "batch_in_epoch": self.batch_in_epoch,
            "adam_t": self.adam_t,
            "rng_states": self.rng_states,
            "best_metric": self.best_metric if self.best is not None else None,
            "best_epoch": self.best_epoch,
            "epochs_without_improvement": self.epochs_without_improvement,
            "reference_checksum": self.reference_checksum,
            "policy_checksum": self.policy.checksum(),
            "stopped_early": self.stopped_early,
            "completed": self.completed,
        }


def save_checkpoint(directory: Union[str, Path], state: TrainState) -> Path:
    """체크포인트 디렉터리 저장 (state.json 은 마지막에 기록)"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    save_snapshot(directory / POLICY_FILE, state.policy)
    if state.adam_m is not None and state.adam_v is not None:
        save_snapshot(directory / ADAM_M_FILE, state.adam_m)
        save_snapshot(directory / ADAM_V_FILE, state.adam_v)
    if state.best is not None:
        save_snapshot(directory / BEST_FILE, state.best)
    if state.reference is not None:
        save_snapshot(directory / REFERENCE_FILE, state.reference)
    state_path = directory / STATE_FILE
    with open(state_path, "w", encoding="utf-8") as f:
        json.dump(state.scalars(), f, indent=2, sort_keys=True)
    logger.debug(f"checkpoint 저장: {directory} (stage={state.stage}, step={state.step})")
    return directory


def _optional_snapshot(path: Path) -> Optional[PolicySnapshot]:
    return load_snapshot(path) if path.is_file() else None


def load_checkpoint(directory: Union[str, Path]) -> TrainState:
    """체크포인트 디렉터리 로드"""
    directory = Path(directory)
    state_path = directory / STATE_FILE
    if not state_path.is_file():
        raise FileNotFoundError(f"checkpoint state not found: {state_path}")
    try:
        with open(state_path, "r", encoding="utf-8") as f:
            payload = json.load(f)
    except json.JSONDecodeError as e:
        raise DataFormatError(f"malformed checkpoint state: {e}", path=str(state_path))
    if payload.get("version") != CHECKPOINT_VERSION:
        raise DataFormatError(f"unsupported checkpoint version {payload.get('version')}", path=str(state_path))

    policy = load_snapshot(directory / POLICY_FILE)
    if policy.checksum() != payload.get("policy_checksum"):
        raise DataFormatError("policy snapshot does not match state.json checksum", path=str(directory))
    reference = _optional_snapshot(directory / REFERENCE_FILE)
    if reference is not None:
        reference = reference.freeze()
    best = _optional_snapshot(directory / BEST_FILE)
    best_metric = payload.get("best_metric")
    return TrainState(
        stage=int(payload["stage"]),
        policy=policy,
        epoch=int(payload["epoch"]),
        step=int(payload["step"]),
        batch_in_epoch=int(payload["batch_in_epoch"]),
        adam_m=_optional_snapshot(directory / ADAM_M_FILE),
        adam_v=_optional_snapshot(directory / ADAM_V_FILE),
        adam_t=int(payload["adam_t"]),
        rng_states=payload.get("rng_states", {}),
        best=best,
        best_metric=float(best_metric) if best_metric is not None else float("-inf"),
        best_epoch=int(payload.get("best_epoch", -1)),
        epochs_without_improvement=int(payload.get("epochs_without_improvement", 0)),
        reference=reference,
        reference_checksum=payload.get("reference_checksum", ""),
        stopped_early=bool(payload.get("stopped_early", False)),
        completed=bool(payload.get("completed", False)),
    )


def read_checkpoint_policy(path: Union[str, Path]) -> PolicySnapshot:
    """평가용 정책 로드 (체크포인트 디렉터리면 최종 정책, 파일이면 스냅샷 그대로)"""
    path = Path(path)
    if path.is_dir():
        return load_checkpoint(path).final_policy
    if not path.is_file():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    return load_snapshot(path)
