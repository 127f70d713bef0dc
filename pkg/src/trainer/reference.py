"""
Reference Policy - 고정 참조 정책 π_ref
"""
import logging
from typing import Union

import numpy as np

from ..data.batching import Batch
from ..domain.errors import ContractViolationError
from ..domain.models import ItemCatalog
from ..encoder.model import SequentialEncoder
from ..encoder.params import EncoderConfig
from ..encoder.snapshot import PolicySnapshot

logger = logging.getLogger(__name__)


def snapshot_reference(policy: Union[SequentialEncoder, PolicySnapshot]) -> PolicySnapshot:
    """정책의 읽기 전용 깊은 복사본"""
    snapshot = policy.to_snapshot() if isinstance(policy, SequentialEncoder) else policy
    for name, values in snapshot.items():
        if not np.all(np.isfinite(values)):
            raise ContractViolationError(f"cannot freeze a reference with non-finite tensor {name}")
    return snapshot.freeze()


class ReferencePolicy:
    """평가 모드로만 점수를 내는 고정 정책

    calls 는 score_batch 호출 횟수이며, 평가 경로에서 0 으로 유지되어야 한다.
    """

    def __init__(self, snapshot: PolicySnapshot, config: EncoderConfig, catalog: ItemCatalog):
        self.snapshot = snapshot if snapshot.frozen else snapshot_reference(snapshot)
        self.checksum = self.snapshot.checksum()
        self.encoder = SequentialEncoder.from_snapshot(config, catalog, self.snapshot)
        for tensor in self.encoder.parameters():
            tensor.requires_grad = False
        self.calls = 0

    def score_batch(self, batch: Batch) -> np.ndarray:
        """(B, |I|) 참조 로짓 (노이즈 / 그래디언트 없음)"""
        self.calls += 1
        return self.encoder.score_batch(batch)

    def current_checksum(self) -> str:
        return self.encoder.to_snapshot().checksum()

    def verify(self) -> None:
        """참조 파라미터가 고정 시점과 같은지 확인"""
        if self.snapshot.checksum() != self.checksum or self.current_checksum() != self.checksum:
            raise ContractViolationError("reference policy parameters changed during training")
