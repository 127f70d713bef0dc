"""
Metrics Logger - 스텝 / 에폭 단위 JSONL 메트릭 기록
"""
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from ..domain.interfaces import IMetricsSink

logger = logging.getLogger(__name__)

RECORD_KEYS = ("stage", "epoch", "step", "loss_ce", "loss_dpo", "loss_total", "ndcg@5", "mrr@5", "wall_ms")


def _clean(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


class MetricsLogger(IMetricsSink):
    """append-only JSONL 메트릭 로그

    path 가 None 이면 메모리에만 보관한다 (테스트 / sweep 하위 실행).
    """

    def __init__(self, path: Optional[Union[str, Path]] = None, flush_every: int = 1):
        self.path = Path(path) if path is not None else None
        self.flush_every = max(1, flush_every)
        self.records: List[Dict[str, Any]] = []
        self._pending: List[str] = []
        if self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)

    def write(self, record: Dict[str, Any]) -> None:
        row = {key: _clean(record.get(key)) for key in RECORD_KEYS}
        for key, value in record.items():
            if key not in row:
                row[key] = _clean(value)
        self.records.append(row)
        if self.path is None:
            return
        self._pending.append(json.dumps(row, sort_keys=False))
        if len(self._pending) >= self.flush_every:
            self.flush()

    def flush(self) -> None:
        if self.path is None or not self._pending:
            return
        with open(self.path, "a", encoding="utf-8") as f:
            f.write("\n".join(self._pending) + "\n")
        self._pending = []

    def close(self) -> None:
        self.flush()


def read_metrics(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """JSONL 메트릭 로그 읽기"""
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]
