"""
Tensor / Tape - 역전파 테이프 기반 밀집 텐서 코어
"""
import logging
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from ..domain.errors import DimensionError, NonFiniteError

logger = logging.getLogger(__name__)

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]

_active_tapes: List["Tape"] = []
_grad_enabled: List[bool] = [True]


class Tensor:
    """밀집 텐서 (numpy 배열 값 + 선택적 그래디언트 누적기)

    values 는 forward 연산이 만든 뒤 수정하지 않는다. 파라미터 갱신은
    새 배열을 대입하는 방식으로만 이뤄진다.
    """

    __slots__ = ("values", "grad", "requires_grad", "name", "grad_updates", "_recorded")

    def __init__(self, values, requires_grad: bool = False, name: str = "", dtype=None):
        array = np.asarray(values, dtype=dtype)
        if array.dtype.kind != "f":
            array = array.astype(np.float64)
        self.values: np.ndarray = array
        self.grad: Optional[np.ndarray] = None
        self.requires_grad = requires_grad
        self.name = name
        self.grad_updates = 0
        self._recorded = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape)

    @property
    def dtype(self):
        return self.values.dtype

    @property
    def is_leaf(self) -> bool:
        return not self._recorded

    def zero_grad(self) -> None:
        self.grad = None
        self.grad_updates = 0

    def numpy(self) -> np.ndarray:
        return self.values

    def item(self) -> float:
        if self.values.size != 1:
            raise DimensionError(f"item() needs a single value, got shape {self.shape}")
        return float(self.values.reshape(-1)[0])

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}, dtype={self.dtype}{label}, requires_grad={self.requires_grad})"


@dataclass
class TapeRecord:
    """연산 1회 기록 (출력, 입력, backward 함수)"""
    op: str
    output: Tensor
    inputs: Tuple[Tensor, ...]
    backward: BackwardFn


class Tape:
    """역전파 테이프

    with 블록 안에서 실행된 연산만 기록되며, backward 는 기록을 역순으로
    재생해 리프 텐서마다 그래디언트를 한 번만 누적한다.
    """

    def __init__(self):
        self.records: List[TapeRecord] = []

    def __enter__(self) -> "Tape":
        _active_tapes.append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _active_tapes.remove(self)

    def __len__(self) -> int:
        return len(self.records)

    def record(self, op: str, output: Tensor, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> None:
        output._recorded = True
        self.records.append(TapeRecord(op, output, inputs, backward))

    def clear(self) -> None:
        self.records.clear()

    def backward(self, loss: Tensor) -> Dict[str, np.ndarray]:
        """스칼라 loss 에서 역전파

        Returns:
            이름이 있는 리프 텐서의 이번 패스 그래디언트
        """
        if loss.values.size != 1:
            raise DimensionError(f"backward needs a scalar loss, got shape {loss.shape}")

        grads: Dict[int, np.ndarray] = {id(loss): np.ones_like(loss.values)}
        leaves: Dict[int, Tensor] = {}

        for record in reversed(self.records):
            grad_out = grads.pop(id(record.output), None)
            if grad_out is None:
                continue
            input_grads = record.backward(grad_out)
            for tensor, grad in zip(record.inputs, input_grads):
                if grad is None or not tensor.requires_grad:
                    continue
                if grad.shape != tensor.values.shape:
                    raise DimensionError(
                        f"{record.op} backward produced {grad.shape} for input {tensor.values.shape}"
                    )
                key = id(tensor)
                grads[key] = grads[key] + grad if key in grads else grad
                if tensor.is_leaf:
                    leaves[key] = tensor

        flushed: Dict[str, np.ndarray] = {}
        for key, tensor in leaves.items():
            grad = grads[key].astype(tensor.values.dtype, copy=False)
            if not np.all(np.isfinite(grad)):
                raise NonFiniteError(f"non-finite gradient for {tensor.name or 'tensor'}")
            tensor.grad = grad.copy() if tensor.grad is None else tensor.grad + grad
            tensor.grad_updates += 1
            if tensor.name:
                flushed[tensor.name] = grad
        self.clear()
        return flushed


def current_tape() -> Optional[Tape]:
    if not _active_tapes or not _grad_enabled[-1]:
        return None
    return _active_tapes[-1]


@contextmanager
def no_grad() -> Iterator[None]:
    """블록 안의 연산은 테이프에 기록하지 않는다"""
    _grad_enabled.append(False)
    try:
        yield
    finally:
        _grad_enabled.pop()


def record_op(op: str, values: np.ndarray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """연산 결과 텐서 생성 및 (필요 시) 테이프 기록

    사용자 정의 primitive 도 이 함수로 등록한다.
    """
    tape = current_tape()
    inputs = tuple(inputs)
    track = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(values, requires_grad=track)
    if track:
        tape.record(op, out, inputs, backward)
    return out
