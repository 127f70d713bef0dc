"""
Gradient Checker - 중앙 차분 기반 그래디언트 검증
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from ..domain.errors import GradientContractError
from .tensor import Tape, Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class GradientReport:
    """파라미터 텐서별 최대 상대 오차"""
    errors: Dict[str, float] = field(default_factory=dict)
    tol: float = 1e-4

    @property
    def max_error(self) -> float:
        return max(self.errors.values(), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_error < self.tol

    @property
    def worst(self) -> Optional[str]:
        if not self.errors:
            return None
        return max(self.errors, key=self.errors.get)

    def get_summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"gradient check {status} (max={self.max_error:.3e}, tol={self.tol:.1e})"]
        for name, err in self.errors.items():
            lines.append(f"  {name}: {err:.3e}")
        return "\n".join(lines)


def _evaluate(fn: Callable[[], Tensor]) -> float:
    with no_grad():
        return float(np.asarray(fn().values, dtype=np.float64).reshape(-1)[0])


def check_gradients(
    fn: Callable[[], Tensor],
    params: Sequence[Tensor],
    eps: float = 1e-5,
    tol: float = 1e-4,
    floor: float = 1e-8,
    max_entries: Optional[int] = None,
    seed: int = 0,
) -> GradientReport:
    """해석적 그래디언트와 중앙 차분 비교

    Args:
        fn: 인자 없는 스칼라 함수 (params 를 클로저로 참조)
        params: 검사할 리프 텐서
        eps: 차분 간격
        tol: 통과 기준 상대 오차
        max_entries: 텐서당 검사할 최대 원소 수 (None 이면 전체)

    Returns:
        GradientReport
    """
    first, second = _evaluate(fn), _evaluate(fn)
    if first != second:
        raise GradientContractError(
            f"function is not deterministic: {first!r} != {second!r}"
        )

    for p in params:
        p.zero_grad()
    with Tape() as tape:
        loss = fn()
        tape.backward(loss)

    picker = np.random.default_rng(seed)
    report = GradientReport(tol=tol)
    for index, p in enumerate(params):
        name = p.name or f"param{index}"
        analytic = np.zeros_like(p.values, dtype=np.float64) if p.grad is None else p.grad.astype(np.float64)
        numeric = np.zeros_like(analytic)

        original = p.values
        work = original.copy()
        p.values = work
        flat = work.reshape(-1)
        positions = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            positions = np.sort(picker.choice(flat.size, size=max_entries, replace=False))
        try:
            for pos in positions:
                saved = flat[pos]
                flat[pos] = saved + eps
                plus = _evaluate(fn)
                flat[pos] = saved - eps
                minus = _evaluate(fn)
                flat[pos] = saved
                numeric.reshape(-1)[pos] = (plus - minus) / (2.0 * eps)
        finally:
            p.values = original

        a = analytic.reshape(-1)[positions]
        n = numeric.reshape(-1)[positions]
        scale = max(np.max(np.abs(a), initial=0.0), np.max(np.abs(n), initial=0.0), floor)
        report.errors[name] = float(np.max(np.abs(a - n), initial=0.0) / scale)

    if not report.passed:
        logger.warning(f"그래디언트 검증 실패: {report.worst} error={report.max_error:.3e}")
    return report
