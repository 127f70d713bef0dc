"""
Optimizer - Adam (bias correction) 과 전역 노름 클리핑
"""
from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Dict, Mapping, Tuple

import numpy as np

from ..domain.errors import DimensionError, NonFiniteError
from ..numerics import Tensor


@dataclass
class AdamMoments:
    """파라미터 이름별 1차 / 2차 모멘트와 스텝 수"""
    m: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    v: "OrderedDict[str, np.ndarray]" = field(default_factory=OrderedDict)
    t: int = 0


def adam_step(
    params: Mapping[str, np.ndarray],
    grads: Mapping[str, np.ndarray],
    moments: AdamMoments,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
) -> Dict[str, np.ndarray]:
    """Adam 1 스텝 (새 배열 반환, moments 는 제자리 갱신)

    그래디언트가 없는 파라미터 (이번 스텝에 선택되지 않은 전문가 등) 는 값과
    모멘트를 그대로 둔다. bias correction 은 공유 스텝 수 t 를 쓴다.
    """
    beta1, beta2 = betas
    moments.t += 1
    t = moments.t
    updated = {}
    for name, values in params.items():
        grad = grads.get(name)
        if grad is None:
            updated[name] = values
            continue
        if grad.shape != values.shape:
            raise DimensionError(f"gradient for {name} has shape {grad.shape}, parameter has {values.shape}")
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(f"non-finite gradient for {name}", step=t)
        m = moments.m.get(name)
        v = moments.v.get(name)
        if m is None:
            m = np.zeros_like(values)
            v = np.zeros_like(values)
        m = beta1 * m + (1.0 - beta1) * grad
        v = beta2 * v + (1.0 - beta2) * grad * grad
        moments.m[name] = m.astype(values.dtype, copy=False)
        moments.v[name] = v.astype(values.dtype, copy=False)
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        updated[name] = (values - lr * m_hat / (np.sqrt(v_hat) + eps)).astype(values.dtype, copy=False)
    return updated


def global_norm(grads: Mapping[str, np.ndarray]) -> float:
    total = 0.0
    for grad in grads.values():
        total += float(np.sum(np.square(grad, dtype=np.float64)))
    return float(np.sqrt(total))


def clip_grad_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> Tuple[Dict[str, np.ndarray], float]:
    """전역 L2 노름이 max_norm 을 넘으면 비율 축소

    Returns:
        (클리핑된 그래디언트, 클리핑 전 노름)
    """
    norm = global_norm(grads)
    if not np.isfinite(norm):
        raise NonFiniteError("non-finite gradient norm")
    if norm <= max_norm:
        return dict(grads), norm
    factor = max_norm / (norm + 1e-12)
    return {name: (grad * factor).astype(grad.dtype, copy=False) for name, grad in grads.items()}, norm


class Adam:
    """학습 파라미터 Tensor 묶음에 대한 Adam 옵티마이저"""

    def __init__(
        self,
        params: Mapping[str, Tensor],
        lr: float = 1e-3,
        betas: Tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        max_grad_norm: float = 5.0,
    ):
        self.params = params
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.moments = AdamMoments()
        self.last_grad_norm = 0.0

    @property
    def step_count(self) -> int:
        return self.moments.t

    def zero_grad(self) -> None:
        for tensor in self.params.values():
            tensor.zero_grad()

    def step(self) -> None:
        """누적된 grad 로 1 스텝 갱신 후 grad 초기화"""
        grads = {name: t.grad for name, t in self.params.items() if t.grad is not None}
        if self.max_grad_norm > 0:
            grads, self.last_grad_norm = clip_grad_norm(grads, self.max_grad_norm)
        values = {name: t.values for name, t in self.params.items()}
        updated = adam_step(values, grads, self.moments, self.lr, self.betas, self.eps)
        for name, tensor in self.params.items():
            tensor.values = updated[name]
        self.zero_grad()

    def state_arrays(self) -> Tuple[Dict[str, np.ndarray], Dict[str, np.ndarray]]:
        """체크포인트용 (m, v); 아직 갱신되지 않은 파라미터는 0"""
        m = OrderedDict()
        v = OrderedDict()
        for name, tensor in self.params.items():
            m[name] = self.moments.m.get(name, np.zeros_like(tensor.values))
            v[name] = self.moments.v.get(name, np.zeros_like(tensor.values))
        return m, v

    def load_state(self, m: Mapping[str, np.ndarray], v: Mapping[str, np.ndarray], t: int) -> None:
        dtype_of = {name: tensor.values.dtype for name, tensor in self.params.items()}
        self.moments = AdamMoments(
            m=OrderedDict((k, np.array(a, dtype=dtype_of[k])) for k, a in m.items()),
            v=OrderedDict((k, np.array(a, dtype=dtype_of[k])) for k, a in v.items()),
            t=int(t),
        )
