"""
Sparse Noisy MoE - top-k 게이팅 전문가 혼합층
"""
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from ..numerics import (
    Tensor,
    add,
    gelu,
    matmul,
    mean,
    mul,
    pick,
    reshape,
    scatter_rows,
    softmax,
    softplus,
    sub,
    take_rows,
)
from ..numerics import sum as tsum
from .params import EncoderParams

# top-k 밖 게이트 로짓에 더하는 값 (softmax 후 정확히 0)
_EXCLUDED_LOGIT = -1e30


def feed_forward(x: Tensor, params: EncoderParams, prefix: str) -> Tensor:
    """2층 feed-forward: gelu(x W1 + b1) W2 + b2"""
    hidden = gelu(add(matmul(x, params[f"{prefix}.w1"]), params[f"{prefix}.b1"]))
    return add(matmul(hidden, params[f"{prefix}.w2"]), params[f"{prefix}.b2"])


@dataclass
class GateDecision:
    """게이트 결과 (선택 전문가, 가중치)"""
    selected: np.ndarray   # (N, k) 로짓 내림차순, 동점 시 낮은 index
    weights: Tensor        # (N, E), 선택 밖은 0
    logits: np.ndarray     # (N, E) 노이즈 포함 게이트 로짓


class MoELayer:
    """Sparse noisy top-k MoE (잔차 연결 포함)

    선택되지 않은 전문가는 계산하지 않으며, expert_calls / expert_tokens
    카운터로 확인할 수 있다.
    """

    def __init__(self, params: EncoderParams, prefix: str, n_experts: int, active_k: int):
        if not 1 <= active_k <= n_experts:
            raise ValueError(f"active_k must be in 1..{n_experts}, got {active_k}")
        self.params = params
        self.prefix = prefix
        self.n_experts = n_experts
        self.active_k = active_k
        self.expert_calls = np.zeros(n_experts, dtype=np.int64)
        self.expert_tokens = np.zeros(n_experts, dtype=np.int64)
        self.last_decision: Optional[GateDecision] = None
        self.decisions: List[GateDecision] = []

    def reset_counters(self) -> None:
        self.expert_calls[:] = 0
        self.expert_tokens[:] = 0

    def clear_decisions(self) -> None:
        self.decisions = []
        self.last_decision = None

    def gate(self, h: Tensor, training: bool = False, rng: Optional[np.random.Generator] = None) -> GateDecision:
        """noisy top-k 게이트

        Args:
            h: (N, d) 토큰 표현
            training: 학습 모드면 softplus(h W_noise) 스케일 가우시안 노이즈 추가
            rng: moe-noise 스트림 (학습 모드 필수)
        """
        logits = matmul(h, self.params[f"{self.prefix}.gate"])
        if training:
            if rng is None:
                raise ValueError("training-mode gating needs an rng")
            noise_scale = softplus(matmul(h, self.params[f"{self.prefix}.noise"]))
            eps = rng.standard_normal(logits.shape).astype(logits.dtype)
            logits = add(logits, mul(noise_scale, Tensor(eps)))

        values = logits.values
        selected = np.argsort(-values, axis=1, kind="stable")[:, : self.active_k]
        keep = np.zeros(values.shape, dtype=bool)
        np.put_along_axis(keep, selected, True, axis=1)
        exclusion = Tensor(np.where(keep, 0.0, _EXCLUDED_LOGIT).astype(values.dtype))
        weights = softmax(add(logits, exclusion), axis=-1)
        return GateDecision(selected=selected, weights=weights, logits=values)

    def mixture(self, h: Tensor, decision: GateDecision) -> Tensor:
        """Σ_{j∈S(h)} G(h)_j · E_j(h) (선택된 토큰만 전문가에 전달)"""
        n_tokens = h.shape[0]
        combined: Optional[Tensor] = None
        for j in range(self.n_experts):
            rows = np.flatnonzero((decision.selected == j).any(axis=1))
            if rows.size == 0:
                continue
            self.expert_calls[j] += 1
            self.expert_tokens[j] += rows.size
            out_j = feed_forward(take_rows(h, rows), self.params, f"{self.prefix}.expert{j}")
            weight_j = reshape(pick(decision.weights, rows, np.full(rows.size, j)), (rows.size, 1))
            contribution = scatter_rows(mul(out_j, weight_j), rows, n_tokens)
            combined = contribution if combined is None else add(combined, contribution)
        return combined

    def forward(self, h: Tensor, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
        """h + MoE(h)"""
        decision = self.gate(h, training, rng)
        self.last_decision = decision
        if training:
            self.decisions.append(decision)
        return add(h, self.mixture(h, decision))

    def balance_loss(self, decision: Optional[GateDecision] = None) -> Tensor:
        """중요도 변동계수 제곱 (전문가별 게이트 가중치 합의 CV²)"""
        decision = decision or self.last_decision
        importance = tsum(decision.weights, axis=0)
        centered = sub(importance, mean(importance))
        variance = mean(mul(centered, centered))
        mu = float(np.mean(importance.values))
        return mul(variance, Tensor(np.asarray(1.0 / (mu * mu + 1e-10), dtype=importance.dtype)))


def noisy_topk_gate(h: Tensor, moe: MoELayer, training: bool = False, rng: Optional[np.random.Generator] = None) -> GateDecision:
    return moe.gate(h, training, rng)


def moe_forward(h: Tensor, moe: MoELayer, training: bool = False, rng: Optional[np.random.Generator] = None) -> Tensor:
    return moe.forward(h, training, rng)
