"""
Losses - 로짓 마진 DPO 손실과 교차 엔트로피
"""
from dataclasses import dataclass

import numpy as np

from ..domain.errors import ConfigError, ContractViolationError
from ..domain.models import PreferencePair
from ..numerics import Tensor, log_sigmoid, log_softmax, mean, pick, scale, sigmoid_array, sub


@dataclass(frozen=True)
class LossValue:
    """스칼라 손실과 점수 벡터에 대한 그래디언트"""
    value: float
    grad: np.ndarray


def _logits(scores) -> np.ndarray:
    return np.asarray(getattr(scores, "logits", scores), dtype=np.float64)


def _check_pair(pair: PreferencePair, n_items: int) -> None:
    for role, item in (("winner", pair.winner), ("loser", pair.loser)):
        if not 0 <= item < n_items:
            raise ContractViolationError(f"{role} {item} is not a scorable item (0..{n_items - 1})")
    if pair.winner == pair.loser:
        raise ContractViolationError("winner equals loser")


def dpo_loss(policy_scores, reference_scores, pair: PreferencePair, beta: float = 1.0) -> LossValue:
    """−log σ(β[(s_θ(y_w) − s_θ(y_l)) − (s_ref(y_w) − s_ref(y_l))])

    그래디언트는 정책 로짓의 y_w / y_l 두 위치에만 존재한다.
    """
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    policy = _logits(policy_scores)
    reference = _logits(reference_scores)
    _check_pair(pair, policy.shape[0])
    margin = (policy[pair.winner] - policy[pair.loser]) - (reference[pair.winner] - reference[pair.loser])
    z = beta * margin
    value = float(-log_sigmoid(z))
    weight = beta * float(sigmoid_array(np.asarray(-z)))
    grad = np.zeros_like(policy)
    grad[pair.winner] = -weight
    grad[pair.loser] = weight
    return LossValue(value=value, grad=grad)


def ce_loss(scores, target: int) -> LossValue:
    """−log softmax(s)[y_w] (패딩 id 는 점수 벡터에 없음)"""
    logits = _logits(scores)
    if not 0 <= target < logits.shape[0]:
        raise ContractViolationError(f"target {target} outside 0..{logits.shape[0] - 1}")
    shifted = logits - logits.max()
    log_z = np.log(np.exp(shifted).sum())
    value = float(log_z - shifted[target])
    grad = np.exp(shifted - log_z)
    grad[target] -= 1.0
    return LossValue(value=value, grad=grad)


# ============ Batched (tape) versions ============

def batch_ce_loss(logits: Tensor, targets: np.ndarray) -> Tensor:
    """배치 평균 교차 엔트로피"""
    log_probs = log_softmax(logits, axis=-1)
    picked = pick(log_probs, np.arange(logits.shape[0]), targets)
    return scale(mean(picked), -1.0)


def batch_dpo_loss(
    logits: Tensor,
    reference_logits: np.ndarray,
    winners: np.ndarray,
    losers: np.ndarray,
    beta: float,
) -> Tensor:
    """배치 평균 로짓 마진 DPO (참조 로짓은 상수)"""
    if beta <= 0:
        raise ConfigError(f"beta must be positive, got {beta}")
    rows = np.arange(logits.shape[0])
    winners = np.asarray(winners, dtype=np.int64)
    losers = np.asarray(losers, dtype=np.int64)
    if np.any(winners == losers):
        raise ContractViolationError("winner equals loser in batch")
    policy_margin = sub(pick(logits, rows, winners), pick(logits, rows, losers))
    ref_margin = (reference_logits[rows, winners] - reference_logits[rows, losers]).astype(logits.dtype)
    z = scale(sub(policy_margin, Tensor(ref_margin)), beta)
    return scale(mean(log_sigmoid(z)), -1.0)
