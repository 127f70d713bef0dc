"""
Evaluation Models - 평가 결과 데이터 모델
"""
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np


@dataclass
class RankResult:
    """사용자별 타깃 순위 (1 기반, 전체 카탈로그 기준)"""
    user_ids: np.ndarray
    ranks: np.ndarray
    ks: Sequence[int]

    @property
    def n_users(self) -> int:
        return int(self.ranks.shape[0])


@dataclass
class PopulationStats:
    """로짓 분포 요약 통계"""
    mean: float
    variance: float
    peak_bin: int
    peak_density: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "variance": self.variance,
            "peak_bin": self.peak_bin,
            "peak_density": self.peak_density,
        }


@dataclass
class LogitDistribution:
    """정답 로짓과 하드 네거티브 로짓의 공통 구간 히스토그램"""
    edges: np.ndarray
    count_pos: np.ndarray
    count_hardneg: np.ndarray
    positive: np.ndarray
    hard_negative: np.ndarray
    positive_stats: PopulationStats
    hard_negative_stats: PopulationStats

    @property
    def bins(self) -> int:
        return int(self.count_pos.shape[0])

    def to_dict(self) -> Dict[str, Any]:
        return {
            "bins": self.bins,
            "n_users": int(self.positive.shape[0]),
            "positive": self.positive_stats.to_dict(),
            "hard_negative": self.hard_negative_stats.to_dict(),
        }


@dataclass
class SuppressionStats:
    """전략별 거짓 음성 억제 진단"""
    strategy: str
    n_updates: int
    false_negative_hits: int
    hit_fraction: float
    max_collisions: int
    expected_random_fraction: float
    mean_false_negative_rank: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "strategy": self.strategy,
            "n_updates": self.n_updates,
            "fn_hits": self.false_negative_hits,
            "fn_fraction": self.hit_fraction,
            "max_collisions": self.max_collisions,
            "expected_random_fraction": self.expected_random_fraction,
            "mean_fn_rank": self.mean_false_negative_rank,
        }


@dataclass
class EvalReport:
    """랭킹 평가 보고서"""
    split: str
    n_users: int
    metrics: Dict[str, float]
    ks: List[int]
    timings: Dict[str, float] = field(default_factory=dict)
    distribution: Optional[LogitDistribution] = None
    suppression: Dict[str, SuppressionStats] = field(default_factory=dict)
    scorer: str = ""

    def metric(self, name: str, k: int) -> float:
        return self.metrics[f"{name}@{k}"]

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {
            "split": self.split,
            "scorer": self.scorer,
            "n_users": self.n_users,
            "ks": list(self.ks),
            "metrics": dict(self.metrics),
            "timings": dict(self.timings),
        }
        if self.distribution is not None:
            result["distribution"] = self.distribution.to_dict()
        if self.suppression:
            result["suppression"] = {k: v.to_dict() for k, v in self.suppression.items()}
        return result

    def get_summary(self) -> str:
        """보고서 요약 문자열"""
        lines = [
            "=" * 50,
            f"평가 결과 ({self.split}, {self.n_users:,} users)",
            "=" * 50,
        ]
        for k in self.ks:
            lines.append(f"NDCG@{k}: {self.metrics[f'ndcg@{k}']:.4f}    MRR@{k}: {self.metrics[f'mrr@{k}']:.4f}")
        if "wall_ms" in self.timings:
            lines.append(f"소요 시간: {self.timings['wall_ms']:.1f} ms")
        for stats in self.suppression.values():
            lines.append(
                f"[{stats.strategy}] FN 비율 {stats.hit_fraction:.4f} "
                f"(무작위 기대 {stats.expected_random_fraction:.4f}), 최대 충돌 {stats.max_collisions}"
            )
        lines.append("=" * 50)
        return "\n".join(lines)


@dataclass
class EfficiencyReport:
    """학습 / 추론 효율 측정 결과"""
    n_parameters: int
    batch_size: int
    iterations: int
    ce_step_ms: float
    stage2_step_ms: float
    inference_ms: float
    inference_cv: float
    reference_calls_during_inference: int = 0

    @property
    def overhead_ratio(self) -> float:
        return self.stage2_step_ms / self.ce_step_ms if self.ce_step_ms > 0 else float("nan")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "trainable_params": self.n_parameters,
            "batch_size": self.batch_size,
            "iterations": self.iterations,
            "ce_step_ms": self.ce_step_ms,
            "stage2_step_ms": self.stage2_step_ms,
            "inference_ms": self.inference_ms,
            "inference_cv": self.inference_cv,
            "overhead_ratio": self.overhead_ratio,
            "reference_calls_during_inference": self.reference_calls_during_inference,
        }

    def get_summary(self) -> str:
        return "\n".join([
            f"학습 파라미터: {self.n_parameters:,}",
            f"CE 스텝: {self.ce_step_ms:.2f} ms",
            f"Stage 2 스텝: {self.stage2_step_ms:.2f} ms (x{self.overhead_ratio:.2f})",
            f"추론 배치 ({self.batch_size}): {self.inference_ms:.2f} ms",
        ])
