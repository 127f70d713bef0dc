"""
Domain Errors - 프로젝트 공통 예외 계층
"""
from typing import Dict, Optional


class RoDPOError(Exception):
    """모든 도메인 예외의 기반 클래스"""


class ConfigError(RoDPOError):
    """설정 / 사용법 오류 (CLI 종료 코드 2)"""


class DataFormatError(RoDPOError):
    """입력 데이터 형식 오류"""

    def __init__(self, message: str, line_no: Optional[int] = None, path: str = ""):
        self.line_no = line_no
        self.path = path
        location = f"{path}:{line_no}: " if line_no is not None else (f"{path}: " if path else "")
        super().__init__(f"{location}{message}")


class DatasetEliminatedError(RoDPOError):
    """필터링 결과 데이터가 남지 않음"""


class DimensionError(RoDPOError):
    """텐서 / 행렬 차원 불일치"""


class GradientContractError(RoDPOError):
    """그래디언트 검증 전제 위반 (비결정적 함수 등)"""


class ContractViolationError(RoDPOError):
    """불변식 위반 (참조 정책 변경, 잘못된 선호 쌍 등)"""


class NonFiniteError(RoDPOError):
    """NaN / Inf 발생"""

    def __init__(
        self,
        message: str,
        step: Optional[int] = None,
        batch_index: Optional[int] = None,
        parameter_norms: Optional[Dict[str, float]] = None,
    ):
        self.step = step
        self.batch_index = batch_index
        self.parameter_norms = parameter_norms or {}
        details = []
        if step is not None:
            details.append(f"step={step}")
        if batch_index is not None:
            details.append(f"batch={batch_index}")
        if self.parameter_norms:
            worst = sorted(self.parameter_norms.items(), key=lambda kv: -kv[1])[:3]
            details.append("norms=" + ", ".join(f"{k}:{v:.3g}" for k, v in worst))
        suffix = f" ({'; '.join(details)})" if details else ""
        super().__init__(f"{message}{suffix}")


class EmptyEvaluationError(RoDPOError):
    """평가 대상 사용자가 없음"""


class CatalogMismatchError(RoDPOError):
    """스냅샷과 데이터셋의 아이템 카탈로그 불일치"""


class LabelsUnavailableError(RoDPOError):
    """합성 데이터 정답 라벨이 없음"""
