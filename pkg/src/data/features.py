"""
Modal Feature Files - 사전 추출 텍스트 / 이미지 특성 행렬 입출력

형식: magic "RODPOFM1" | u64 rows | u64 cols | rows×cols float32 (모두 little-endian, row-major)
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np

from ..domain.errors import DataFormatError, DimensionError

logger = logging.getLogger(__name__)

FEATURE_MAGIC = b"RODPOFM1"
_HEADER = np.dtype([("rows", "<u8"), ("cols", "<u8")])


@dataclass
class FeatureMatrix:
    """특성 행렬 + 결측 행 플래그"""
    values: np.ndarray
    missing: np.ndarray

    @property
    def n_missing(self) -> int:
        return int(self.missing.sum())


def write_modal_features(path: Union[str, Path], matrix: np.ndarray) -> None:
    """특성 행렬 저장 (결측 행은 NaN 으로 기록 가능)"""
    matrix = np.asarray(matrix)
    if matrix.ndim != 2:
        raise DimensionError(f"feature matrix must be 2-D, got shape {matrix.shape}")
    header = np.array([(matrix.shape[0], matrix.shape[1])], dtype=_HEADER)
    with Path(path).open("wb") as f:
        f.write(FEATURE_MAGIC)
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def load_modal_features(
    path: Union[str, Path],
    expected_items: int,
    expected_dim: Optional[int] = None,
) -> FeatureMatrix:
    """특성 행렬 로드

    모든 값이 NaN 인 행은 결측으로 보고 0 벡터로 채운다.

    Args:
        path: 특성 파일
        expected_items: 기대 행 수 (|I|)
        expected_dim: 설정상 특성 차원 (None 이면 검사 안 함)
    """
    raw = Path(path).read_bytes()
    if raw[: len(FEATURE_MAGIC)] != FEATURE_MAGIC:
        raise DataFormatError("bad magic bytes", path=str(path))
    offset = len(FEATURE_MAGIC)
    header = np.frombuffer(raw, dtype=_HEADER, count=1, offset=offset)[0]
    rows, cols = int(header["rows"]), int(header["cols"])
    offset += _HEADER.itemsize

    if rows != expected_items:
        raise DimensionError(f"{path}: feature rows {rows} != catalog items {expected_items}")
    if expected_dim is not None and cols != expected_dim:
        raise DimensionError(f"{path}: feature dim {cols} != configured dim {expected_dim}")
    expected_bytes = rows * cols * 4
    if len(raw) - offset != expected_bytes:
        raise DataFormatError(f"expected {expected_bytes} payload bytes, got {len(raw) - offset}", path=str(path))

    values = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
    values = values.astype(np.float32)
    missing = np.isnan(values).all(axis=1) if cols else np.zeros(rows, dtype=bool)
    if missing.any():
        values[missing] = 0.0
        logger.warning(f"결측 특성 {int(missing.sum())}행 0으로 채움: {path}")
    if not np.all(np.isfinite(values)):
        raise DataFormatError("feature matrix contains non-finite values", path=str(path))
    return FeatureMatrix(values=values, missing=missing)
