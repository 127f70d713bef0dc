"""
Configuration Module - 환경 설정 관리 (SRP 준수)
"""
import logging
import os
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from dotenv import load_dotenv

from ..domain.errors import ConfigError

LOG_FORMAT = "%(asctime)s [%(levelname)s] %(message)s"


class LogLevel(Enum):
    """로그 레벨"""
    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"


@dataclass
class Settings:
    """프로세스 환경 설정 (실험 설정과 별개)"""
    output_dir: str = "runs"
    log_level: LogLevel = LogLevel.INFO
    metrics_flush: int = 1

    @classmethod
    def from_env(cls, env_path: Optional[str] = None) -> "Settings":
        """환경 변수에서 설정 로드"""
        if env_path:
            load_dotenv(env_path)
        else:
            load_dotenv()

        output_dir = os.getenv("RODPO_OUTPUT_DIR", "runs")
        level_str = os.getenv("RODPO_LOG_LEVEL", "INFO").upper()
        flush_str = os.getenv("RODPO_METRICS_FLUSH", "1")

        try:
            log_level = LogLevel(level_str)
        except ValueError:
            raise ConfigError(f"RODPO_LOG_LEVEL must be one of {[l.value for l in LogLevel]}, got {level_str}")
        try:
            metrics_flush = int(flush_str)
        except ValueError:
            raise ConfigError(f"RODPO_METRICS_FLUSH must be an integer, got {flush_str}")
        if metrics_flush < 1:
            raise ConfigError("RODPO_METRICS_FLUSH must be >= 1")

        return cls(output_dir=output_dir, log_level=log_level, metrics_flush=metrics_flush)


def setup_logging(level: LogLevel = LogLevel.INFO) -> None:
    """CLI 진입점 로깅 설정"""
    logging.basicConfig(level=getattr(logging, level.value), format=LOG_FORMAT)
