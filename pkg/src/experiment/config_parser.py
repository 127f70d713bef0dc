"""
Run Configuration Parser - YAML 실험 설정 파서
"""
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import yaml

from ..domain.errors import ConfigError
from ..domain.models import SamplingStrategy
from ..encoder.params import DTYPES, MOE_PLACEMENTS, MOE_VARIANTS, EncoderConfig


def _coerce(value: Any, default: Any, key: str) -> Any:
    """기본값 타입 기준 변환"""
    try:
        if isinstance(default, bool):
            if isinstance(value, str):
                lowered = value.strip().lower()
                if lowered in ("true", "yes", "1", "on"):
                    return True
                if lowered in ("false", "no", "0", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if isinstance(default, float):
            return float(value)
        if isinstance(default, list):
            if isinstance(value, str):
                value = [v for v in value.split(",") if v.strip()]
            return [type(default[0])(v) if default else v for v in value]
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"invalid value for {key}: {value!r}")


class _Section:
    """설정 섹션 공통 from_dict / to_dict"""

    SECTION = ""
    ALIASES: Dict[str, str] = {}

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]):
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError(f"section '{cls.SECTION}' must be a mapping")
        defaults = cls()
        known = {f.name for f in fields(cls)}
        values = {}
        for raw_key, value in data.items():
            key = cls.ALIASES.get(raw_key, raw_key)
            if key not in known:
                raise ConfigError(f"unknown config key: {cls.SECTION}.{raw_key}")
            values[key] = _coerce(value, getattr(defaults, key), f"{cls.SECTION}.{raw_key}")
        section = cls(**values)
        section.validate()
        return section

    def to_dict(self) -> Dict[str, Any]:
        inverse = {v: k for k, v in self.ALIASES.items()}
        return {inverse.get(k, k): v for k, v in asdict(self).items()}

    def validate(self) -> None:
        pass


@dataclass
class DataSection(_Section):
    """데이터 / 전처리 설정"""
    SECTION = "data"
    dataset_dir: str = ""
    kcore: int = 5
    max_seq_len: int = 50
    d_txt: int = 32
    d_img: int = 32

    def validate(self) -> None:
        if self.kcore < 1:
            raise ConfigError("data.kcore must be >= 1")
        if self.max_seq_len < 1 or self.d_txt < 1 or self.d_img < 1:
            raise ConfigError("data.max_seq_len, d_txt and d_img must be positive")


@dataclass
class ModelSection(_Section):
    """인코더 구조 설정"""
    SECTION = "model"
    d: int = 64
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 0
    n_buckets: int = 64
    temporal: bool = True
    init_std: float = 0.02
    dtype: str = "float32"

    def validate(self) -> None:
        if self.dtype not in DTYPES:
            raise ConfigError(f"model.dtype must be one of {sorted(DTYPES)}")


@dataclass
class MoESection(_Section):
    """MoE 정제층 설정"""
    SECTION = "moe"
    variant: str = "sparse"
    placement: str = "shared"
    n_experts: int = 4
    active_k: int = 2
    expert_hidden: int = 0
    balance_coef: float = 0.0

    def validate(self) -> None:
        if self.variant not in MOE_VARIANTS:
            raise ConfigError(f"moe.variant must be one of {MOE_VARIANTS}")
        if self.placement not in MOE_PLACEMENTS:
            raise ConfigError(f"moe.placement must be one of {MOE_PLACEMENTS}")
        if not 1 <= self.active_k <= self.n_experts:
            raise ConfigError("moe.active_k must be in 1..n_experts")
        if self.balance_coef < 0:
            raise ConfigError("moe.balance_coef must be non-negative")


@dataclass
class DPOConfig(_Section):
    """선호 최적화 설정 (β, λ, K, 샘플링 전략)"""
    SECTION = "dpo"
    ALIASES = {"lambda": "lam", "K": "k"}
    strategy: str = "topk"
    beta: float = 1.0
    k: int = 50
    lam: float = 1.0
    exclude_history: bool = False

    @property
    def sampling(self) -> SamplingStrategy:
        return SamplingStrategy.parse(self.strategy)

    def validate(self) -> None:
        try:
            SamplingStrategy.parse(self.strategy)
        except ValueError as e:
            raise ConfigError(str(e))
        if self.beta <= 0:
            raise ConfigError("dpo.beta must be positive")
        if self.lam < 0:
            raise ConfigError("dpo.lambda must be non-negative")
        if self.k < 1:
            raise ConfigError("dpo.K must be >= 1")


@dataclass
class TrainConfig(_Section):
    """학습 설정 (Adam, 에폭, 조기 종료)"""
    SECTION = "train"
    stage1_epochs: int = 15
    stage2_max_epochs: int = 20
    learning_rate: float = 1e-3
    batch_size: int = 256
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    patience: int = 10
    grad_clip: float = 5.0

    def validate(self) -> None:
        if self.stage1_epochs < 1:
            raise ConfigError("train.stage1_epochs must be >= 1")
        if self.stage2_max_epochs < 1:
            raise ConfigError("train.stage2_max_epochs must be >= 1")
        if self.learning_rate <= 0 or self.adam_eps <= 0 or self.grad_clip <= 0:
            raise ConfigError("train.learning_rate, adam_eps and grad_clip must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("train.adam_beta1/adam_beta2 must be in [0, 1)")
        if self.batch_size < 1 or self.patience < 1:
            raise ConfigError("train.batch_size and patience must be >= 1")


@dataclass
class EvalSection(_Section):
    """평가 설정"""
    SECTION = "eval"
    ks: List[int] = field(default_factory=lambda: [5, 10])
    bins: int = 100
    batch_size: int = 256
    efficiency_iterations: int = 20
    efficiency_warmup: int = 3

    def validate(self) -> None:
        if not self.ks or any(k < 1 for k in self.ks):
            raise ConfigError("eval.ks must be a non-empty list of positive integers")
        if self.bins < 10:
            raise ConfigError("eval.bins must be >= 10")
        if self.efficiency_iterations < 20:
            raise ConfigError("eval.efficiency_iterations must be >= 20")


_SECTIONS = {
    "data": DataSection,
    "model": ModelSection,
    "moe": MoESection,
    "dpo": DPOConfig,
    "train": TrainConfig,
    "eval": EvalSection,
}


@dataclass
class RunConfig:
    """전체 실험 설정"""
    seed: int = 0
    output_dir: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    model: ModelSection = field(default_factory=ModelSection)
    moe: MoESection = field(default_factory=MoESection)
    dpo: DPOConfig = field(default_factory=DPOConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    eval: EvalSection = field(default_factory=EvalSection)

    def encoder_config(self) -> EncoderConfig:
        """인코더 구조 설정 생성"""
        return EncoderConfig(
            d=self.model.d,
            max_seq_len=self.data.max_seq_len,
            n_layers=self.model.n_layers,
            n_heads=self.model.n_heads,
            d_ff=self.model.d_ff,
            n_buckets=self.model.n_buckets,
            temporal=self.model.temporal,
            moe_variant=self.moe.variant,
            moe_placement=self.moe.placement,
            n_experts=self.moe.n_experts,
            active_k=self.moe.active_k,
            expert_hidden=self.moe.expert_hidden,
            balance_coef=self.moe.balance_coef,
            init_std=self.model.init_std,
            dtype=self.model.dtype,
        )

    def to_dict(self) -> Dict[str, Any]:
        result: Dict[str, Any] = {"seed": self.seed, "output_dir": self.output_dir}
        for name in _SECTIONS:
            result[name] = getattr(self, name).to_dict()
        return result

    def to_yaml(self) -> str:
        """YAML 문자열로 변환"""
        return yaml.safe_dump(self.to_dict(), allow_unicode=True, default_flow_style=False, sort_keys=False)

    def with_overrides(self, overrides: Sequence[str]) -> "RunConfig":
        """'section.key=value' 목록 적용 (같은 검증 경로)"""
        data = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override must look like section.key=value: {item!r}")
            dotted, raw_value = item.split("=", 1)
            value = yaml.safe_load(raw_value) if raw_value.strip() else ""
            parts = dotted.strip().split(".")
            if len(parts) == 1 and parts[0] in ("seed", "output_dir"):
                data[parts[0]] = value
            elif len(parts) == 2 and parts[0] in _SECTIONS:
                data[parts[0]][parts[1]] = value
            else:
                raise ConfigError(f"unknown config key: {dotted}")
        return RunConfig.from_dict(data)

    @classmethod
    def from_dict(cls, data: Optional[Dict[str, Any]]) -> "RunConfig":
        data = data or {}
        if not isinstance(data, dict):
            raise ConfigError("config root must be a mapping")
        unknown = set(data) - set(_SECTIONS) - {"seed", "output_dir"}
        if unknown:
            raise ConfigError(f"unknown config section(s): {', '.join(sorted(unknown))}")
        try:
            seed = int(data.get("seed", 0))
        except (TypeError, ValueError):
            raise ConfigError(f"invalid seed: {data.get('seed')!r}")
        if seed < 0:
            raise ConfigError("seed must be non-negative")
        sections = {name: section.from_dict(data.get(name)) for name, section in _SECTIONS.items()}
        return cls(seed=seed, output_dir=str(data.get("output_dir", "runs/default")), **sections)

    @classmethod
    def from_yaml(cls, yaml_content: str) -> "RunConfig":
        """YAML 문자열에서 로드"""
        try:
            data = yaml.safe_load(yaml_content)
        except yaml.YAMLError as e:
            raise ConfigError(f"invalid YAML: {e}")
        return cls.from_dict(data)

    @classmethod
    def from_file(cls, file_path: str) -> "RunConfig":
        """YAML 파일에서 로드"""
        path = Path(file_path)
        if not path.exists():
            raise FileNotFoundError(f"Config file not found: {file_path}")
        return cls.from_yaml(path.read_text(encoding="utf-8"))

    def save_to_file(self, file_path: str) -> None:
        """YAML 파일로 저장"""
        path = Path(file_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_yaml(), encoding="utf-8")
