"""
Encoder Parameters - 인코더 설정 / 파라미터 레이아웃 / 초기화
"""
from collections import OrderedDict
from dataclasses import asdict, dataclass
from typing import Dict, Tuple

import numpy as np

from ..domain.errors import ConfigError
from ..numerics import Tensor
from .snapshot import PolicySnapshot

MODALITIES = ("id", "txt", "img")
MOE_VARIANTS = ("sparse", "dense", "none")
MOE_PLACEMENTS = ("shared", "per_modality")
DTYPES = {"float32": np.float32, "float64": np.float64}

EncoderParams = Dict[str, Tensor]


@dataclass
class EncoderConfig:
    """인코더 구조 설정"""
    d: int = 64
    max_seq_len: int = 50
    n_layers: int = 2
    n_heads: int = 2
    d_ff: int = 0                  # 0 이면 4d
    n_buckets: int = 64
    temporal: bool = True
    moe_variant: str = "sparse"    # sparse / dense / none
    moe_placement: str = "shared"  # shared / per_modality
    n_experts: int = 4
    active_k: int = 2
    expert_hidden: int = 0         # 0 이면 d_ff
    balance_coef: float = 0.0
    init_std: float = 0.02
    dtype: str = "float32"

    @property
    def ff_dim(self) -> int:
        return self.d_ff or 4 * self.d

    @property
    def expert_dim(self) -> int:
        return self.expert_hidden or self.ff_dim

    @property
    def np_dtype(self):
        return DTYPES[self.dtype]

    def validate(self) -> None:
        if self.d < 1 or self.max_seq_len < 1 or self.n_layers < 0:
            raise ConfigError("d and max_seq_len must be positive, n_layers non-negative")
        if self.n_heads < 1 or self.d % self.n_heads:
            raise ConfigError(f"d={self.d} must be divisible by n_heads={self.n_heads}")
        if self.n_buckets < 1:
            raise ConfigError("n_buckets must be positive")
        if self.moe_variant not in MOE_VARIANTS:
            raise ConfigError(f"Unknown moe variant: {self.moe_variant}")
        if self.moe_placement not in MOE_PLACEMENTS:
            raise ConfigError(f"Unknown moe placement: {self.moe_placement}")
        if not 1 <= self.active_k <= self.n_experts:
            raise ConfigError(f"active_k must be in 1..{self.n_experts}, got {self.active_k}")
        if self.dtype not in DTYPES:
            raise ConfigError(f"Unknown dtype: {self.dtype}")
        if self.balance_coef < 0:
            raise ConfigError("balance_coef must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)


def _feed_forward_shapes(prefix: str, d: int, hidden: int) -> Dict[str, Tuple[int, ...]]:
    return {
        f"{prefix}.w1": (d, hidden),
        f"{prefix}.b1": (hidden,),
        f"{prefix}.w2": (hidden, d),
        f"{prefix}.b2": (d,),
    }


def _refinement_shapes(config: EncoderConfig, prefix: str) -> Dict[str, Tuple[int, ...]]:
    d = config.d
    if config.moe_variant == "sparse":
        shapes = {f"{prefix}.gate": (d, config.n_experts), f"{prefix}.noise": (d, config.n_experts)}
        for j in range(config.n_experts):
            shapes.update(_feed_forward_shapes(f"{prefix}.expert{j}", d, config.expert_dim))
        return shapes
    if config.moe_variant == "dense":
        return _feed_forward_shapes(prefix, d, config.expert_dim)
    return {}


def refinement_prefixes(config: EncoderConfig) -> Dict[str, str]:
    """모달리티 → 콘텐츠 정제층 파라미터 prefix"""
    if config.moe_variant == "none":
        return {}
    if config.moe_placement == "shared":
        return {m: "moe" for m in MODALITIES}
    return {m: f"moe.{m}" for m in MODALITIES}


def parameter_shapes(config: EncoderConfig, n_items: int, d_txt: int, d_img: int) -> "OrderedDict[str, Tuple[int, ...]]":
    """이름 → shape (직렬화 / 초기화 순서와 동일)"""
    config.validate()
    d = config.d
    shapes: "OrderedDict[str, Tuple[int, ...]]" = OrderedDict()
    shapes["id_embedding"] = (n_items + 1, d)
    shapes["text_projection"] = (d_txt, d)
    shapes["image_projection"] = (d_img, d)
    shapes["position_embedding"] = (config.max_seq_len, d)

    for prefix in dict.fromkeys(refinement_prefixes(config).values()):
        shapes.update(_refinement_shapes(config, prefix))

    for m in MODALITIES:
        for layer in range(config.n_layers):
            block = f"{m}.block{layer}"
            shapes[f"{block}.ln1.gain"] = (d,)
            shapes[f"{block}.ln1.bias"] = (d,)
            for w in ("wq", "wk", "wv", "wo"):
                shapes[f"{block}.attn.{w}"] = (d, d)
            shapes[f"{block}.ln2.gain"] = (d,)
            shapes[f"{block}.ln2.bias"] = (d,)
            shapes.update(_feed_forward_shapes(f"{block}.ffn", d, config.ff_dim))
        shapes[f"{m}.final_ln.gain"] = (d,)
        shapes[f"{m}.final_ln.bias"] = (d,)

    if config.temporal:
        shapes["interval_embedding"] = (config.n_buckets, d)
        shapes.update(_refinement_shapes(config, "temporal_moe"))

    shapes["alpha_txt"] = (1,)
    shapes["alpha_img"] = (1,)
    return shapes


def count_parameters(config: EncoderConfig, n_items: int, d_txt: int, d_img: int) -> int:
    """학습 파라미터 수 (설정으로부터 닫힌 형태 계산)"""
    return int(sum(int(np.prod(shape)) for shape in parameter_shapes(config, n_items, d_txt, d_img).values()))


def _initial_value(name: str, shape: Tuple[int, ...], config: EncoderConfig, rng: np.random.Generator) -> np.ndarray:
    leaf = name.rsplit(".", 1)[-1]
    if name.startswith("alpha_") or leaf == "gain":
        return np.ones(shape)
    if leaf in ("bias", "b1", "b2"):
        return np.zeros(shape)
    return rng.normal(0.0, config.init_std, size=shape)


def init_params(config: EncoderConfig, n_items: int, d_txt: int, d_img: int, rng: np.random.Generator) -> EncoderParams:
    """파라미터 초기화 (init 스트림만 소비)

    Returns:
        이름 → 학습 가능 Tensor (삽입 순서 = parameter_shapes 순서)
    """
    params: EncoderParams = OrderedDict()
    for name, shape in parameter_shapes(config, n_items, d_txt, d_img).items():
        values = _initial_value(name, shape, config, rng).astype(config.np_dtype)
        if name == "id_embedding":
            values[n_items] = 0.0
        params[name] = Tensor(values, requires_grad=True, name=name)
    return params


def params_to_snapshot(params: EncoderParams) -> PolicySnapshot:
    return PolicySnapshot.from_arrays({name: t.values for name, t in params.items()})


def params_from_snapshot(snapshot: PolicySnapshot, config: EncoderConfig, expected: Dict[str, Tuple[int, ...]]) -> EncoderParams:
    """스냅샷을 학습 가능 파라미터로 복원 (이름 / shape 검증)"""
    names = list(snapshot.tensors)
    if names != list(expected):
        missing = sorted(set(expected) - set(names))
        extra = sorted(set(names) - set(expected))
        raise ConfigError(f"snapshot does not match encoder layout (missing={missing[:3]}, extra={extra[:3]})")
    params: EncoderParams = OrderedDict()
    for name, shape in expected.items():
        values = snapshot[name]
        if tuple(values.shape) != tuple(shape):
            raise ConfigError(f"snapshot tensor {name} has shape {values.shape}, expected {shape}")
        params[name] = Tensor(np.array(values, dtype=config.np_dtype), requires_grad=True, name=name)
    return params
