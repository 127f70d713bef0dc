from .snapshot import PolicySnapshot, save_snapshot, load_snapshot, SNAPSHOT_MAGIC, SNAPSHOT_VERSION
from .params import (
    EncoderConfig,
    EncoderParams,
    MODALITIES,
    parameter_shapes,
    count_parameters,
    init_params,
)
from .moe import MoELayer, GateDecision, feed_forward, noisy_topk_gate, moe_forward
from .model import SequentialEncoder, ScoreOutput, ScoreVector, interval_buckets

__all__ = [
    "PolicySnapshot",
    "save_snapshot",
    "load_snapshot",
    "SNAPSHOT_MAGIC",
    "SNAPSHOT_VERSION",
    "EncoderConfig",
    "EncoderParams",
    "MODALITIES",
    "parameter_shapes",
    "count_parameters",
    "init_params",
    "MoELayer",
    "GateDecision",
    "feed_forward",
    "noisy_topk_gate",
    "moe_forward",
    "SequentialEncoder",
    "ScoreOutput",
    "ScoreVector",
    "interval_buckets",
]
