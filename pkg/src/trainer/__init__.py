from .optimizer import Adam, AdamMoments, adam_step, clip_grad_norm, global_norm
from .rng import RngStreams, STREAM_NAMES
from .checkpoint import TrainState, save_checkpoint, load_checkpoint, read_checkpoint_policy
from .reference import ReferencePolicy, snapshot_reference
from .metrics_log import MetricsLogger, read_metrics
from .engine import TrainingEngine, StepResult, MODE_WARMUP, MODE_RODPO, MODE_CE

__all__ = [
    "Adam",
    "AdamMoments",
    "adam_step",
    "clip_grad_norm",
    "global_norm",
    "RngStreams",
    "STREAM_NAMES",
    "TrainState",
    "save_checkpoint",
    "load_checkpoint",
    "read_checkpoint_policy",
    "ReferencePolicy",
    "snapshot_reference",
    "MetricsLogger",
    "read_metrics",
    "TrainingEngine",
    "StepResult",
    "MODE_WARMUP",
    "MODE_RODPO",
    "MODE_CE",
]
