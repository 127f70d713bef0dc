from .config_parser import (
    RunConfig,
    DataSection,
    ModelSection,
    MoESection,
    DPOConfig,
    TrainConfig,
    EvalSection,
)

__all__ = [
    "RunConfig",
    "DataSection",
    "ModelSection",
    "MoESection",
    "DPOConfig",
    "TrainConfig",
    "EvalSection",
]
