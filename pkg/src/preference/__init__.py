from .pool import build_candidate_pool
from .strategies import (
    RandomSampler,
    ArgmaxSampler,
    TopKSampler,
    get_sampler,
    sample_negative,
    make_pairs,
)
from .losses import LossValue, dpo_loss, ce_loss, batch_ce_loss, batch_dpo_loss

__all__ = [
    "build_candidate_pool",
    "RandomSampler",
    "ArgmaxSampler",
    "TopKSampler",
    "get_sampler",
    "sample_negative",
    "make_pairs",
    "LossValue",
    "dpo_loss",
    "ce_loss",
    "batch_ce_loss",
    "batch_dpo_loss",
]
