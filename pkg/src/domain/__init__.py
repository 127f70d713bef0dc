from .models import (
    SamplingStrategy,
    RawInteractions,
    InteractionSequence,
    ItemCatalog,
    TrainingExample,
    UserSplit,
    SplitDataset,
    SyntheticLabels,
    SyntheticDataset,
    PreparedDataset,
    DatasetStats,
    PreferencePair,
    CandidatePool,
    NegativeRecord,
    NegativeTrace,
)
from .interfaces import (
    IScorer,
    INegativeSampler,
    IMetricsSink,
)
from .errors import (
    RoDPOError,
    ConfigError,
    DataFormatError,
    DatasetEliminatedError,
    DimensionError,
    GradientContractError,
    ContractViolationError,
    NonFiniteError,
    EmptyEvaluationError,
    CatalogMismatchError,
    LabelsUnavailableError,
)

__all__ = [
    "SamplingStrategy",
    "RawInteractions",
    "InteractionSequence",
    "ItemCatalog",
    "TrainingExample",
    "UserSplit",
    "SplitDataset",
    "SyntheticLabels",
    "SyntheticDataset",
    "PreparedDataset",
    "DatasetStats",
    "PreferencePair",
    "CandidatePool",
    "NegativeRecord",
    "NegativeTrace",
    "IScorer",
    "INegativeSampler",
    "IMetricsSink",
    "RoDPOError",
    "ConfigError",
    "DataFormatError",
    "DatasetEliminatedError",
    "DimensionError",
    "GradientContractError",
    "ContractViolationError",
    "NonFiniteError",
    "EmptyEvaluationError",
    "CatalogMismatchError",
    "LabelsUnavailableError",
]
