from .model_spec import LayerKind, LayerSpec, ModelSpec
from .training import (
    CheckpointPolicy, TrainHyper, CorruptionPolicy, AugmentPolicy, SplitSpec, SynthParams
)
from .records import (
    CHECKPOINT_FORMAT_VERSION, CheckpointRecord, TransferReport, MetricSeries, MetricRow, MetricTable
)
from .sample import SamplePair

__all__ = [
    "LayerKind", "LayerSpec", "ModelSpec",
    "CheckpointPolicy", "TrainHyper", "CorruptionPolicy", "AugmentPolicy", "SplitSpec", "SynthParams",
    "CHECKPOINT_FORMAT_VERSION", "CheckpointRecord", "TransferReport", "MetricSeries", "MetricRow",
    "MetricTable", "SamplePair"
]
