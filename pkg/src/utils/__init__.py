from .exception import *

__all__ = [
    "AppException", "ModelSpecError", "ProbeSizeError", "TransferError", "DatasetError",
    "SynthesisError", "AugmentationError", "LossInputError", "TrainingDivergedError",
    "CheckpointError", "ChecksumError", "CheckpointVersionError", "MetricError", "ConfigError"
]
