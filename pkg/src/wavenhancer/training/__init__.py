from .checkpoint import (
    BadMagicError,
    Checkpoint,
    CheckpointError,
    ConfigMismatchError,
    TruncatedCheckpointError,
    UnsupportedVersionError,
    load_checkpoint,
    save_checkpoint,
)
from .config import AblationSpec, ConfigError, ModelConfig, TrainConfig
from .data import AugmentRecord, DatasetError, PairedSample, PairSource, augment_pair, load_dataset
from .evaluate import EvalReport, enhance_array, evaluate
from .loop import TrainingDivergedError, TrainResult, train, train_samples
from .pipeline import PipelineOutput, forward_pipeline, init_model

__all__ = [
    "AblationSpec", "AugmentRecord", "BadMagicError", "Checkpoint", "CheckpointError", "ConfigError",
    "ConfigMismatchError", "DatasetError", "EvalReport", "ModelConfig", "PairSource", "PairedSample",
    "PipelineOutput", "TrainConfig", "TrainResult", "TrainingDivergedError", "TruncatedCheckpointError",
    "UnsupportedVersionError", "augment_pair", "enhance_array", "evaluate", "forward_pipeline", "init_model",
    "load_checkpoint", "load_dataset", "save_checkpoint", "train", "train_samples",
]
