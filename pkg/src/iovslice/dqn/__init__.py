from .mlp import (
    Adam,
    CheckpointFormatError,
    DuelingQNetwork,
    UnsupportedVersionError,
    load_checkpoint,
    save_checkpoint,
)
from .replay import PrioritizedReplay, SumTree
from .agent import (
    TrainConfig,
    TrainingDiverged,
    TrainLogRow,
    epsilon,
    replay_beta,
    td_targets,
    train,
    infer,
    EpisodeResult,
)

__all__ = [
    "Adam",
    "CheckpointFormatError",
    "DuelingQNetwork",
    "EpisodeResult",
    "PrioritizedReplay",
    "SumTree",
    "TrainConfig",
    "TrainLogRow",
    "TrainingDiverged",
    "UnsupportedVersionError",
    "epsilon",
    "infer",
    "load_checkpoint",
    "replay_beta",
    "save_checkpoint",
    "td_targets",
    "train",
]
