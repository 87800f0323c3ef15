from .checkpoint import load_checkpoint, read_checkpoint_meta, save_checkpoint
from .command import (
    ActionCommand,
    CommandEmbedding,
    CommandTable,
    Vocabulary,
    embed_command,
    make_command,
)
from .config import FeatureTensor, ModelConfig
from .gradcheck import finite_difference_check
from .network import (
    InteractionModel,
    RolloutState,
    initial_state,
    run_session,
    step,
)
from .training import TrainResult, extract_windows, train, training_losses

__all__ = [
    "ActionCommand",
    "CommandEmbedding",
    "CommandTable",
    "FeatureTensor",
    "InteractionModel",
    "ModelConfig",
    "RolloutState",
    "TrainResult",
    "Vocabulary",
    "embed_command",
    "extract_windows",
    "finite_difference_check",
    "initial_state",
    "load_checkpoint",
    "make_command",
    "read_checkpoint_meta",
    "run_session",
    "save_checkpoint",
    "step",
    "train",
    "training_losses",
]
