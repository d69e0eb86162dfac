"""The four dialogue policies, their training steps and checkpoints."""
from .base import LossError, Policy, exact_set_accuracy, pair_cross_entropy, train_step
from .checkpoint import (
    POLICY_CLASSES,
    CheckpointError,
    build_policy,
    checkpoint_dict,
    load_checkpoint,
    policy_from_dict,
    save_checkpoint,
)
from .generator import DEFAULT_TAU, AdvGenerator
from .multiclass import MultiClassPolicy
from .multidense import MultiDensePolicy
from .nn import MLP, GRUCell, Linear, Module
from .params import PAPER_SCALE_CONFIGS, REFERENCE_COUNTS, count_params, paper_scale_policy
from .seq import Hypothesis, PathTooLongError, SeqPolicy
from .training import TrainConfig, train_supervised
