"""
Core module for boxcap.

Contains configuration, the caption-matching curriculum, the training loops,
checkpoints and caption generation.
"""

from .checkpoint import load_checkpoint, restore_model, save_checkpoint
from .config import ModelConfig, TrainConfig, load_config
from .curriculum import CurriculumState, make_cm_sample, schedule, schedule_table
from .inference import CaptionGenerator, generate, generate_card
from .trainer import Trainer, finetune, learning_rate_at, pretrain, task_for_step

__all__ = [
    "load_checkpoint",
    "restore_model",
    "save_checkpoint",
    "ModelConfig",
    "TrainConfig",
    "load_config",
    "CurriculumState",
    "make_cm_sample",
    "schedule",
    "schedule_table",
    "CaptionGenerator",
    "generate",
    "generate_card",
    "Trainer",
    "finetune",
    "learning_rate_at",
    "pretrain",
    "task_for_step",
]
