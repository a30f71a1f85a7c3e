from .checkpoint import load_checkpoint, save_checkpoint
from .metrics import MetricRecord
from .run import evaluate, run_training

__all__ = [
    "load_checkpoint",
    "save_checkpoint",
    "MetricRecord",
    "evaluate",
    "run_training",
]
