"""Skeleton action recognition with a kinematic GCN branch fused with sub-action text semantics."""
from .errors import SubactError
from .labels import LabelMap, Vocabulary
from .model import ModelConfig, SubActionModel

__all__ = ["LabelMap", "ModelConfig", "SubActionModel", "SubactError", "Vocabulary"]
__version__ = "0.1.0"
