"""
MIL model interface, reference models and checkpoints
"""

from .base import MILModel
from .factory import ModelConfig, available_models, build_model, register_model
from .pooling import MaxPoolMIL, MeanPoolMIL
from .abmil import ABMIL, SmABMIL, SmTransformerABMIL, TransformerABMIL
from .graph import GraphABMIL
from .checkpoint import load_checkpoint, save_checkpoint

__all__ = [
    'MILModel', 'ModelConfig', 'available_models', 'build_model', 'register_model',
    'MeanPoolMIL', 'MaxPoolMIL', 'ABMIL', 'TransformerABMIL', 'SmABMIL', 'SmTransformerABMIL',
    'GraphABMIL', 'load_checkpoint', 'save_checkpoint',
]
