"""
Processed dataset storage, reading and synthetic generators
"""

from .array_file import decode_array, encode_array, read_array, write_array
from .processed import ProcessedMILDataset, load_bag, save_dataset
from .synthetic import SyntheticSpec, bag_rule, generate

__all__ = [
    'encode_array', 'decode_array', 'read_array', 'write_array',
    'ProcessedMILDataset', 'load_bag', 'save_dataset',
    'SyntheticSpec', 'bag_rule', 'generate',
]
