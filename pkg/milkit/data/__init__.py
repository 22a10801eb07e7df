"""
Bag and batch data model
"""

from .adjacency import build_adjacency, normalize_adjacency
from .bag import Bag
from .collate import Batch, collate, uncollate

__all__ = ['Bag', 'Batch', 'collate', 'uncollate', 'build_adjacency', 'normalize_adjacency']
