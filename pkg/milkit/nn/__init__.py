"""
Mask-aware neural building blocks for MIL models
"""

from .attention_pool import AttentionPool
from .encoder import MaskedEncoderLayer
from .graph_conv import GraphConv, graph_conv
from .masked_softmax import masked_softmax
from .sm_operator import SmParams, sm_operator

__all__ = ['masked_softmax', 'AttentionPool', 'MaskedEncoderLayer', 'GraphConv', 'graph_conv',
           'SmParams', 'sm_operator']
