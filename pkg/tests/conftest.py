"""
Shared fixtures: random bags, synthetic datasets and a constant-output model
"""

from typing import List, Optional, Tuple

import numpy as np
import pytest
import torch
import torch.nn as nn

from milkit.data import Bag, Batch, build_adjacency
from milkit.datasets import SyntheticSpec, generate
from milkit.models import MILModel, register_model

ALL_MODELS = [
    "MeanPoolMIL",
    "MaxPoolMIL",
    "ABMIL",
    "TransformerABMIL",
    "SmABMIL",
    "SmTransformerABMIL",
    "GraphABMIL",
]


@register_model("ConstantMIL")
class ConstantMIL(MILModel):
    """Predicts the same logit for every bag; its one parameter never receives gradient"""

    LOGIT = 1.0

    def __init__(self, in_dim: int, criterion: Optional[nn.Module] = None):
        super().__init__(in_dim, criterion)
        self.unused = nn.Parameter(torch.zeros(1))

    def forward_with_attention(self, batch: Batch) -> Tuple[torch.Tensor, torch.Tensor]:
        self.check_batch(batch)
        logits = torch.full((len(batch),), self.LOGIT, dtype=batch.features.dtype) + 0.0 * self.unused.sum()
        weights = batch.mask.to(batch.features.dtype)
        return logits, weights / weights.sum(dim=1, keepdim=True)


def random_bag(rng: np.random.Generator, n: int, d: int, bag_id: str = "b", label: Optional[int] = None,
               graph: bool = True) -> Bag:
    """Bag with every optional field filled; ``graph`` attaches grid coords and adjacency"""
    label = int(rng.integers(0, 2)) if label is None else label
    inst_labels = np.zeros(n, dtype=np.uint8)
    if label:
        inst_labels[rng.integers(0, n)] = 1
    coords = adjacency = None
    if graph:
        width = int(np.ceil(np.sqrt(n)))
        coords = np.stack([np.arange(n) // width, np.arange(n) % width], axis=1)
        adjacency = build_adjacency(coords)
    return Bag(
        bag_id=bag_id,
        features=rng.standard_normal((n, d)).astype(np.float32),
        label=label,
        inst_labels=inst_labels,
        coords=coords,
        adjacency=adjacency,
    )


def random_bags(rng: np.random.Generator, sizes: List[int], d: int, graph: bool = True) -> List[Bag]:
    return [random_bag(rng, n, d, bag_id=f"b{i}", graph=graph) for i, n in enumerate(sizes)]


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def toy_spec() -> SyntheticSpec:
    return SyntheticSpec(n_bags=30, mean_bag_size=8, witness_rate=0.25, feature_dim=4, seed=7)


@pytest.fixture
def toy_bags(toy_spec) -> List[Bag]:
    return generate(toy_spec)
