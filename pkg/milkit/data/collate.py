"""
Padding/masking collation of variable-size bags into batches
"""

from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp
import torch

from milkit.data.bag import Bag
from milkit.exceptions import BagDataError

OPTIONAL_FIELDS = ("inst_labels", "coords", "adjacency")


@dataclass(frozen=True, eq=False)
class Batch:
    """
    Collated bags.

    Attributes:
        features: B×Nmax×D zero-padded instance features
        mask: B×Nmax boolean, True at real instances
        labels: Length-B float bag labels
        sizes: Length-B int64 instance counts
        bag_ids: Bag identifiers in collation order
        inst_labels: Optional B×Nmax uint8 zero-padded instance labels
        coords: Optional B×Nmax×k int64 zero-padded coordinates
        adjacency: Optional per-bag tuple of sparse N_b×N_b matrices;
            ``dense_adjacency()`` gives the padded B×Nmax×Nmax view
    """

    features: torch.Tensor
    mask: torch.Tensor
    labels: torch.Tensor
    sizes: torch.Tensor
    bag_ids: Tuple[str, ...]
    inst_labels: Optional[torch.Tensor] = None
    coords: Optional[torch.Tensor] = None
    adjacency: Optional[Tuple[sp.csr_matrix, ...]] = None

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def max_size(self) -> int:
        return self.features.shape[1]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]

    def to(self, device: Union[str, torch.device, None] = None, dtype: Optional[torch.dtype] = None) -> "Batch":
        """Move tensors to ``device`` and cast the floating tensors to ``dtype``"""
        moved = {
            "features": self.features.to(device=device, dtype=dtype),
            "labels": self.labels.to(device=device, dtype=dtype),
            "mask": self.mask.to(device=device),
            "sizes": self.sizes.to(device=device),
        }
        if self.inst_labels is not None:
            moved["inst_labels"] = self.inst_labels.to(device=device)
        if self.coords is not None:
            moved["coords"] = self.coords.to(device=device)
        return replace(self, **moved)

    def dense_adjacency(self, dtype: Optional[torch.dtype] = None,
                        device: Union[str, torch.device, None] = None) -> torch.Tensor:
        """
        Zero-padded B×Nmax×Nmax adjacency tensor.

        Padded rows and columns are all zero, so padded nodes are isolated.
        """
        if self.adjacency is None:
            raise BagDataError("batch has no adjacency")
        dense = np.zeros((len(self), self.max_size, self.max_size), dtype=np.float32)
        for b, adjacency in enumerate(self.adjacency):
            n = adjacency.shape[0]
            dense[b, :n, :n] = adjacency.toarray()
        return torch.from_numpy(dense).to(
            device=device or self.features.device, dtype=dtype or self.features.dtype
        )


def _check_consistent(bags: Sequence[Bag]) -> None:
    dims = sorted({bag.feature_dim for bag in bags})
    if len(dims) > 1:
        raise BagDataError(f"inconsistent feature dimension: bags have D in {dims}")

    for field in OPTIONAL_FIELDS:
        present = [getattr(bag, field) is not None for bag in bags]
        if any(present) and not all(present):
            missing = [bag.bag_id for bag, has in zip(bags, present) if not has]
            raise BagDataError(f"inconsistent optional field '{field}': missing in bags {missing}")

    if bags[0].coords is not None:
        widths = sorted({bag.coords.shape[1] for bag in bags})
        if len(widths) > 1:
            raise BagDataError(f"inconsistent optional field 'coords': coordinate widths {widths}")


def collate(bags: Sequence[Bag]) -> Batch:
    """
    Pad bags to the largest bag in the list and build the validity mask.

    Args:
        bags: Nonempty list of bags sharing the feature dimension and the same
            set of optional fields

    Returns:
        Batch with bag order preserved
    """
    bags = list(bags)
    if not bags:
        raise BagDataError("empty batch")
    _check_consistent(bags)

    sizes = np.array([bag.n_instances for bag in bags], dtype=np.int64)
    n_max = int(sizes.max())
    batch_size = len(bags)

    features = np.zeros((batch_size, n_max, bags[0].feature_dim), dtype=np.float32)
    mask = np.zeros((batch_size, n_max), dtype=bool)
    for b, bag in enumerate(bags):
        features[b, : sizes[b]] = bag.features
        mask[b, : sizes[b]] = True

    inst_labels = None
    if bags[0].inst_labels is not None:
        inst_labels = np.zeros((batch_size, n_max), dtype=np.uint8)
        for b, bag in enumerate(bags):
            inst_labels[b, : sizes[b]] = bag.inst_labels
        inst_labels = torch.from_numpy(inst_labels)

    coords = None
    if bags[0].coords is not None:
        coords = np.zeros((batch_size, n_max, bags[0].coords.shape[1]), dtype=np.int64)
        for b, bag in enumerate(bags):
            coords[b, : sizes[b]] = bag.coords
        coords = torch.from_numpy(coords)

    adjacency = None
    if bags[0].adjacency is not None:
        adjacency = tuple(bag.adjacency for bag in bags)

    return Batch(
        features=torch.from_numpy(features),
        mask=torch.from_numpy(mask),
        labels=torch.tensor([bag.label for bag in bags], dtype=torch.float32),
        sizes=torch.from_numpy(sizes),
        bag_ids=tuple(bag.bag_id for bag in bags),
        inst_labels=inst_labels,
        coords=coords,
        adjacency=adjacency,
    )


def _check_batch(batch: Batch) -> None:
    batch_size, n_max = batch.features.shape[:2]
    sizes = batch.sizes.cpu()
    mask = batch.mask.cpu()
    if (
        tuple(mask.shape) != (batch_size, n_max)
        or sizes.shape != (batch_size,)
        or len(batch.bag_ids) != batch_size
        or batch.labels.shape != (batch_size,)
    ):
        raise BagDataError("corrupt batch: shapes of features, mask, sizes and labels disagree")
    if batch_size == 0 or int(sizes.min()) < 1 or int(sizes.max()) != n_max:
        raise BagDataError("corrupt batch: sizes do not match the padded length")
    expected = torch.arange(n_max).unsqueeze(0) < sizes.unsqueeze(1)
    if not torch.equal(mask, expected):
        raise BagDataError("corrupt batch: mask disagrees with sizes")
    if batch.adjacency is not None:
        for adjacency, n in zip(batch.adjacency, sizes.tolist()):
            if adjacency.shape != (n, n):
                raise BagDataError("corrupt batch: adjacency shape disagrees with sizes")


def uncollate(batch: Batch) -> List[Bag]:
    """
    Strip padding and rebuild the bags of a batch.

    Raises:
        BagDataError: If the mask is inconsistent with ``sizes`` ("corrupt batch")
    """
    _check_batch(batch)
    sizes = batch.sizes.tolist()
    features = batch.features.detach().cpu().numpy()
    labels = batch.labels.detach().cpu().numpy()
    inst_labels = None if batch.inst_labels is None else batch.inst_labels.cpu().numpy()
    coords = None if batch.coords is None else batch.coords.cpu().numpy()

    bags = []
    for b, n in enumerate(sizes):
        bags.append(
            Bag(
                bag_id=batch.bag_ids[b],
                features=features[b, :n],
                label=int(labels[b]),
                inst_labels=None if inst_labels is None else inst_labels[b, :n],
                coords=None if coords is None else coords[b, :n],
                adjacency=None if batch.adjacency is None else batch.adjacency[b],
            )
        )
    return bags
