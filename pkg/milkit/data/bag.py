"""
In-memory representation of a single labeled MIL bag
"""

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np
import scipy.sparse as sp

from milkit.exceptions import BagDataError


def _read_only(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


def _sparse_equal(a: Optional[sp.spmatrix], b: Optional[sp.spmatrix]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.shape == b.shape and (a != b).nnz == 0


def _array_equal(a: Optional[np.ndarray], b: Optional[np.ndarray]) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return a.dtype == b.dtype and a.shape == b.shape and np.array_equal(a, b)


@dataclass(frozen=True, eq=False)
class Bag:
    """
    One labeled MIL example.

    Attributes:
        bag_id: Identifier, unique within a dataset
        features: N×D float32 instance feature matrix
        label: Binary bag label
        inst_labels: Optional length-N uint8 vector of instance labels (evaluation only)
        coords: Optional N×k int64 instance positions, e.g. patch grid coordinates
        adjacency: Optional N×N symmetric float32 CSR instance graph with zero diagonal

    Arrays are copied and made read-only on construction. The sparse adjacency is
    treated as read-only by every function in the package.
    """

    bag_id: str
    features: np.ndarray
    label: int
    inst_labels: Optional[np.ndarray] = None
    coords: Optional[np.ndarray] = None
    adjacency: Optional[sp.csr_matrix] = None

    def __post_init__(self):
        features = np.array(self.features, dtype=np.float32)
        if features.ndim != 2 or features.shape[0] < 1:
            raise BagDataError(
                f"bag {self.bag_id!r}: features must be an N×D matrix with N >= 1, got shape {features.shape}"
            )
        if not np.isfinite(features).all():
            raise BagDataError(f"bag {self.bag_id!r}: features contain NaN or Inf")
        object.__setattr__(self, "features", _read_only(features))

        label = float(self.label)
        if label not in (0.0, 1.0):
            raise BagDataError(f"bag {self.bag_id!r}: label must be 0 or 1, got {self.label!r}")
        object.__setattr__(self, "label", int(label))

        n = features.shape[0]
        if self.inst_labels is not None:
            object.__setattr__(self, "inst_labels", _read_only(self._check_inst_labels(n)))
        if self.coords is not None:
            object.__setattr__(self, "coords", _read_only(self._check_coords(n)))
        if self.adjacency is not None:
            object.__setattr__(self, "adjacency", self._check_adjacency(n))

    def _check_inst_labels(self, n: int) -> np.ndarray:
        raw = np.asarray(self.inst_labels)
        if raw.ndim != 1 or raw.shape[0] != n:
            raise BagDataError(
                f"bag {self.bag_id!r}: field length mismatch: inst_labels has shape {raw.shape}, features has {n} rows"
            )
        if not np.isin(raw, (0, 1)).all():
            raise BagDataError(f"bag {self.bag_id!r}: inst_labels must be 0 or 1")
        inst_labels = raw.astype(np.uint8)
        if self.label == 0 and inst_labels.any():
            raise BagDataError(f"bag {self.bag_id!r}: negative bag has positive instance labels")
        return inst_labels

    def _check_coords(self, n: int) -> np.ndarray:
        raw = np.asarray(self.coords)
        if raw.ndim != 2 or raw.shape[0] != n or raw.shape[1] < 1:
            raise BagDataError(
                f"bag {self.bag_id!r}: field length mismatch: coords has shape {raw.shape}, features has {n} rows"
            )
        if not np.issubdtype(raw.dtype, np.integer):
            raise BagDataError(f"bag {self.bag_id!r}: coords must be integers")
        return raw.astype(np.int64)

    def _check_adjacency(self, n: int) -> sp.csr_matrix:
        adjacency = sp.csr_matrix(self.adjacency, dtype=np.float32, copy=True)
        if adjacency.shape != (n, n):
            raise BagDataError(
                f"bag {self.bag_id!r}: field length mismatch: adjacency has shape {adjacency.shape}, features has {n} rows"
            )
        adjacency.eliminate_zeros()
        if adjacency.nnz and adjacency.data.min() < 0:
            raise BagDataError(f"bag {self.bag_id!r}: adjacency has negative entries")
        if (adjacency != adjacency.T).nnz:
            raise BagDataError(f"bag {self.bag_id!r}: adjacency is not symmetric")
        if adjacency.diagonal().any():
            raise BagDataError(f"bag {self.bag_id!r}: adjacency has a nonzero diagonal")
        adjacency.sort_indices()
        return adjacency

    @property
    def n_instances(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, Bag):
            return NotImplemented
        return (
            self.bag_id == other.bag_id
            and self.label == other.label
            and _array_equal(self.features, other.features)
            and _array_equal(self.inst_labels, other.inst_labels)
            and _array_equal(self.coords, other.coords)
            and _sparse_equal(self.adjacency, other.adjacency)
        )

    __hash__ = None

    def __repr__(self) -> str:
        present = [name for name in ("inst_labels", "coords", "adjacency") if getattr(self, name) is not None]
        return (
            f"Bag(bag_id={self.bag_id!r}, n_instances={self.n_instances}, feature_dim={self.feature_dim}, "
            f"label={self.label}, fields={present})"
        )
