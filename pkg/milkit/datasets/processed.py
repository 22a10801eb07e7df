"""
Processed MIL dataset: one array file per bag per field plus a CSV manifest

    root/
        manifest.csv              bag_id,label
        features/<bag_id>.milt    N×D float32
        labels/<bag_id>.milt      shape () float32
        inst_labels/<bag_id>.milt N uint8
        coords/<bag_id>.milt      N×k int64
        adjacency/<bag_id>.edges.milt    E×2 int64
        adjacency/<bag_id>.weights.milt  E float32
"""

import logging
import os
import re
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
import scipy.sparse as sp
from torch.utils.data import Dataset

from milkit.data.bag import Bag
from milkit.datasets.array_file import read_array, read_shape, write_array
from milkit.exceptions import DatasetError

logger = logging.getLogger(__name__)

MANIFEST = "manifest.csv"
MANIFEST_COLUMNS = ["bag_id", "label"]
FIELDS = ("features", "labels", "inst_labels", "coords", "adjacency")
SUFFIX = ".milt"
BAG_ID_PATTERN = re.compile(r"^[A-Za-z0-9_-]+$")

PathLike = Union[str, os.PathLike]


class ProcessedMILDataset(Dataset):
    """
    Random-access reader for a dataset directory in the processed storage format.

    Only the manifest is read on construction; ``load_bag`` opens the files of
    the requested bag and nothing else. Reads are safe from concurrent workers.
    """

    def __init__(self, root: PathLike):
        self.root = Path(root)
        manifest_path = self.root / MANIFEST
        if not manifest_path.is_file():
            raise DatasetError(f"no {MANIFEST} in dataset root {self.root}")

        try:
            manifest = pd.read_csv(manifest_path, dtype={"bag_id": str}, keep_default_na=False)
        except (OSError, pd.errors.ParserError) as e:
            raise DatasetError(f"cannot read manifest {manifest_path}: {e}") from e
        if list(manifest.columns) != MANIFEST_COLUMNS:
            raise DatasetError(f"manifest header must be 'bag_id,label', got {','.join(manifest.columns)}")
        if not manifest["label"].isin([0, 1]).all():
            raise DatasetError("manifest labels must be 0 or 1")

        self._bag_ids: Tuple[str, ...] = tuple(manifest["bag_id"])
        self._labels = manifest["label"].to_numpy(dtype=np.int64)
        self._index = {bag_id: i for i, bag_id in enumerate(self._bag_ids)}
        if len(self._index) != len(self._bag_ids):
            raise DatasetError("manifest lists duplicate bag_ids")
        bad = [bag_id for bag_id in self._bag_ids if not BAG_ID_PATTERN.match(bag_id)]
        if bad:
            raise DatasetError(f"manifest bag_id {bad[0]!r} must match [A-Za-z0-9_-]+")

        self.fields = frozenset(field for field in FIELDS if (self.root / field).is_dir())
        if "features" not in self.fields:
            raise DatasetError(f"dataset root {self.root} has no features directory")

    def __len__(self) -> int:
        return len(self._bag_ids)

    def __getitem__(self, idx: int) -> Bag:
        return self.load_bag(self._bag_ids[idx])

    def __iter__(self) -> Iterator[Bag]:
        for bag_id in self._bag_ids:
            yield self.load_bag(bag_id)

    @property
    def bag_ids(self) -> Tuple[str, ...]:
        return self._bag_ids

    @property
    def labels(self) -> np.ndarray:
        return self._labels.copy()

    @property
    def data_dim(self) -> int:
        """Instance feature dimension D, read from the first bag's header"""
        if not self._bag_ids:
            raise DatasetError("dataset is empty")
        shape = read_shape(self._path("features", self._bag_ids[0]))
        if len(shape) != 2:
            raise DatasetError(f"bag {self._bag_ids[0]!r}: features must be 2-D, got shape {shape}")
        return int(shape[1])

    def label_of(self, bag_id: str) -> int:
        return int(self._labels[self._position(bag_id)])

    def _position(self, bag_id: str) -> int:
        try:
            return self._index[bag_id]
        except KeyError:
            raise DatasetError(f"unknown bag_id {bag_id!r}") from None

    def _path(self, field: str, bag_id: str, part: Optional[str] = None) -> Path:
        name = f"{bag_id}.{part}{SUFFIX}" if part else f"{bag_id}{SUFFIX}"
        return self.root / field / name

    def _read_optional(self, field: str, bag_id: str, part: Optional[str] = None) -> Optional[np.ndarray]:
        if field not in self.fields:
            return None
        path = self._path(field, bag_id, part)
        return read_array(path) if path.is_file() else None

    def load_bag(self, bag_id: str) -> Bag:
        """
        Assemble one bag from the field directories that hold a file for it

        Args:
            bag_id: Identifier listed in the manifest

        Returns:
            Bag with the optional fields that exist on disk
        """
        label = self.label_of(bag_id)
        features_path = self._path("features", bag_id)
        if not features_path.is_file():
            raise DatasetError(f"bag {bag_id!r} has no features file")
        features = read_array(features_path)
        if features.ndim != 2:
            raise DatasetError(f"bag {bag_id!r}: features must be 2-D, got shape {features.shape}")
        n = features.shape[0]

        stored_label = self._read_optional("labels", bag_id)
        if stored_label is not None and float(stored_label) != float(label):
            raise DatasetError(
                f"bag {bag_id!r}: label field ({float(stored_label):g}) disagrees with manifest ({label})"
            )

        inst_labels = self._read_optional("inst_labels", bag_id)
        if inst_labels is not None and inst_labels.shape != (n,):
            raise DatasetError(
                f"bag {bag_id!r}: field length mismatch: inst_labels has shape {inst_labels.shape}, "
                f"features has {n} rows"
            )

        coords = self._read_optional("coords", bag_id)
        if coords is not None and (coords.ndim != 2 or coords.shape[0] != n):
            raise DatasetError(
                f"bag {bag_id!r}: field length mismatch: coords has shape {coords.shape}, features has {n} rows"
            )

        adjacency = self._load_adjacency(bag_id, n)
        return Bag(
            bag_id=bag_id,
            features=features,
            label=label,
            inst_labels=inst_labels,
            coords=coords,
            adjacency=adjacency,
        )

    def _load_adjacency(self, bag_id: str, n: int) -> Optional[sp.csr_matrix]:
        edges = self._read_optional("adjacency", bag_id, "edges")
        weights = self._read_optional("adjacency", bag_id, "weights")
        if edges is None and weights is None:
            return None
        if edges is None or weights is None:
            raise DatasetError(f"bag {bag_id!r}: adjacency needs both edges and weights files")
        if edges.ndim != 2 or edges.shape[1] != 2 or weights.shape != (edges.shape[0],):
            raise DatasetError(
                f"bag {bag_id!r}: field length mismatch: adjacency edges {edges.shape} vs weights {weights.shape}"
            )
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise DatasetError(
                f"bag {bag_id!r}: field length mismatch: adjacency references node {int(edges.max())}, "
                f"features has {n} rows"
            )
        return sp.csr_matrix((weights, (edges[:, 0], edges[:, 1])), shape=(n, n), dtype=np.float32)


def load_bag(dataset: ProcessedMILDataset, bag_id: str) -> Bag:
    return dataset.load_bag(bag_id)


def _check_bag_ids(bags: Sequence[Bag]) -> None:
    seen = set()
    for bag in bags:
        if not BAG_ID_PATTERN.match(bag.bag_id):
            raise DatasetError(f"bag_id {bag.bag_id!r} must match [A-Za-z0-9_-]+")
        if bag.bag_id in seen:
            raise DatasetError(f"duplicate bag_id {bag.bag_id!r}")
        seen.add(bag.bag_id)


def _clear_fields(root: Path) -> int:
    """Remove array files of a previous save so no stale bag or field survives"""
    removed = 0
    for field in FIELDS:
        directory = root / field
        if not directory.is_dir():
            continue
        for path in directory.glob(f"*{SUFFIX}"):
            path.unlink()
            removed += 1
        if not any(directory.iterdir()):
            directory.rmdir()
    return removed


def save_dataset(bags: Sequence[Bag], root: PathLike) -> ProcessedMILDataset:
    """
    Write bags in the processed storage format

    Args:
        bags: Bags with unique ids; manifest order follows this order
        root: Dataset directory, created if missing

    Returns:
        Reader over the written directory
    """
    bags = list(bags)
    if not bags:
        raise DatasetError("empty dataset")
    _check_bag_ids(bags)

    root = Path(root)
    fields: List[str] = ["features", "labels"]
    fields += [name for name in ("inst_labels", "coords", "adjacency") if any(getattr(b, name) is not None for b in bags)]

    try:
        removed = _clear_fields(root) if root.is_dir() else 0
        if removed:
            logger.info("Replacing %d array files of an earlier dataset in %s", removed, root)
        for field in fields:
            (root / field).mkdir(parents=True, exist_ok=True)

        for bag in bags:
            write_array(bag.features, root / "features" / f"{bag.bag_id}{SUFFIX}")
            write_array(np.array(bag.label, dtype=np.float32), root / "labels" / f"{bag.bag_id}{SUFFIX}")
            if bag.inst_labels is not None:
                write_array(bag.inst_labels, root / "inst_labels" / f"{bag.bag_id}{SUFFIX}")
            if bag.coords is not None:
                write_array(bag.coords, root / "coords" / f"{bag.bag_id}{SUFFIX}")
            if bag.adjacency is not None:
                coo = bag.adjacency.tocoo()
                edges = np.stack([coo.row, coo.col], axis=1).astype(np.int64)
                write_array(edges, root / "adjacency" / f"{bag.bag_id}.edges{SUFFIX}")
                write_array(coo.data.astype(np.float32), root / "adjacency" / f"{bag.bag_id}.weights{SUFFIX}")

        manifest = pd.DataFrame(
            {"bag_id": [bag.bag_id for bag in bags], "label": [bag.label for bag in bags]}
        )
        manifest.to_csv(root / MANIFEST, index=False, lineterminator="\n", encoding="ascii")
    except OSError as e:
        raise DatasetError(f"cannot write dataset to {root}: {e}") from e

    logger.info("Saved %d bags to %s (fields: %s)", len(bags), root, ", ".join(fields))
    return ProcessedMILDataset(root)
