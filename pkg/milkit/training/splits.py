"""
Repeated train/validation splits around a fixed test set
"""

import json
import os
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import List, Sequence, Tuple, Union

import numpy as np
from sklearn.model_selection import train_test_split

from milkit.exceptions import DatasetError


@dataclass
class SplitSet:
    k: int
    train: List[List[str]]
    val: List[List[str]]
    test: List[str]

    def validate(self) -> None:
        if self.k < 1 or len(self.train) != self.k or len(self.val) != self.k:
            raise DatasetError(f"split set must hold k={self.k} train/val repetitions")
        test = set(self.test)
        for rep, (train, val) in enumerate(zip(self.train, self.val)):
            if not train or not val:
                raise DatasetError(f"repetition {rep} has an empty train or val split")
            if set(train) & set(val):
                raise DatasetError(f"repetition {rep}: train and val overlap")
            if (set(train) | set(val)) & test:
                raise DatasetError(f"repetition {rep}: test overlaps train/val")

    def repetition(self, rep: int) -> Tuple[List[str], List[str]]:
        return self.train[rep], self.val[rep]

    def save(self, path: Union[str, os.PathLike]) -> None:
        Path(path).write_text(json.dumps(asdict(self), indent=2, sort_keys=True) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Union[str, os.PathLike]) -> "SplitSet":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
            splits = cls(k=data["k"], train=data["train"], val=data["val"], test=data["test"])
        except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
            raise DatasetError(f"cannot read split file {path}: {e}") from e
        splits.validate()
        return splits


def _split(ids: np.ndarray, labels: np.ndarray, fraction: float, seed: int) -> Tuple[np.ndarray, np.ndarray]:
    # stratify when both classes can appear on both sides
    try:
        return tuple(train_test_split(ids, test_size=fraction, stratify=labels, random_state=seed))
    except ValueError:
        return tuple(train_test_split(ids, test_size=fraction, random_state=seed))


def make_splits(bag_ids: Sequence[str], labels: Sequence[int], k: int = 5, val_fraction: float = 0.2,
                test_fraction: float = 0.2, seed: int = 0) -> SplitSet:
    """
    Hold out a stratified test set once, then draw ``k`` stratified train/val
    splits of the remainder. Every list keeps the input order of ``bag_ids``.
    """
    ids = np.asarray(list(bag_ids))
    labels = np.asarray(labels)
    if len(ids) < 2:
        raise DatasetError("need at least two bags to split")
    if k < 1:
        raise DatasetError(f"k must be >= 1, got {k}")
    position = {bag_id: i for i, bag_id in enumerate(ids)}

    def ordered(subset) -> List[str]:
        return sorted((str(x) for x in subset), key=position.__getitem__)

    if test_fraction > 0:
        development, test = _split(ids, labels, test_fraction, seed)
    else:
        development, test = ids, np.array([], dtype=ids.dtype)
    development = np.asarray(ordered(development))
    dev_labels = labels[[position[x] for x in development]]

    train, val = [], []
    for rep in range(k):
        rep_train, rep_val = _split(development, dev_labels, val_fraction, seed + rep + 1)
        train.append(ordered(rep_train))
        val.append(ordered(rep_val))

    splits = SplitSet(k=k, train=train, val=val, test=ordered(test))
    splits.validate()
    return splits
