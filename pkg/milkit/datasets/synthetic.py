"""
Seeded synthetic bag generators for desk-scale verification of MIL models
"""

import logging
from dataclasses import asdict, dataclass
from typing import Any, Dict, List

import numpy as np

from milkit.data.adjacency import build_adjacency
from milkit.data.bag import Bag
from milkit.exceptions import GeneratorError

logger = logging.getLogger(__name__)

KINDS = ("gaussian_witness", "count_threshold", "distractor")


@dataclass(frozen=True)
class SyntheticSpec:
    """
    Parameters of a synthetic dataset.

    kind:
        gaussian_witness: negatives ~ N(0, I), witnesses ~ N(class_separation·e₁, I);
            a bag is positive iff it holds at least one witness.
        count_threshold: positive iff it holds at least ``threshold_k`` witnesses.
            Negative bags carry 1..threshold_k-1 witness-distributed decoys whose
            instance labels are 0, so presence alone does not decide the label.
        distractor: gaussian_witness plus distractor instances ~ N(class_separation·e₂, I)
            drawn at ``witness_rate`` in both classes.

    grid_coords places instances on a square patch grid (witnesses contiguous in
    row-major order) and attaches the 4-neighbourhood adjacency.
    """

    kind: str = "gaussian_witness"
    n_bags: int = 100
    mean_bag_size: int = 20
    witness_rate: float = 0.1
    feature_dim: int = 8
    class_separation: float = 3.0
    threshold_k: int = 2
    seed: int = 0
    grid_coords: bool = True

    @property
    def size_range(self):
        return max(1, self.mean_bag_size // 2), (3 * self.mean_bag_size) // 2

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise GeneratorError(f"unknown generator kind {self.kind!r}, expected one of {list(KINDS)}")
        if self.n_bags < 1 or self.mean_bag_size < 1 or self.feature_dim < 1 or self.threshold_k < 1:
            raise GeneratorError("n_bags, mean_bag_size, feature_dim and threshold_k must be positive")
        if self.class_separation <= 0:
            raise GeneratorError(f"class_separation must be positive, got {self.class_separation}")
        if self.seed < 0:
            raise GeneratorError(f"seed must be unsigned, got {self.seed}")
        if not 0 < self.witness_rate < 1:
            raise GeneratorError(f"witness_rate must lie in (0, 1), got {self.witness_rate}")

        if self.witness_rate * self.mean_bag_size < 1:
            raise GeneratorError(
                f"infeasible witness configuration: witness_rate·mean_bag_size = "
                f"{self.witness_rate * self.mean_bag_size:g} < 1"
            )
        if self.kind == "count_threshold" and self.threshold_k > self.size_range[1]:
            raise GeneratorError(
                f"infeasible witness configuration: threshold_k={self.threshold_k} exceeds the "
                f"largest bag size {self.size_range[1]}"
            )
        if self.kind == "distractor" and self.feature_dim < 2:
            raise GeneratorError("infeasible witness configuration: distractor needs feature_dim >= 2")

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def bag_rule(spec: SyntheticSpec, inst_labels: np.ndarray) -> int:
    """Bag label implied by the generator's instance-level rule"""
    witnesses = int(np.asarray(inst_labels).sum())
    if spec.kind == "count_threshold":
        return int(witnesses >= spec.threshold_k)
    return int(witnesses >= 1)


def _grid(n: int) -> np.ndarray:
    width = int(np.ceil(np.sqrt(n)))
    idx = np.arange(n)
    return np.stack([idx // width, idx % width], axis=1).astype(np.int64)


def _witness_count(spec: SyntheticSpec, rng: np.random.Generator, label: int, n: int) -> int:
    drawn = int(rng.binomial(n, spec.witness_rate))
    if spec.kind == "count_threshold":
        if label:
            return int(np.clip(drawn, spec.threshold_k, n))
        # decoys in negative bags
        if spec.threshold_k == 1:
            return 0
        return min(int(rng.integers(1, spec.threshold_k)), n)
    return int(np.clip(drawn, 1, n)) if label else 0


def generate(spec: SyntheticSpec) -> List[Bag]:
    """
    Draw ``spec.n_bags`` bags; identical specs (including seed) give identical bags

    Returns:
        Bags named ``bag_00000``, ``bag_00001``, ... with truthful instance labels
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    low, high = spec.size_range

    witness_mean = np.zeros(spec.feature_dim)
    witness_mean[0] = spec.class_separation
    distractor_mean = np.zeros(spec.feature_dim)
    if spec.kind == "distractor":
        distractor_mean[1] = spec.class_separation

    bags = []
    for i in range(spec.n_bags):
        label = int(rng.integers(0, 2))
        n = int(rng.integers(low, high + 1))
        if spec.kind == "count_threshold" and label:
            n = max(n, spec.threshold_k)

        n_witness = _witness_count(spec, rng, label, n)
        features = rng.standard_normal((n, spec.feature_dim))
        start = int(rng.integers(0, n - n_witness + 1))
        witnesses = np.arange(start, start + n_witness)
        features[witnesses] += witness_mean

        if spec.kind == "distractor":
            others = np.setdiff1d(np.arange(n), witnesses)
            n_distractor = min(int(rng.binomial(n, spec.witness_rate)), others.size)
            features[rng.permutation(others)[:n_distractor]] += distractor_mean

        inst_labels = np.zeros(n, dtype=np.uint8)
        if label:
            inst_labels[witnesses] = 1

        coords = adjacency = None
        if spec.grid_coords:
            coords = _grid(n)
            adjacency = build_adjacency(coords, threshold=1.0, metric="L1")

        bags.append(
            Bag(
                bag_id=f"bag_{i:05d}",
                features=features.astype(np.float32),
                label=label,
                inst_labels=inst_labels,
                coords=coords,
                adjacency=adjacency,
            )
        )

    positives = sum(bag.label for bag in bags)
    logger.info("Generated %d %s bags (%d positive)", len(bags), spec.kind, positives)
    return bags
