"""
Bag-level classification metrics: ACC, AUROC, F1
"""

from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import torch
import torch.nn.functional as F
from scipy.special import expit
from sklearn.metrics import accuracy_score, f1_score, roc_auc_score

from milkit.data.bag import Bag
from milkit.data.collate import collate
from milkit.exceptions import DatasetError, MetricError
from milkit.models.base import MILModel

THRESHOLD = 0.5


@dataclass
class Metrics:
    acc: float
    auroc: float
    f1: float
    loss: float
    inst_auroc: Optional[float] = None
    history: List[Dict[str, Any]] = field(default_factory=list)

    def to_dict(self, with_history: bool = True) -> Dict[str, Any]:
        data = asdict(self)
        if not with_history:
            data.pop("history")
        return data

    def summary(self) -> str:
        return f"ACC {self.acc:.3f}  AUROC {self.auroc:.3f}  F1 {self.f1:.3f}"


def auroc(labels: Sequence[int], scores: Sequence[float]) -> float:
    """Probability that a random positive outscores a random negative, ties counted 0.5"""
    labels = np.asarray(labels)
    if np.unique(labels).size < 2:
        raise MetricError("AUROC requires both classes")
    return float(roc_auc_score(labels, np.asarray(scores, dtype=np.float64)))


def classification_metrics(labels: Sequence[int], probabilities: Sequence[float]) -> Dict[str, float]:
    """Accuracy and F1 of predictions thresholded at probability 0.5 (inclusive)"""
    labels = np.asarray(labels).astype(int)
    predictions = (np.asarray(probabilities) >= THRESHOLD).astype(int)
    return {
        "acc": float(accuracy_score(labels, predictions)),
        "f1": float(f1_score(labels, predictions, zero_division=0)),
    }


def compute_metrics(labels: Sequence[int], probabilities: Sequence[float], loss: float = float("nan"),
                    scores: Optional[Sequence[float]] = None) -> Metrics:
    """
    Args:
        labels: Binary bag labels
        probabilities: Predicted positive-class probabilities
        loss: Mean loss to record alongside
        scores: Optional monotone ranking scores (e.g. logits) used for AUROC instead of
            the probabilities, which avoids ties from saturated sigmoids
    """
    ranked = probabilities if scores is None else scores
    return Metrics(auroc=auroc(labels, ranked), loss=float(loss), **classification_metrics(labels, probabilities))


@torch.no_grad()
def evaluate(model: MILModel, data: Sequence[Bag], batch_size: int = 1, device: str = "cpu") -> Metrics:
    """
    Evaluate a model on labeled bags.

    AUROC ranks bags by logit. When bags carry instance labels, ``inst_auroc``
    scores the model's instance scores against them over real instances.
    """
    bags = list(data)
    if not bags:
        raise DatasetError("empty evaluation data")

    was_training = model.training
    model.eval()
    logits_all, labels_all, inst_scores, inst_labels = [], [], [], []
    total_loss = 0.0
    try:
        for start in range(0, len(bags), batch_size):
            batch = collate(bags[start:start + batch_size]).to(device)
            logits, scores = model.forward_with_attention(batch)
            labels = batch.labels.to(logits.dtype)
            total_loss += float(F.binary_cross_entropy_with_logits(logits, labels, reduction="sum"))
            logits_all.append(logits.double().cpu().numpy())
            labels_all.append(batch.labels.cpu().numpy())
            if batch.inst_labels is not None:
                mask = batch.mask.cpu()
                inst_scores.append(scores.double().cpu()[mask].numpy())
                inst_labels.append(batch.inst_labels.cpu()[mask].numpy())
    finally:
        model.train(was_training)

    logits = np.concatenate(logits_all)
    labels = np.concatenate(labels_all).astype(int)
    probabilities = expit(logits)
    metrics = compute_metrics(labels, probabilities, loss=total_loss / len(bags), scores=logits)

    if inst_labels:
        flat_labels = np.concatenate(inst_labels)
        if np.unique(flat_labels).size == 2:
            metrics.inst_auroc = auroc(flat_labels, np.concatenate(inst_scores))
    return metrics
