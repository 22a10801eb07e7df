"""
Trainer for MIL models with per-epoch validation and checkpoint selection
"""

import copy
import logging
from typing import Any, Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import torch
from tqdm import tqdm

from milkit.config import settings
from milkit.data.bag import Bag
from milkit.data.collate import Batch, collate, uncollate
from milkit.exceptions import DatasetError, DivergenceError, MetricError
from milkit.models.base import MILModel
from milkit.training.metrics import Metrics, evaluate
from milkit.training.run_config import RunConfig

logger = logging.getLogger(__name__)

# a list of bags, or anything yielding collated batches such as DataLoader(..., collate_fn=collate)
TrainingData = Union[Sequence[Bag], Iterable[Batch]]


def _is_bag_sequence(data: Any) -> bool:
    return isinstance(data, Sequence) and len(data) > 0 and isinstance(data[0], Bag)


def as_bags(data: Optional[TrainingData]) -> List[Bag]:
    """Flatten bags or collated batches into a list of bags"""
    if data is None:
        return []
    bags: List[Bag] = []
    for item in data:
        if isinstance(item, Bag):
            bags.append(item)
        elif isinstance(item, Batch):
            bags.extend(uncollate(item))
        else:
            raise DatasetError(f"expected Bag or Batch items, got {type(item).__name__}")
    return bags


class Trainer:
    """
    Runs epochs of minibatch optimization.

    Training data is either a sequence of bags, collated here in an order
    reshuffled every epoch by a generator seeded with ``seed + epoch``, or an
    iterable of ``Batch`` objects (typically a DataLoader with ``collate_fn=collate``)
    consumed in the order it yields. With validation data and the ``best_val_auroc``
    policy the parameters of the best validation epoch are restored at the end;
    otherwise the last parameters are kept.
    """

    def __init__(self, model: MILModel, optimizer: torch.optim.Optimizer, device: str = "cpu",
                 batch_size: int = 1, seed: int = 0, checkpoint_policy: str = "best_val_auroc",
                 show_progress: Optional[bool] = None):
        self.model = model.to(device)
        self.optimizer = optimizer
        self.device = device
        self.batch_size = batch_size
        self.seed = seed
        self.checkpoint_policy = checkpoint_policy
        self.show_progress = settings.show_progress if show_progress is None else show_progress

        self.history: List[Dict[str, Any]] = []
        self.total_steps = 0
        self.best_epoch: Optional[int] = None
        self.best_auroc: Optional[float] = None
        self._best_state: Optional[Dict[str, torch.Tensor]] = None

    def _batches(self, data: TrainingData, epoch: int) -> Iterator[Batch]:
        if _is_bag_sequence(data):
            order = np.random.default_rng(self.seed + epoch).permutation(len(data))
            for start in range(0, len(data), self.batch_size):
                yield collate([data[i] for i in order[start:start + self.batch_size]])
            return
        for item in data:
            if not isinstance(item, Batch):
                raise DatasetError(f"training data must yield Batch objects, got {type(item).__name__}")
            yield item

    def _n_steps(self, data: TrainingData) -> Optional[int]:
        if _is_bag_sequence(data):
            return -(-len(data) // self.batch_size)
        try:
            return len(data)
        except TypeError:
            return None

    def _train_epoch(self, data: TrainingData, epoch: int) -> Dict[str, Any]:
        self.model.train()
        loss_sum, steps, seen = 0.0, 0, 0

        batches = tqdm(self._batches(data, epoch), total=self._n_steps(data), desc=f"epoch {epoch}",
                       leave=False, disable=not self.show_progress)
        for batch in batches:
            batch = batch.to(self.device)
            self.optimizer.zero_grad()
            loss, _ = self.model.compute_loss(batch)
            if not torch.isfinite(loss):
                logger.error("Non-finite loss at epoch %d, step %d", epoch, steps)
                raise DivergenceError(epoch, steps, float(loss))
            loss.backward()
            self.optimizer.step()

            loss_sum += float(loss) * len(batch)
            seen += len(batch)
            steps += 1
            self.total_steps += 1

        if seen == 0:
            raise DatasetError("empty training data")
        return {"epoch": epoch, "steps": steps, "train_loss": loss_sum / seen}

    def _validate(self, bags: Sequence[Bag], record: Dict[str, Any]) -> None:
        try:
            metrics = evaluate(self.model, bags, self.batch_size, self.device)
        except MetricError:
            logger.warning("Validation AUROC undefined at epoch %d (single-class validation set)", record["epoch"])
            record.update(val_loss=None, val_acc=None, val_auroc=None, val_f1=None)
            return
        record.update(val_loss=metrics.loss, val_acc=metrics.acc, val_auroc=metrics.auroc, val_f1=metrics.f1)

        if self.checkpoint_policy == "best_val_auroc" and (self.best_auroc is None or metrics.auroc > self.best_auroc):
            self.best_auroc = metrics.auroc
            self.best_epoch = record["epoch"]
            self._best_state = copy.deepcopy(self.model.state_dict())

    def train(self, train_data: TrainingData, epochs: int,
              val_data: Optional[TrainingData] = None) -> List[Dict[str, Any]]:
        """
        Args:
            train_data: Training bags, or an iterable of collated batches re-iterated every epoch
            epochs: Number of full passes
            val_data: Optional validation bags or batches evaluated after every epoch

        Returns:
            Per-epoch history records
        """
        if isinstance(train_data, Sequence):
            train_data = list(train_data)
            if not train_data:
                raise DatasetError("empty training data")
        val_bags = as_bags(val_data)

        for epoch in range(epochs):
            record = self._train_epoch(train_data, epoch)
            if val_bags:
                self._validate(val_bags, record)
            self.history.append(record)
            logger.info(
                "Epoch %d/%d  train_loss=%.4f  val_auroc=%s",
                epoch + 1, epochs, record["train_loss"],
                "n/a" if record.get("val_auroc") is None else "%.4f" % record["val_auroc"],
            )

        if self._best_state is not None:
            self.model.load_state_dict(self._best_state)
            logger.info("Restored parameters from epoch %d (val AUROC %.4f)", self.best_epoch + 1, self.best_auroc)
        elif self.checkpoint_policy == "best_val_auroc":
            logger.warning("No epoch had a defined validation AUROC; keeping the last parameters")
        return self.history


def build_optimizer(model: MILModel, config: RunConfig) -> torch.optim.Optimizer:
    if config.optimizer == "adam":
        return torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    raise ValueError(f"unsupported optimizer {config.optimizer!r}")


def train(model: MILModel, train_data: Sequence[Bag], val_data: Optional[Sequence[Bag]],
          config: RunConfig) -> Tuple[MILModel, Metrics]:
    """
    Train ``model`` under ``config`` and evaluate the selected parameters.

    Returns:
        The trained model and its metrics on ``val_data`` (``train_data`` when no
        validation bags are given), with the per-epoch history attached
    """
    config.validate()
    train_data = as_bags(train_data)
    val_data = as_bags(val_data)
    if not train_data:
        raise DatasetError("empty training data")

    torch.manual_seed(config.seed)
    trainer = Trainer(
        model,
        build_optimizer(model, config),
        device=config.device,
        batch_size=config.batch_size,
        seed=config.seed,
        checkpoint_policy=config.checkpoint_policy,
    )
    history = trainer.train(train_data, config.epochs, val_data)

    metrics = evaluate(model, val_data or train_data, config.batch_size, config.device)
    metrics.history = history
    return model, metrics
