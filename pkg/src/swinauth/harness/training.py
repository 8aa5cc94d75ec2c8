"""Mini-batch training with validation-loss early stopping."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Optional

import numpy as np

from swinauth.errors import ConfigError, NumericError
from swinauth.harness.architectures import Architecture
from swinauth.harness.losses import weighted_bce
from swinauth.tensor import AdamState, Tensor, adam_step, no_grad

logger = logging.getLogger(__name__)


@dataclass
class TrainRunConfig:
    architecture: object = "swin-tiny"
    batch_size: int = 32
    learning_rate: float = 1e-4
    patience: int = 20
    min_delta: float = 0.001
    max_epochs: int = 200
    seed: int = 0
    weight_mode: Optional[str] = None  # None: use the plan's weights
    shuffle_labels: bool = False
    eval_batch_size: int = 64
    name: Optional[str] = None

    @property
    def label(self) -> str:
        """Output name of the run: ``name`` if set, else the architecture name."""
        if self.name:
            return self.name
        arch = self.architecture
        if isinstance(arch, str):
            base = arch
        elif isinstance(arch, dict):
            base = arch.get("name") or arch.get("preset") or arch.get("kind", "model")
        else:
            base = getattr(arch, "name", "model")
        return base + ("-shuffled" if self.shuffle_labels else "")

    def to_dict(self) -> dict:
        d = asdict(self)
        if not isinstance(self.architecture, (str, dict)):
            d["architecture"] = self.architecture.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainRunConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run settings: {sorted(unknown)}")
        return cls(**d)


@dataclass
class PatchSet:
    """Model-ready patches with targets (1 = authentic) and loss weights."""

    images: np.ndarray
    targets: np.ndarray
    weights: np.ndarray
    painting_ids: List[str] = field(default_factory=list)
    patch_index: np.ndarray | None = None
    labels: List[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.targets)


class EarlyStopping:
    """Stop once the monitored loss has not improved by ``min_delta`` for ``patience`` epochs."""

    def __init__(self, patience: int = 20, min_delta: float = 0.001):
        self.patience = patience
        self.min_delta = min_delta
        self.best = math.inf
        self.best_epoch = -1
        self.wait = 0

    def update(self, epoch: int, value: float) -> bool:
        """Record one epoch; return True when it is a new best."""
        if value < self.best - self.min_delta:
            self.best, self.best_epoch, self.wait = value, epoch, 0
            return True
        self.wait += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.wait >= self.patience


@dataclass
class TrainResult:
    params: Dict[str, Tensor]
    log: List[dict]
    best_epoch: int
    epochs_run: int


def predict(arch: Architecture, params, images: np.ndarray, batch_size: int = 64) -> np.ndarray:
    out = []
    with no_grad():
        for start in range(0, len(images), batch_size):
            out.append(arch.forward(images[start : start + batch_size], params).data)
    return np.concatenate(out) if out else np.zeros(0, dtype=np.float32)


def evaluate(arch: Architecture, params, data: PatchSet, batch_size: int = 64):
    """Weighted loss and patch accuracy (threshold 0.5) on ``data``."""
    scores = predict(arch, params, data.images, batch_size)
    loss = float(weighted_bce(scores, data.targets, data.weights).data)
    acc = float(np.mean((scores >= 0.5) == (data.targets >= 0.5))) if len(scores) else float("nan")
    return loss, acc


def train_one(
    run: TrainRunConfig,
    arch: Architecture,
    train: PatchSet,
    val: PatchSet,
    params: Optional[Dict[str, Tensor]] = None,
    seed: Optional[int] = None,
    val_loss_fn: Optional[Callable[[int, Dict[str, Tensor]], float]] = None,
) -> TrainResult:
    """Train every layer with Adam; return the weights of the best validation epoch.

    ``val_loss_fn(epoch, params)`` replaces the validation loss when given;
    tests use it to freeze the monitored value.
    """
    seed = run.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    if params is None:
        params = arch.init(rng)
    state = AdamState(learning_rate=run.learning_rate)
    stopper = EarlyStopping(run.patience, run.min_delta)
    best = {name: p.data.copy() for name, p in params.items()}
    log = []
    n = len(train)
    epoch = -1
    for epoch in range(run.max_epochs):
        order = rng.permutation(n)
        total, total_w = 0.0, 0.0
        for start in range(0, n, run.batch_size):
            idx = np.sort(order[start : start + run.batch_size])
            for p in params.values():
                p.grad = None
            scores = arch.forward(train.images[idx], params)
            loss = weighted_bce(scores, train.targets[idx], train.weights[idx])
            value = float(loss.data)
            if not math.isfinite(value):
                raise NumericError(f"{arch.name}: non-finite training loss at epoch {epoch}, batch {start // run.batch_size}")
            loss.backward(retain_graph=False)
            adam_step(params, None, state)
            bw = float(train.weights[idx].sum())
            total += value * bw
            total_w += bw
        if val_loss_fn is not None:
            val_loss, val_acc = float(val_loss_fn(epoch, params)), float("nan")
        else:
            val_loss, val_acc = evaluate(arch, params, val, run.eval_batch_size)
        if not math.isfinite(val_loss):
            raise NumericError(f"{arch.name}: non-finite validation loss at epoch {epoch}")
        improved = stopper.update(epoch, val_loss)
        if improved:
            best = {name: p.data.copy() for name, p in params.items()}
        log.append(
            {
                "epoch": epoch,
                "train_loss": total / max(total_w, 1e-12),
                "val_loss": val_loss,
                "val_accuracy": val_acc,
                "best": improved,
            }
        )
        logger.info("%s epoch %d train %.4f val %.4f acc %.3f", arch.name, epoch, log[-1]["train_loss"], val_loss, val_acc)
        if stopper.should_stop:
            break
    for name, p in params.items():
        p.data = best[name]
        p.grad = None
    return TrainResult(params, log, stopper.best_epoch, epoch + 1)
