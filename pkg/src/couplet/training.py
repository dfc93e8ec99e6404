"""Mini-batch training loop shared by the language model and the S2S model."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .nn import (ParamSet, TrainingError, adam_step, clip_elementwise,
                 clip_global_norm, round_to_float32)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 128
    lr: float = 0.001
    # Learning rate is multiplied by this whenever validation loss fails to improve.
    lr_decay: float = 0.5
    clip: float = 5.0
    clip_mode: str = "norm"
    init_scale: float = 0.5

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1 or self.lr <= 0:
            raise ValueError(f"invalid training hyper-parameters {self}")
        if self.clip_mode not in ("norm", "element"):
            raise ValueError(f"clip_mode must be 'norm' or 'element', got {self.clip_mode!r}")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")


@dataclass
class TrainResult:
    params: ParamSet
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0

    @property
    def train_losses(self) -> list[float]:
        return [h["train_loss"] for h in self.history]


def seeded_streams(seed: int, n: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def make_batches(items, length_of, batch_size: int, rng: np.random.Generator):
    """Shuffle, group items of equal length, and chunk into batches."""
    buckets: dict[int, list[int]] = {}
    for i in rng.permutation(len(items)):
        buckets.setdefault(length_of(items[i]), []).append(int(i))
    batches = []
    for length in sorted(buckets):
        idx = buckets[length]
        batches.extend(idx[j:j + batch_size] for j in range(0, len(idx), batch_size))
    order = rng.permutation(len(batches))
    return [[items[i] for i in batches[b]] for b in order]


def mean_loss(model, params: ParamSet, items, batch_size: int = 256) -> float:
    """Token-averaged loss without touching gradients."""
    if not items:
        return float("nan")
    total = 0.0
    count = 0
    batches = make_batches(items, model.length_of, batch_size, np.random.default_rng(0))
    for batch in batches:
        loss_sum, n = model.forward_backward(params, batch, backward=False)
        total += loss_sum
        count += n
    return total / count


def train(model, train_items, val_items, tc: TrainConfig, seed: int = 0) -> TrainResult:
    """Adam with per-step gradient clipping; keeps the best-validation parameters."""
    if not train_items:
        raise ValueError("training split is empty")
    init_rng, order_rng = seeded_streams(seed, 2)
    params = model.init_params(init_rng, tc.init_scale)
    round_to_float32(params)
    result = TrainResult(params=params.copy())
    best_val = math.inf
    lr = tc.lr
    step = 0
    for epoch in range(1, tc.epochs + 1):
        total = 0.0
        count = 0
        for batch in make_batches(train_items, model.length_of, tc.batch_size, order_rng):
            params.zero_grad()
            loss_sum, n = model.forward_backward(params, batch)
            step += 1
            if not math.isfinite(loss_sum):
                raise TrainingError(f"non-finite loss at epoch {epoch}, step {step}")
            if tc.clip_mode == "norm":
                clip_global_norm(params, tc.clip)
            else:
                clip_elementwise(params, tc.clip)
            adam_step(params, lr)
            total += loss_sum
            count += n
        train_loss = total / count
        val_loss = mean_loss(model, params, val_items) if val_items else float("nan")
        result.history.append({"epoch": epoch, "train_loss": train_loss,
                               "val_loss": val_loss, "lr": lr})
        log.info("epoch %d train %.4f val %.4f lr %.2e", epoch, train_loss, val_loss, lr)
        if not val_items:
            result.params = params.copy()
            result.best_epoch = epoch
        elif val_loss < best_val:
            best_val = val_loss
            result.params = params.copy()
            result.best_epoch = epoch
        else:
            lr *= tc.lr_decay
    round_to_float32(result.params)
    return result
