"""Dense numerical kernel: forward math, parameter storage, Adam, clipping,
finite-difference gradient checks and the binary checkpoint format."""

from __future__ import annotations

import io
import math
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

CE_EPS = 1e-12
ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8
INIT_SCALE = 0.5
CHECKPOINT_MAGIC = "CFKP1"


class ShapeError(ValueError):
    pass


class NumericError(ArithmeticError):
    pass


class TrainingError(RuntimeError):
    pass


def affine(x, W, b):
    """Return ``W @ x + b`` for a single vector ``x``."""
    x = np.asarray(x, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if W.ndim != 2 or x.ndim != 1 or W.shape[1] != x.shape[0] or W.shape[0] != b.shape[0]:
        raise ShapeError(
            f"affine: W{W.shape} x{x.shape} b{b.shape} do not conform"
        )
    return W @ x + b


def softmax(scores, axis=-1):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("softmax of an empty vector")
    shifted = scores - scores.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=axis, keepdims=True)


def log_softmax(scores, axis=-1):
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ValueError("log_softmax of an empty vector")
    shifted = scores - scores.max(axis=axis, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=axis, keepdims=True))


def cross_entropy(pred, target: int) -> float:
    pred = np.asarray(pred, dtype=np.float64)
    if not 0 <= target < pred.shape[-1]:
        raise ValueError(f"target {target} outside [0, {pred.shape[-1]})")
    return float(-math.log(pred[target] + CE_EPS))


def softmax_xent(logits: np.ndarray, targets: np.ndarray):
    """Batched softmax + cross-entropy.

    Returns the per-row losses and the gradient of their *sum* with respect to
    ``logits``.  The gradient accounts for ``CE_EPS`` exactly.
    """
    probs = softmax(logits)
    rows = np.arange(len(targets))
    p_t = probs[rows, targets]
    losses = -np.log(p_t + CE_EPS)
    dlogits = probs.copy()
    dlogits[rows, targets] -= 1.0
    dlogits *= (p_t / (p_t + CE_EPS))[:, None]
    return losses, dlogits


class ParamSet:
    """Named trainable tensors with gradients and Adam moments."""

    def __init__(self):
        self.values: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(self, name: str, value: np.ndarray) -> np.ndarray:
        value = np.array(value, dtype=np.float64)
        if value.ndim != 2:
            raise ShapeError(f"parameter {name} must be 2-D, got shape {value.shape}")
        if name in self.values:
            raise KeyError(f"duplicate parameter {name}")
        self.values[name] = value
        self.grads[name] = np.zeros_like(value)
        self.m[name] = np.zeros_like(value)
        self.v[name] = np.zeros_like(value)
        return value

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def __iter__(self):
        return iter(self.values)

    def __len__(self):
        return len(self.values)

    def names(self) -> list[str]:
        return list(self.values)

    def zero_grad(self):
        for g in self.grads.values():
            g.fill(0.0)

    def copy(self) -> "ParamSet":
        out = ParamSet()
        for name, value in self.values.items():
            out.values[name] = value.copy()
            out.grads[name] = self.grads[name].copy()
            out.m[name] = self.m[name].copy()
            out.v[name] = self.v[name].copy()
        out.step_count = self.step_count
        return out

    def n_weights(self) -> int:
        return sum(v.size for v in self.values.values())


def uniform_init(params: ParamSet, name: str, shape, rng: np.random.Generator,
                 scale: float = INIT_SCALE) -> np.ndarray:
    return params.add(name, rng.uniform(-scale, scale, size=shape))


def global_grad_norm(params: ParamSet) -> float:
    return math.sqrt(sum(float(np.sum(g * g)) for g in params.grads.values()))


def clip_global_norm(params: ParamSet, max_norm: float) -> float:
    """Scale all gradients so their joint L2 norm is at most ``max_norm``."""
    if not max_norm > 0:
        raise ValueError(f"max_norm must be positive, got {max_norm}")
    norm = global_grad_norm(params)
    if norm <= max_norm:
        return 1.0
    scale = max_norm / norm
    for g in params.grads.values():
        g *= scale
    return scale


def clip_elementwise(params: ParamSet, max_value: float) -> int:
    """Clamp each gradient entry to ``[-max_value, max_value]``; returns the count clipped."""
    if not max_value > 0:
        raise ValueError(f"max_value must be positive, got {max_value}")
    clipped = 0
    for g in params.grads.values():
        clipped += int(np.count_nonzero(np.abs(g) > max_value))
        np.clip(g, -max_value, max_value, out=g)
    return clipped


def adam_step(params: ParamSet, lr: float = 0.001) -> ParamSet:
    for name, g in params.grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient in {name}")
    params.step_count += 1
    t = params.step_count
    bc1 = 1.0 - ADAM_BETA1 ** t
    bc2 = 1.0 - ADAM_BETA2 ** t
    for name, value in params.values.items():
        g = params.grads[name]
        m = params.m[name]
        v = params.v[name]
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * g * g
        value -= lr * (m / bc1) / (np.sqrt(v / bc2) + ADAM_EPS)
        g.fill(0.0)
    return params


def grad_check(loss_fn: Callable[[ParamSet], float],
               grad_fn: Callable[[ParamSet], None],
               params: ParamSet, eps: float = 1e-4,
               names: Iterable[str] | None = None) -> float:
    """Max relative error between analytic and central-difference gradients.

    ``grad_fn`` must fill ``params.grads`` for the loss computed by ``loss_fn``.
    """
    params.zero_grad()
    grad_fn(params)
    analytic = {k: g.copy() for k, g in params.grads.items()}
    worst = 0.0
    for name in names if names is not None else params.names():
        value = params.values[name]
        flat = value.reshape(-1)
        a_flat = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = loss_fn(params)
            flat[i] = orig - eps
            down = loss_fn(params)
            flat[i] = orig
            numeric = (up - down) / (2 * eps)
            a = a_flat[i]
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            if math.isnan(err):
                return float("nan")
            worst = max(worst, err)
    params.zero_grad()
    return worst


def save_checkpoint(path, tensors) -> None:
    """Write tensors (a ParamSet or name->2-D array mapping) in CFKP1 format.

    Layout: magic line, one ``name rows cols`` line per tensor, a blank line,
    then row-major little-endian float32 data in header order.
    """
    if isinstance(tensors, ParamSet):
        tensors = tensors.values
    header = [CHECKPOINT_MAGIC]
    blobs = []
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ShapeError(f"checkpoint tensor {name} must be 2-D")
        if any(ch.isspace() for ch in name):
            raise ValueError(f"tensor name {name!r} contains whitespace")
        header.append(f"{name} {arr.shape[0]} {arr.shape[1]}")
        blobs.append(np.ascontiguousarray(arr, dtype="<f4").tobytes())
    with open(path, "wb") as fh:
        fh.write(("\n".join(header) + "\n\n").encode("ascii"))
        for blob in blobs:
            fh.write(blob)


def load_checkpoint(path) -> dict[str, np.ndarray]:
    data = Path(path).read_bytes()
    buf = io.BytesIO(data)
    magic = buf.readline().decode("ascii").rstrip("\n")
    if magic != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a {CHECKPOINT_MAGIC} checkpoint")
    specs = []
    while True:
        line = buf.readline()
        if not line:
            raise ValueError(f"{path}: truncated header")
        line = line.decode("ascii").rstrip("\n")
        if line == "":
            break
        name, rows, cols = line.split()
        specs.append((name, int(rows), int(cols)))
    out = {}
    for name, rows, cols in specs:
        n = rows * cols
        raw = buf.read(4 * n)
        if len(raw) != 4 * n:
            raise ValueError(f"{path}: truncated data for {name}")
        out[name] = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(rows, cols)
    if buf.read(1):
        raise ValueError(f"{path}: trailing bytes after tensor data")
    return out


def params_from_tensors(tensors: dict[str, np.ndarray]) -> ParamSet:
    params = ParamSet()
    for name, value in tensors.items():
        params.add(name, value)
    return params


def round_to_float32(params: ParamSet) -> ParamSet:
    """Snap values to float32 precision so in-memory and reloaded models agree."""
    for value in params.values.values():
        value[...] = value.astype(np.float32).astype(np.float64)
    return params
