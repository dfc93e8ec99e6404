"""Multi-layer recurrent stacks (vanilla tanh RNN or LSTM) with hand-written
single-step forward and backward passes.

All tensors are batch-major: inputs ``(B, input_dim)``, states ``(B, hidden)``.
A stack state is a list with one ``(h, c)`` pair per layer; ``c`` is carried
but unused for the vanilla cell.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nn import INIT_SCALE, ParamSet, ShapeError, uniform_init

CELL_KINDS = ("rnn", "lstm")


@dataclass(frozen=True)
class StackSpec:
    prefix: str
    kind: str
    layers: int
    hidden: int
    input_dim: int

    def __post_init__(self):
        if self.kind not in CELL_KINDS:
            raise ValueError(f"cell kind must be one of {CELL_KINDS}, got {self.kind!r}")
        if self.layers < 1 or self.hidden < 1 or self.input_dim < 1:
            raise ValueError(f"invalid stack dimensions {self}")

    @property
    def gates(self) -> int:
        return 4 * self.hidden if self.kind == "lstm" else self.hidden

    def name(self, layer: int, part: str) -> str:
        return f"{self.prefix}.l{layer}.{part}"


def init_stack(params: ParamSet, spec: StackSpec, rng, scale: float = INIT_SCALE):
    for k in range(spec.layers):
        in_dim = spec.input_dim if k == 0 else spec.hidden
        uniform_init(params, spec.name(k, "wx"), (spec.gates, in_dim), rng, scale)
        uniform_init(params, spec.name(k, "wh"), (spec.gates, spec.hidden), rng, scale)
        uniform_init(params, spec.name(k, "b"), (1, spec.gates), rng, scale)


def zero_state(spec: StackSpec, batch: int = 1):
    return [(np.zeros((batch, spec.hidden)), np.zeros((batch, spec.hidden)))
            for _ in range(spec.layers)]


def zero_dstate(spec: StackSpec, batch: int):
    return [[np.zeros((batch, spec.hidden)), np.zeros((batch, spec.hidden))]
            for _ in range(spec.layers)]


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def stack_step(params: ParamSet, spec: StackSpec, x: np.ndarray, state):
    """Advance every layer by one time step; returns ``(new_state, cache)``."""
    if x.ndim != 2 or x.shape[1] != spec.input_dim:
        raise ShapeError(f"{spec.prefix}: input shape {x.shape}, expected (B, {spec.input_dim})")
    H = spec.hidden
    new_state = []
    cache = []
    inp = x
    for k in range(spec.layers):
        h_prev, c_prev = state[k]
        z = (inp @ params[spec.name(k, "wx")].T + h_prev @ params[spec.name(k, "wh")].T
             + params[spec.name(k, "b")])
        if spec.kind == "rnn":
            h = np.tanh(z)
            c = c_prev
            cache.append((inp, h_prev, c_prev, h))
        else:
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H:2 * H])
            o = _sigmoid(z[:, 2 * H:3 * H])
            g = np.tanh(z[:, 3 * H:])
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            cache.append((inp, h_prev, c_prev, i, f, o, g, tc))
        new_state.append((h, c))
        inp = h
    return new_state, cache


def stack_step_backward(params: ParamSet, spec: StackSpec, cache, dstate):
    """Backpropagate one step.

    ``dstate`` holds, per layer, the gradient with respect to this step's
    output ``(h, c)``.  Parameter gradients are accumulated into ``params``.
    Returns ``(dx, dstate_prev)``.
    """
    H = spec.hidden
    dstate_prev = [None] * spec.layers
    dh_from_above = None
    for k in reversed(range(spec.layers)):
        dh = dstate[k][0] if dh_from_above is None else dstate[k][0] + dh_from_above
        dc_next = dstate[k][1]
        wx = spec.name(k, "wx")
        wh = spec.name(k, "wh")
        if spec.kind == "rnn":
            inp, h_prev, c_prev, h = cache[k]
            dz = dh * (1.0 - h * h)
            dc_prev = dc_next
        else:
            inp, h_prev, c_prev, i, f, o, g, tc = cache[k]
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            di = dc * g
            dg = dc * i
            df = dc * c_prev
            dc_prev = dc * f
            dz = np.empty((dh.shape[0], 4 * H))
            dz[:, :H] = di * i * (1.0 - i)
            dz[:, H:2 * H] = df * f * (1.0 - f)
            dz[:, 2 * H:3 * H] = do * o * (1.0 - o)
            dz[:, 3 * H:] = dg * (1.0 - g * g)
        params.grads[wx] += dz.T @ inp
        params.grads[wh] += dz.T @ h_prev
        params.grads[spec.name(k, "b")] += dz.sum(axis=0, keepdims=True)
        dh_from_above = dz @ params[wx]
        dstate_prev[k] = [dz @ params[wh], dc_prev]
    return dh_from_above, dstate_prev


def infer_stack_spec(tensors, prefix: str) -> StackSpec:
    """Recover a StackSpec from checkpoint tensor names and shapes."""
    layers = 0
    while f"{prefix}.l{layers}.wx" in tensors:
        layers += 1
    if layers == 0:
        raise ValueError(f"no recurrent layers under prefix {prefix!r}")
    gates, input_dim = tensors[f"{prefix}.l0.wx"].shape
    hidden = tensors[f"{prefix}.l0.wh"].shape[1]
    if gates == 4 * hidden:
        kind = "lstm"
    elif gates == hidden:
        kind = "rnn"
    else:
        raise ShapeError(f"{prefix}: gate width {gates} fits neither cell for hidden {hidden}")
    return StackSpec(prefix, kind, layers, hidden, input_dim)
