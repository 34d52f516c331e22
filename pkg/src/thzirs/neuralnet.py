"""Small dense networks with hand-written backprop and Adam.

Weights are stored ``(out, in)`` so a layer computes ``x @ w.T + b`` on a
batch of row vectors. Inputs may be a single vector ``(in,)`` or a batch
``(B, in)``; outputs keep the same rank.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, ShapeError

ACTIVATIONS = ("relu", "tanh", "linear")


@dataclass
class Layer:
    w: np.ndarray  # (out, in)
    b: np.ndarray  # (out,)
    activation: str = "linear"


@dataclass
class MlpParams:
    layers: list[Layer]

    def __post_init__(self):
        for i, layer in enumerate(self.layers):
            if layer.activation not in ACTIVATIONS:
                raise DomainError(f"layer {i}: unknown activation {layer.activation!r}")
            if layer.w.ndim != 2 or layer.b.shape != (layer.w.shape[0],):
                raise ShapeError(f"layer {i}: w {layer.w.shape} and b {layer.b.shape} do not match")
            if i and layer.w.shape[1] != self.layers[i - 1].w.shape[0]:
                raise ShapeError(f"layer {i} expects {layer.w.shape[1]} inputs, previous emits "
                                 f"{self.layers[i - 1].w.shape[0]}")

    @property
    def sizes(self) -> list[int]:
        return [self.layers[0].w.shape[1]] + [layer.w.shape[0] for layer in self.layers]

    @property
    def activations(self) -> list[str]:
        return [layer.activation for layer in self.layers]

    def arrays(self) -> list[np.ndarray]:
        """All parameter arrays in a fixed order (w0, b0, w1, b1, ...)."""
        out = []
        for layer in self.layers:
            out += [layer.w, layer.b]
        return out

    def with_arrays(self, arrays) -> "MlpParams":
        arrays = list(arrays)
        return MlpParams([
            Layer(arrays[2 * i], arrays[2 * i + 1], layer.activation)
            for i, layer in enumerate(self.layers)
        ])

    def copy(self) -> "MlpParams":
        return self.with_arrays([a.copy() for a in self.arrays()])

    def zeros_like(self) -> "MlpParams":
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def n_params(self) -> int:
        return sum(a.size for a in self.arrays())


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, params: MlpParams, **kw) -> "AdamState":
        return cls([np.zeros_like(a) for a in params.arrays()],
                   [np.zeros_like(a) for a in params.arrays()], **kw)

    def copy(self) -> "AdamState":
        return AdamState([a.copy() for a in self.m], [a.copy() for a in self.v],
                         self.step, self.beta1, self.beta2, self.eps)


@dataclass
class ForwardCache:
    inputs: list[np.ndarray] = field(default_factory=list)  # input to each layer, (B, in)
    pre: list[np.ndarray] = field(default_factory=list)  # pre-activations, (B, out)
    outputs: list[np.ndarray] = field(default_factory=list)  # post-activations
    squeeze: bool = False


def mlp_init(layer_sizes, activations, rng) -> MlpParams:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise DomainError(f"need at least an input and an output size, got {sizes}")
    if any(s < 1 for s in sizes):
        raise DomainError(f"layer sizes must be >= 1, got {sizes}")
    if isinstance(activations, str):
        activations = [activations] * (len(sizes) - 1)
    activations = list(activations)
    if len(activations) != len(sizes) - 1:
        raise DomainError(f"{len(sizes) - 1} layers but {len(activations)} activations")
    gen = rng.generator() if hasattr(rng, "generator") else rng
    layers = []
    for fan_in, fan_out, act in zip(sizes[:-1], sizes[1:], activations):
        bound = 1.0 / np.sqrt(fan_in)
        layers.append(Layer(gen.uniform(-bound, bound, (fan_out, fan_in)), np.zeros(fan_out), act))
    return MlpParams(layers)


def _activate(z: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return np.maximum(z, 0.0)
    if act == "tanh":
        return np.tanh(z)
    return z


def _activation_grad(z: np.ndarray, y: np.ndarray, act: str) -> np.ndarray:
    if act == "relu":
        return z > 0  # subgradient 0 at z == 0
    if act == "tanh":
        return 1.0 - y * y
    return np.ones_like(z)


def forward(params: MlpParams, x) -> tuple[np.ndarray, ForwardCache]:
    x = np.asarray(x, dtype=float)
    squeeze = x.ndim == 1
    h = x[None, :] if squeeze else x
    if h.ndim != 2 or h.shape[1] != params.sizes[0]:
        raise ShapeError(f"input shape {x.shape} does not match {params.sizes[0]} inputs")
    cache = ForwardCache(squeeze=squeeze)
    for layer in params.layers:
        cache.inputs.append(h)
        z = h @ layer.w.T + layer.b
        h = _activate(z, layer.activation)
        cache.pre.append(z)
        cache.outputs.append(h)
    return (h[0] if squeeze else h), cache


def backward(params: MlpParams, cache: ForwardCache, grad_out, param_grads: bool = True,
             input_grad: bool = True) -> tuple[MlpParams | None, np.ndarray | None]:
    """Reverse-mode pass.

    ``grad_out`` is dLoss/dOutput with the output's shape. Gradients are summed
    over the batch. Returns ``(param_grads, dLoss/dInput)``; either part can be
    switched off (and comes back as ``None``) to save the matmuls.
    """
    g = np.asarray(grad_out, dtype=float)
    if cache.squeeze:
        g = g[None, :]
    if len(cache.pre) != len(params.layers) or g.shape != cache.outputs[-1].shape:
        raise ShapeError(f"gradient shape {np.shape(grad_out)} does not match the cached forward pass")
    grads: list = [None] * (2 * len(params.layers))
    for i in range(len(params.layers) - 1, -1, -1):
        layer = params.layers[i]
        if cache.inputs[i].shape[1] != layer.w.shape[1]:
            raise ShapeError("cache was produced by a different network")
        dz = g * _activation_grad(cache.pre[i], cache.outputs[i], layer.activation)
        if param_grads:
            grads[2 * i] = dz.T @ cache.inputs[i]
            grads[2 * i + 1] = dz.sum(axis=0)
        if i or input_grad:
            g = dz @ layer.w
    out_params = params.with_arrays(grads) if param_grads else None
    if not input_grad:
        return out_params, None
    return out_params, (g[0] if cache.squeeze else g)


def adam_step(params: MlpParams, grads: MlpParams, state: AdamState, lr: float):
    """One bias-corrected Adam descent step. Returns new ``(params, state)``."""
    if not lr > 0:
        raise DomainError(f"learning rate must be > 0, got {lr}")
    p_arr, g_arr = params.arrays(), grads.arrays()
    if [a.shape for a in p_arr] != [a.shape for a in g_arr] or \
            [a.shape for a in p_arr] != [a.shape for a in state.m]:
        raise ShapeError("params, grads and optimizer state have different shapes")
    t = state.step + 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    new_p, new_m, new_v = [], [], []
    for p, g, m, v in zip(p_arr, g_arr, state.m, state.v):
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        new_p.append(p - lr * (m / c1) / (np.sqrt(v / c2) + state.eps))
        new_m.append(m)
        new_v.append(v)
    return params.with_arrays(new_p), AdamState(new_m, new_v, t, b1, b2, state.eps)


def soft_update(target: MlpParams, online: MlpParams, tau: float) -> MlpParams:
    """Polyak averaging ``tau * online + (1 - tau) * target``."""
    if not 0.0 <= tau <= 1.0:
        raise DomainError(f"tau must lie in [0, 1], got {tau}")
    t_arr, o_arr = target.arrays(), online.arrays()
    if [a.shape for a in t_arr] != [a.shape for a in o_arr]:
        raise ShapeError("target and online networks have different shapes")
    if tau == 1.0:
        return online.copy()
    return target.with_arrays([tau * o + (1.0 - tau) * t for t, o in zip(t_arr, o_arr)])


# --- persistence --------------------------------------------------------------
#
# ``.npz`` archive: ``activations`` (str array) plus ``w{i}``/``b{i}`` float64
# arrays. Optional Adam moments are stored as ``m{j}``/``v{j}`` with
# ``adam_meta = [step, beta1, beta2, eps]``. float64 is written verbatim, so a
# round trip is bit-exact.


def params_to_dict(params: MlpParams, prefix: str = "") -> dict:
    out = {f"{prefix}activations": np.array(params.activations)}
    for i, layer in enumerate(params.layers):
        out[f"{prefix}w{i}"] = layer.w
        out[f"{prefix}b{i}"] = layer.b
    return out


def params_from_dict(data, prefix: str = "") -> MlpParams:
    acts = [str(a) for a in data[f"{prefix}activations"]]
    return MlpParams([
        Layer(np.array(data[f"{prefix}w{i}"]), np.array(data[f"{prefix}b{i}"]), act)
        for i, act in enumerate(acts)
    ])


def adam_to_dict(state: AdamState, prefix: str = "") -> dict:
    out = {f"{prefix}adam_meta": np.array([state.step, state.beta1, state.beta2, state.eps], dtype=float)}
    for j, (m, v) in enumerate(zip(state.m, state.v)):
        out[f"{prefix}m{j}"] = m
        out[f"{prefix}v{j}"] = v
    return out


def adam_from_dict(data, n_arrays: int, prefix: str = "") -> AdamState:
    step, b1, b2, eps = (float(x) for x in data[f"{prefix}adam_meta"])
    return AdamState(
        [np.array(data[f"{prefix}m{j}"]) for j in range(n_arrays)],
        [np.array(data[f"{prefix}v{j}"]) for j in range(n_arrays)],
        int(step), b1, b2, eps,
    )


def save_params(path, params: MlpParams, state: AdamState | None = None) -> None:
    data = params_to_dict(params)
    if state is not None:
        data.update(adam_to_dict(state))
    with open(Path(path), "wb") as fh:
        np.savez(fh, **data)


def load_params(path) -> tuple[MlpParams, AdamState | None]:
    with np.load(Path(path), allow_pickle=False) as data:
        params = params_from_dict(data)
        state = adam_from_dict(data, 2 * len(params.layers)) if "adam_meta" in data else None
    return params, state
