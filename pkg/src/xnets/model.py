"""Trainable networks assembled from an architecture list."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .arch import check_layer, conv_geometry, is_conv, layer_degree, pool_geometry
from .errors import ShapeError
from .graphs import BipartiteGraph, dense_graph, grouped_graph, random_expander
from .layers import (
    XConvLayer,
    XLinearLayer,
    im2col,
    init_xconv,
    init_xlinear,
    xconv_backward,
    xconv_forward,
    xlinear_backward,
    xlinear_forward,
)


def layer_graph(layer: dict) -> BipartiteGraph:
    t, n_in, n_out = layer["type"], layer["n_in"], layer["n_out"]
    if t in ("xconv", "xlinear"):
        return random_expander(n_in, n_out, layer["degree"], seed=layer.get("graph_seed", 0))
    if t == "grouped":
        return grouped_graph(n_in, n_out, layer["groups"])
    return dense_graph(n_in, n_out)


class Module:
    params: list
    grads: list
    decay: list  # per-param flag: apply weight decay

    def __init__(self):
        self.params, self.grads, self.decay = [], [], []

    def forward(self, x):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


class Conv(Module):
    def __init__(self, layer: XConvLayer, bias: bool = False):
        super().__init__()
        self.layer = layer
        self.params = [layer.kernels]
        self.decay = [True]
        if bias:
            self.params.append(np.zeros(layer.graph.n_out, dtype=layer.kernels.dtype))
            self.decay.append(False)
        self.grads = [np.zeros_like(p) for p in self.params]

    @property
    def graph(self) -> BipartiteGraph:
        return self.layer.graph

    def forward(self, x):
        self._x = x
        self._cols = im2col(x, self.layer.window, self.layer.stride, self.layer.padding)
        out = xconv_forward(self.layer, x, self._cols)
        if len(self.params) > 1:
            out += self.params[1][None, :, None, None]
        return out

    def backward(self, grad):
        grad_x, gk = xconv_backward(self.layer, self._x, grad, self._cols)
        self.grads[0] = gk
        if len(self.params) > 1:
            self.grads[1] = grad.sum(axis=(0, 2, 3))
        self._x = self._cols = None
        return grad_x


class Linear(Module):
    def __init__(self, layer: XLinearLayer, bias: bool = False):
        super().__init__()
        self.layer = layer
        self.dense = layer.graph.kind == "dense"
        self.params = [layer.weights]
        self.decay = [True]
        if bias:
            self.params.append(np.zeros(layer.graph.n_out, dtype=layer.weights.dtype))
            self.decay.append(False)
        self.grads = [np.zeros_like(p) for p in self.params]

    @property
    def graph(self) -> BipartiteGraph:
        return self.layer.graph

    def forward(self, x):
        self._shape = x.shape
        x = x.reshape(x.shape[0], -1)
        self._x = x
        # a complete graph keeps neighbours in input order, so a plain GEMM is exact
        out = x @ self.layer.weights.T if self.dense else xlinear_forward(self.layer, x)
        if len(self.params) > 1:
            out = out + self.params[1]
        return out

    def backward(self, grad):
        x = self._x
        if self.dense:
            self.grads[0] = grad.T @ x
            grad_x = grad @ self.layer.weights
        else:
            grad_x, self.grads[0] = xlinear_backward(self.layer, x, grad)
        if len(self.params) > 1:
            self.grads[1] = grad.sum(axis=0)
        self._x = None
        return grad_x.reshape(self._shape)


class ReLU(Module):
    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, grad):
        return grad * self._mask


class MaxPool(Module):
    def __init__(self, window: int = 2, stride: int = 2):
        super().__init__()
        if window != stride:
            raise ShapeError("only non-overlapping pooling (window == stride) is supported")
        self.k = window

    def forward(self, x):
        b, c, h, w = x.shape
        k = self.k
        if h % k or w % k:
            raise ShapeError(f"{h}x{w} activation is not divisible by pool window {k}")
        blocks = x.reshape(b, c, h // k, k, w // k, k)
        out = blocks.max(axis=(3, 5))
        # route the gradient to the first maximum of each window only
        hit = blocks == out[:, :, :, None, :, None]
        flat = hit.transpose(0, 1, 2, 4, 3, 5).reshape(b, c, h // k, w // k, k * k)
        first = np.zeros_like(flat)
        idx = flat.argmax(axis=-1)
        np.put_along_axis(first, idx[..., None], True, axis=-1)
        self._mask = first.reshape(b, c, h // k, w // k, k, k).transpose(0, 1, 2, 4, 3, 5)
        self._shape = x.shape
        return out

    def backward(self, grad):
        g = self._mask * grad[:, :, :, None, :, None]
        return g.reshape(self._shape)


class Network:
    """A feed-forward stack with manual backpropagation."""

    def __init__(self, modules: Sequence[Module], arch: Sequence[dict]):
        self.modules = list(modules)
        self.arch = list(arch)

    def forward(self, x):
        for m in self.modules:
            x = m.forward(x)
        return x

    def backward(self, grad):
        for m in reversed(self.modules):
            grad = m.backward(grad)
        return grad

    def parameters(self):
        for m in self.modules:
            for i in range(len(m.params)):
                yield m, i

    def state(self) -> list[np.ndarray]:
        return [m.params[i].copy() for m, i in self.parameters()]

    @property
    def graph_modules(self) -> list:
        return [m for m in self.modules if isinstance(m, (Conv, Linear))]


def build_network(arch: Sequence[dict], seed: int | np.random.SeedSequence = 0,
                  dtype=np.float64) -> Network:
    """Instantiate ``arch``; graphs come from each layer's ``graph_seed``,
    weights from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    modules = []
    param_layers = [layer for layer in arch if layer["type"] not in ("pool", "relu")]
    children = iter(ss.spawn(len(param_layers)))
    for i, layer in enumerate(arch):
        check_layer(layer, i)
        t = layer["type"]
        if t == "relu":
            modules.append(ReLU())
        elif t == "pool":
            modules.append(MaxPool(*pool_geometry(layer)))
        else:
            g = layer_graph(layer)
            assert g.degree == layer_degree(layer)
            init_seed = np.random.PCG64(next(children)).random_raw()
            bias = t == "dense" and bool(layer.get("bias"))
            if is_conv(layer):
                c, stride, padding = conv_geometry(layer)
                xl = init_xconv(g, c, stride, padding, seed=int(init_seed), dtype=dtype)
                modules.append(Conv(xl, bias))
            else:
                modules.append(Linear(init_xlinear(g, seed=int(init_seed), dtype=dtype), bias))
    return Network(modules, arch)


def conv_graph_chain(arch: Sequence[dict], skip_leading_dense: bool = True) -> list[BipartiteGraph]:
    """Channel graphs of consecutive conv layers, optionally from the first sparse one."""
    convs = [layer for layer in arch if layer["type"] not in ("pool", "relu") and is_conv(layer)]
    if skip_leading_dense:
        while convs and convs[0]["type"] == "dense":
            convs.pop(0)
    return [layer_graph(layer) for layer in convs]


def network_sensitivity(arch: Sequence[dict]) -> float:
    """Sensitivity fraction over the sparsified conv stack (1.0 when nothing is sparse)."""
    from .connectivity import sensitivity_map

    chain = conv_graph_chain(arch)
    if not chain:
        return 1.0
    return sensitivity_map(chain).fraction


def softmax_cross_entropy(logits: np.ndarray, labels: np.ndarray):
    """Mean loss and its gradient with respect to ``logits``."""
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    n = logits.shape[0]
    loss = -logp[np.arange(n), labels].mean()
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return float(loss), grad / n


def predict(net: Network, x: np.ndarray, batch_size: int = 256) -> np.ndarray:
    return np.concatenate([net.forward(x[i:i + batch_size]) for i in range(0, len(x), batch_size)])


def output_shape(arch: Sequence[dict], input_shape: Sequence[int]) -> Optional[tuple]:
    from .arch import layer_costs

    return layer_costs(arch, input_shape)[-1].out_shape
