"""X-Linear and X-Conv layers.

A layer is a bipartite graph plus one weight per edge (linear) or one
``c x c`` filter per edge (conv). Kernels are stored compressed: output
channel ``v`` owns a ``(c, c, D)`` block ``K_v`` whose last axis follows the
order of ``graph.neighbors[v]``.

Three conv execution paths share that storage:

* :func:`xconv_forward_fast` gathers the ``D`` input channels of each output
  and convolves them densely with ``K_v``;
* :func:`xconv_forward_sparse` scatters the kernels into a full
  ``n_out x n_in x c x c`` tensor with zeros off the graph and runs a plain
  shift-and-accumulate convolution (the correctness oracle);
* :func:`xconv_forward` / :func:`xconv_backward` use the same zero-filled
  tensor through im2col and a GEMM, which is what training uses.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NumericError, ShapeError, TooLargeError
from .graphs import BipartiteGraph, grouped_graph, make_rng

MAX_DENSE_KERNEL_ENTRIES = 10**8


@dataclass(frozen=True, eq=False)
class XLinearLayer:
    graph: BipartiteGraph
    weights: np.ndarray  # [n_out, D]

    def __post_init__(self):
        if self.weights.shape != (self.graph.n_out, self.graph.degree):
            raise ShapeError(
                f"weights shape {self.weights.shape} != {(self.graph.n_out, self.graph.degree)}"
            )

    @property
    def num_params(self) -> int:
        return self.weights.size


@dataclass(frozen=True, eq=False)
class XConvLayer:
    graph: BipartiteGraph
    kernels: np.ndarray  # [n_out, c, c, D]
    window: int
    stride: int = 1
    padding: Optional[int] = None

    def __post_init__(self):
        if self.padding is None:
            object.__setattr__(self, "padding", self.window // 2)
        g, c = self.graph, self.window
        if self.kernels.shape != (g.n_out, c, c, g.degree):
            raise ShapeError(f"kernels shape {self.kernels.shape} != {(g.n_out, c, c, g.degree)}")
        if self.stride < 1 or self.padding < 0:
            raise ShapeError("stride must be >= 1 and padding >= 0")

    @property
    def num_params(self) -> int:
        return self.kernels.size

    def output_hw(self, h: int, w: int) -> tuple[int, int]:
        return conv_output_hw(h, w, self.window, self.stride, self.padding)


def conv_output_hw(h, w, window, stride, padding) -> tuple[int, int]:
    hh = h + 2 * padding - window
    ww = w + 2 * padding - window
    if hh < 0 or ww < 0 or hh % stride or ww % stride:
        raise ShapeError(
            f"input {h}x{w} is incompatible with window={window}, stride={stride}, padding={padding}"
        )
    return hh // stride + 1, ww // stride + 1


def init_xlinear(graph: BipartiteGraph, seed: int = 0, dtype=np.float64) -> XLinearLayer:
    a = np.sqrt(6.0 / graph.degree)
    w = make_rng(seed).uniform(-a, a, size=(graph.n_out, graph.degree)).astype(dtype)
    return XLinearLayer(graph, w)


def init_xconv(
    graph: BipartiteGraph,
    window: int = 3,
    stride: int = 1,
    padding: Optional[int] = None,
    seed: int = 0,
    dtype=np.float64,
) -> XConvLayer:
    """Uniform init with variance ``2 / (D * c * c)``, the layer's true fan-in."""
    a = np.sqrt(6.0 / (graph.degree * window * window))
    shape = (graph.n_out, window, window, graph.degree)
    k = make_rng(seed).uniform(-a, a, size=shape).astype(dtype)
    return XConvLayer(graph, k, window, stride, padding)


def grouped_conv_layer(n_in, n_out, groups, window=3, stride=1, padding=None, seed=0, dtype=np.float64):
    return init_xconv(grouped_graph(n_in, n_out, groups), window, stride, padding, seed, dtype)


def _check_input(x: np.ndarray, ndim: int, channels: int, what: str) -> None:
    if x.ndim != ndim or x.shape[1] != channels:
        raise ShapeError(f"{what} expects {ndim}-d input with {channels} channels, got {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NumericError(f"{what} received non-finite input")


# ---------------------------------------------------------------- linear


def xlinear_forward(layer: XLinearLayer, x: np.ndarray) -> np.ndarray:
    """``out[b, v] = sum_i w[v, i] * x[b, N(v, i)]``."""
    _check_input(x, 2, layer.graph.n_in, "xlinear_forward")
    return np.einsum("bvd,vd->bv", x[:, layer.graph.neighbors], layer.weights)


def xlinear_backward(layer: XLinearLayer, x: np.ndarray, grad_out: np.ndarray):
    """Return ``(grad_x, grad_w)`` for upstream gradient ``grad_out``."""
    g = layer.graph
    _check_input(x, 2, g.n_in, "xlinear_backward")
    if grad_out.shape != (x.shape[0], g.n_out):
        raise ShapeError(f"grad_out shape {grad_out.shape} != {(x.shape[0], g.n_out)}")
    nb = g.neighbors
    grad_w = np.einsum("bv,bvd->vd", grad_out, x[:, nb])
    contrib = (grad_out[:, :, None] * layer.weights[None]).reshape(x.shape[0], -1)
    grad_x = np.zeros_like(x, dtype=np.result_type(x, grad_out))
    np.add.at(grad_x, (slice(None), nb.ravel()), contrib)
    return grad_x, grad_w


# ---------------------------------------------------------------- conv helpers


def im2col(x: np.ndarray, window: int, stride: int, padding: int) -> np.ndarray:
    """``[B, C, H, W] -> [B, C, c, c, H', W']`` patch view (copied)."""
    b, ch, h, w = x.shape
    oh, ow = conv_output_hw(h, w, window, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    cols = np.empty((b, ch, window, window, oh, ow), dtype=x.dtype)
    for dy in range(window):
        for dx in range(window):
            cols[:, :, dy, dx] = xp[:, :, dy:dy + stride * oh:stride, dx:dx + stride * ow:stride]
    return cols


def col2im(cols: np.ndarray, shape, window: int, stride: int, padding: int) -> np.ndarray:
    b, ch, h, w = shape
    oh, ow = cols.shape[-2:]
    xp = np.zeros((b, ch, h + 2 * padding, w + 2 * padding), dtype=cols.dtype)
    for dy in range(window):
        for dx in range(window):
            xp[:, :, dy:dy + stride * oh:stride, dx:dx + stride * ow:stride] += cols[:, :, dy, dx]
    return xp[:, :, padding:padding + h, padding:padding + w]


def dense_kernel(layer: XConvLayer) -> np.ndarray:
    """Zero-filled ``[n_out, n_in, c, c]`` kernel carrying the graph's filters."""
    g, c = layer.graph, layer.window
    entries = g.n_out * g.n_in * c * c
    if entries > MAX_DENSE_KERNEL_ENTRIES:
        raise TooLargeError(f"dense kernel would hold {entries} entries (> {MAX_DENSE_KERNEL_ENTRIES})")
    full = np.zeros((g.n_out, g.n_in, c, c), dtype=layer.kernels.dtype)
    rows = np.arange(g.n_out)[:, None]
    full[rows, g.neighbors] = layer.kernels.transpose(0, 3, 1, 2)
    return full


def _check_conv_input(layer: XConvLayer, x: np.ndarray, what: str) -> tuple[int, int]:
    _check_input(x, 4, layer.graph.n_in, what)
    return layer.output_hw(x.shape[2], x.shape[3])


# ---------------------------------------------------------------- conv paths


def xconv_forward_fast(layer: XConvLayer, x: np.ndarray) -> np.ndarray:
    """Gather-then-convolve: one dense ``D``-channel convolution per output channel."""
    oh, ow = _check_conv_input(layer, x, "xconv_forward_fast")
    g = layer.graph
    cols = im2col(x, layer.window, layer.stride, layer.padding)
    out = np.empty((x.shape[0], g.n_out, oh, ow), dtype=np.result_type(x, layer.kernels))
    for v in range(g.n_out):
        slab = cols[:, g.neighbors[v]]  # [B, D, c, c, H', W']
        out[:, v] = np.einsum("bdyxhw,yxd->bhw", slab, layer.kernels[v])
    return out


def xconv_forward_sparse(layer: XConvLayer, x: np.ndarray) -> np.ndarray:
    """Reference path: full zero-filled kernel, direct convolution."""
    oh, ow = _check_conv_input(layer, x, "xconv_forward_sparse")
    full = dense_kernel(layer)
    s, p, c = layer.stride, layer.padding, layer.window
    xp = np.pad(x, ((0, 0), (0, 0), (p, p), (p, p)))
    out = np.zeros((x.shape[0], layer.graph.n_out, oh, ow), dtype=np.result_type(x, full))
    for dy in range(c):
        for dx in range(c):
            patch = xp[:, :, dy:dy + s * oh:s, dx:dx + s * ow:s]
            out += np.einsum("oi,bihw->bohw", full[:, :, dy, dx], patch)
    return out


def xconv_forward(layer: XConvLayer, x: np.ndarray, cols: Optional[np.ndarray] = None) -> np.ndarray:
    """im2col + GEMM against the zero-filled kernel (training path)."""
    oh, ow = _check_conv_input(layer, x, "xconv_forward")
    if cols is None:
        cols = im2col(x, layer.window, layer.stride, layer.padding)
    b = x.shape[0]
    wmat = dense_kernel(layer).reshape(layer.graph.n_out, -1)
    flat = cols.reshape(b, wmat.shape[1], oh * ow)
    return np.matmul(wmat, flat).reshape(b, layer.graph.n_out, oh, ow)


def xconv_backward(
    layer: XConvLayer,
    x: np.ndarray,
    grad_out: np.ndarray,
    cols: Optional[np.ndarray] = None,
):
    """Return ``(grad_x, grad_kernels)``; ``grad_kernels`` matches ``layer.kernels``."""
    oh, ow = _check_conv_input(layer, x, "xconv_backward")
    g, c = layer.graph, layer.window
    b = x.shape[0]
    if grad_out.shape != (b, g.n_out, oh, ow):
        raise ShapeError(f"grad_out shape {grad_out.shape} != {(b, g.n_out, oh, ow)}")
    if cols is None:
        cols = im2col(x, c, layer.stride, layer.padding)
    flat = cols.reshape(b, g.n_in * c * c, oh * ow)
    gout = grad_out.reshape(b, g.n_out, oh * ow)
    # batched GEMM reads the transposed patches in place instead of copying them
    grad_full = np.matmul(gout, flat.transpose(0, 2, 1)).sum(axis=0).reshape(g.n_out, g.n_in, c, c)
    grad_k = grad_full[np.arange(g.n_out)[:, None], g.neighbors].transpose(0, 2, 3, 1)
    wmat = dense_kernel(layer).reshape(g.n_out, -1)
    grad_cols = np.matmul(wmat.T, gout).reshape(b, g.n_in, c, c, oh, ow)
    grad_x = col2im(grad_cols, x.shape, c, layer.stride, layer.padding)
    return grad_x, np.ascontiguousarray(grad_k)


def grouped_conv_forward(layer: XConvLayer, x: np.ndarray) -> np.ndarray:
    """Grouped convolution: the fast path on a block-diagonal graph."""
    if layer.graph.kind not in ("grouped", "dense"):
        raise ShapeError("grouped_conv_forward expects a layer built on grouped_graph")
    return xconv_forward_fast(layer, x)


def xlinear_as_conv(layer: XLinearLayer) -> XConvLayer:
    """The 1x1 X-Conv computing ``layer`` independently at every pixel."""
    k = layer.weights[:, None, None, :]
    return XConvLayer(layer.graph, k, 1, 1, 0)
