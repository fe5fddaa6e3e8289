"""Architecture descriptions and parameter / FLOP accounting.

An architecture is an ordered list of layer dicts::

    {"type": "xconv", "n_in": 64, "n_out": 128, "degree": 16,
     "window": 3, "stride": 1, "padding": 1, "graph_seed": 3}

Types: ``xconv``, ``xlinear``, ``grouped`` (conv, needs ``groups``),
``dense`` (conv when ``window`` is given, otherwise fully connected),
``pool`` (max pooling), ``relu``. A linear layer that follows a 4-d
activation flattens it first. ``bias`` is only honoured on dense layers.

FLOPs count two per multiply-accumulate; pooling, ReLU and bias adds are not
counted.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import InvalidArchError

LAYER_TYPES = ("xconv", "xlinear", "grouped", "dense", "pool", "relu")


def is_conv(layer: dict) -> bool:
    t = layer["type"]
    return t in ("xconv", "grouped") or (t == "dense" and "window" in layer)


def is_linear(layer: dict) -> bool:
    t = layer["type"]
    return t == "xlinear" or (t == "dense" and "window" not in layer)


def layer_degree(layer: dict) -> int:
    t = layer["type"]
    if t in ("xconv", "xlinear"):
        return int(layer["degree"])
    if t == "grouped":
        return int(layer["n_in"]) // int(layer["groups"])
    return int(layer["n_in"])


def _req(layer: dict, key: str, idx: int):
    if key not in layer:
        raise InvalidArchError(f"layer {idx} ({layer.get('type')}) is missing '{key}'")
    val = layer[key]
    if not isinstance(val, int) or isinstance(val, bool) or val < 0:
        raise InvalidArchError(f"layer {idx}: '{key}' must be a non-negative integer")
    return val


def check_layer(layer: dict, idx: int = 0) -> None:
    if not isinstance(layer, dict) or "type" not in layer:
        raise InvalidArchError(f"layer {idx} is not a dict with a 'type'")
    t = layer["type"]
    if t not in LAYER_TYPES:
        raise InvalidArchError(f"layer {idx}: unknown type {t!r}")
    if t in ("pool", "relu"):
        return
    n_in, n_out = _req(layer, "n_in", idx), _req(layer, "n_out", idx)
    if n_in < 1 or n_out < 1:
        raise InvalidArchError(f"layer {idx}: n_in and n_out must be >= 1")
    if t in ("xconv", "xlinear"):
        d = _req(layer, "degree", idx)
        if not 1 <= d <= n_in:
            raise InvalidArchError(f"layer {idx}: degree {d} outside [1, {n_in}]")
    if t == "grouped":
        g = _req(layer, "groups", idx)
        if g < 1 or n_in % g or n_out % g:
            raise InvalidArchError(f"layer {idx}: groups={g} must divide {n_in} and {n_out}")
    if t in ("xconv", "grouped"):
        _req(layer, "window", idx)
    if is_conv(layer) and layer["window"] < 1:
        raise InvalidArchError(f"layer {idx}: window must be >= 1")


@dataclass(frozen=True)
class LayerCost:
    index: int
    type: str
    out_shape: tuple
    params: int
    dense_params: int
    macs: int


def conv_geometry(layer: dict) -> tuple[int, int, int]:
    c = int(layer["window"])
    stride = int(layer.get("stride", 1))
    padding = int(layer.get("padding", c // 2))
    return c, stride, padding


def pool_geometry(layer: dict) -> tuple[int, int]:
    w = int(layer.get("window", 2))
    return w, int(layer.get("stride", w))


def layer_costs(arch: Sequence[dict], input_shape: Optional[Sequence[int]] = None) -> list[LayerCost]:
    """Per-layer parameters and multiply-accumulates.

    ``input_shape`` is ``(C, H, W)`` or ``(features,)``; without it the MAC
    column is 0 for conv layers and shape chaining is only checked on
    channel counts.
    """
    if not arch:
        raise InvalidArchError("architecture is empty")
    shape = tuple(input_shape) if input_shape is not None else None
    channels = shape[0] if shape else None
    prev = "conv" if shape is not None and len(shape) == 3 else "linear"
    costs = []
    for i, layer in enumerate(arch):
        check_layer(layer, i)
        t = layer["type"]
        params = dense = macs = 0
        if t == "relu":
            pass
        elif t == "pool":
            if shape is not None:
                if len(shape) != 3:
                    raise InvalidArchError(f"layer {i}: pooling needs a 3-d activation")
                w, s = pool_geometry(layer)
                shape = (shape[0], (shape[1] - w) // s + 1, (shape[2] - w) // s + 1)
        else:
            n_in, n_out = layer["n_in"], layer["n_out"]
            d = layer_degree(layer)
            bias = n_out if (t == "dense" and layer.get("bias")) else 0
            if is_conv(layer):
                c, stride, padding = conv_geometry(layer)
                if channels is not None and channels != n_in:
                    raise InvalidArchError(f"layer {i}: expects {n_in} channels, receives {channels}")
                params = n_out * d * c * c + bias
                dense = n_out * n_in * c * c + bias
                if shape is not None:
                    if len(shape) != 3:
                        raise InvalidArchError(f"layer {i}: convolution needs a 3-d activation")
                    hh = (shape[1] + 2 * padding - c) // stride + 1
                    ww = (shape[2] + 2 * padding - c) // stride + 1
                    if hh < 1 or ww < 1:
                        raise InvalidArchError(f"layer {i}: spatial size collapses to {hh}x{ww}")
                    shape = (n_out, hh, ww)
                    macs = n_out * d * c * c * hh * ww
                channels, prev = n_out, "conv"
            else:
                feats = None
                if shape is not None:
                    feats = 1
                    for s in shape:
                        feats *= s
                elif channels is not None and prev == "linear":
                    feats = channels
                if feats is not None and feats != n_in:
                    raise InvalidArchError(f"layer {i}: expects {n_in} features, receives {feats}")
                params = n_out * d + bias
                dense = n_out * n_in + bias
                macs = n_out * d
                shape = (n_out,) if shape is not None else None
                channels, prev = n_out, "linear"
        costs.append(LayerCost(i, t, shape, params, dense, macs))
    return costs


def param_count(arch: Sequence[dict]) -> int:
    return sum(c.params for c in layer_costs(arch))


def dense_param_count(arch: Sequence[dict]) -> int:
    """Parameters of the same network with every graph made complete."""
    return sum(c.dense_params for c in layer_costs(arch))


def mac_count(arch: Sequence[dict], input_shape: Sequence[int]) -> int:
    return sum(c.macs for c in layer_costs(arch, input_shape))


def flop_count(arch: Sequence[dict], input_shape: Sequence[int]) -> int:
    return 2 * mac_count(arch, input_shape)


# ---------------------------------------------------------------- builders


def conv(kind: str, n_in: int, n_out: int, sparsity: Optional[int] = None, *,
         window: int = 3, graph_seed: int = 0, bias: bool = False) -> dict:
    """One 3x3 'same' conv layer; ``sparsity`` is the degree (xconv) or groups (grouped)."""
    layer = {"type": kind, "n_in": n_in, "n_out": n_out, "window": window,
             "stride": 1, "padding": window // 2}
    if kind == "xconv":
        layer["degree"] = sparsity
        layer["graph_seed"] = graph_seed
    elif kind == "grouped":
        layer["groups"] = sparsity
    elif bias:
        layer["bias"] = True
    return layer


_VGG16_CFG = [64, 64, "M", 128, 128, "M", 256, 256, 256, "M",
              512, 512, 512, "M", 512, 512, 512, "M"]


def vgg16(degrees: Optional[Sequence[Optional[int]]] = None, classifier_degree: Optional[int] = None,
          num_classes: int = 10) -> list[dict]:
    """VGG16 for 32x32 inputs with a 512-512-classes head (one hidden linear layer).

    ``degrees`` gives one entry per conv layer; ``None`` keeps the layer dense.
    """
    degrees = list(degrees) if degrees is not None else [None] * 13
    arch, n_in, k = [], 3, 0
    for item in _VGG16_CFG:
        if item == "M":
            arch.append({"type": "pool", "window": 2, "stride": 2})
            continue
        d = degrees[k]
        if d is None or d == n_in:
            arch.append(conv("dense", n_in, item, bias=True))
        else:
            arch.append(conv("xconv", n_in, item, d, graph_seed=k))
        arch.append({"type": "relu"})
        n_in, k = item, k + 1
    if classifier_degree is None:
        arch.append({"type": "dense", "n_in": 512, "n_out": 512, "bias": True})
    else:
        arch.append({"type": "xlinear", "n_in": 512, "n_out": 512,
                     "degree": classifier_degree, "graph_seed": 13})
    arch.append({"type": "relu"})
    arch.append({"type": "dense", "n_in": 512, "n_out": num_classes, "bias": True})
    return arch


# |V| x D filter shapes of the two compressed VGG16 variants, conv layers 1..13
XVGG16_DEGREES = {
    1: [None, None, None, 64, 32, 32, 32, 32, 32, 32, 32, 32, 32],
    2: [None, None, None, 64, 16, 16, 16, 16, 16, 16, 16, 16, 16],
}


def xvgg16(variant: int) -> list[dict]:
    return vgg16(XVGG16_DEGREES[variant], classifier_degree=128)


def desk_cnn(factor: int = 1, kind: str = "expander", graph_seed: int = 0,
             num_classes: int = 10, widths=(32, 64, 128, 128), in_channels: int = 3,
             spatial: int = 32) -> list[dict]:
    """Four 3x3 conv layers, two 2x2 max pools and a linear head.

    Every conv layer after the first is compressed by ``factor`` using
    expander graphs (``kind="expander"``) or groups (``kind="grouped"``);
    ``factor=1`` gives the same dense network for both kinds.
    """
    if kind not in ("expander", "grouped"):
        raise InvalidArchError(f"unknown connectivity kind {kind!r}")
    if factor < 1:
        raise InvalidArchError("factor must be >= 1")
    c1, c2, c3, c4 = widths
    arch = [conv("dense", in_channels, c1), {"type": "relu"}]
    for i, (n_in, n_out) in enumerate([(c1, c2), (c2, c3), (c3, c4)]):
        if factor == 1:
            arch.append(conv("dense", n_in, n_out))
        elif kind == "expander":
            if n_in % factor:
                raise InvalidArchError(f"factor {factor} does not divide {n_in} channels")
            arch.append(conv("xconv", n_in, n_out, n_in // factor, graph_seed=graph_seed * 100 + i))
        else:
            if n_in % factor or n_out % factor:
                raise InvalidArchError(f"factor {factor} does not divide {n_in}/{n_out} channels")
            arch.append(conv("grouped", n_in, n_out, factor))
        arch.append({"type": "relu"})
        if i in (0, 2):
            arch.append({"type": "pool", "window": 2, "stride": 2})
    arch.append({"type": "dense", "n_in": c4 * (spatial // 4) ** 2, "n_out": num_classes, "bias": True})
    return arch


BUILTIN_ARCHS = {
    "vgg16": lambda: vgg16(),
    "xvgg16_1": lambda: xvgg16(1),
    "xvgg16_2": lambda: xvgg16(2),
    "desk_cnn": lambda: desk_cnn(),
}


def load_arch(source) -> list[dict]:
    """Load an architecture from a JSON file, or by builtin name (``xvgg16_1``)."""
    path = Path(source)
    if path.is_file():
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InvalidArchError(f"{path}: not valid JSON ({exc})") from exc
    else:
        name = path.name.removesuffix(".json")
        if name not in BUILTIN_ARCHS:
            raise FileNotFoundError(f"no architecture file or builtin named {source!r}")
        data = BUILTIN_ARCHS[name]()
    if isinstance(data, dict):
        data = data.get("layers", data)
    if not isinstance(data, list):
        raise InvalidArchError("architecture JSON must be a list of layers")
    for i, layer in enumerate(data):
        check_layer(layer, i)
    return data


def save_arch(arch: Sequence[dict], path) -> None:
    Path(path).write_text(json.dumps(list(arch), indent=1) + "\n")
