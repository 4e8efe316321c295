"""Layer-graph description and executor.

A NetworkSpec is an ordered list of named layers forming a DAG: each layer
consumes earlier layers' outputs by name. Supported kinds: input, conv,
relu, pool_max, add, concat.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .._validation import ValidationError
from . import ops

LAYER_KINDS = ("input", "conv", "relu", "pool_max", "add", "concat")


@dataclass
class LayerSpec:
    name: str
    kind: str
    inputs: list = field(default_factory=list)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValidationError(f"unknown layer kind {self.kind!r}")

    def to_json(self) -> dict:
        return {"name": self.name, "kind": self.kind,
                "inputs": list(self.inputs), "params": dict(self.params)}

    @classmethod
    def from_json(cls, obj: dict) -> "LayerSpec":
        return cls(obj["name"], obj["kind"], list(obj["inputs"]), dict(obj["params"]))


def _conv_geometry(params: dict):
    return (int(params["kernel"]), int(params.get("stride", 1)),
            int(params.get("dilation", 1)), int(params.get("padding", 0)))


@dataclass
class NetworkSpec:
    """Ordered layer list plus the grid-to-output relationship.

    ``output_scale`` ties output spatial dims to the input grid: spatial
    dims shrink by exactly this factor through the graph.
    """

    layers: list
    in_channels: int = 1
    output_scale: Fraction = Fraction(1, 4)

    def __post_init__(self):
        self.in_channels = int(self.in_channels)
        if self.in_channels < 1:
            raise ValidationError("in_channels must be >= 1")
        if not isinstance(self.output_scale, Fraction):
            self.output_scale = Fraction(self.output_scale)
        if self.output_scale <= 0:
            raise ValidationError("output_scale must be positive")
        if not self.layers:
            raise ValidationError("network has no layers")
        if self.layers[0].kind != "input":
            raise ValidationError("first layer must be the input")
        seen = set()
        for layer in self.layers:
            if layer.name in seen:
                raise ValidationError(f"duplicate layer name {layer.name!r}")
            for src in layer.inputs:
                if src not in seen:
                    raise ValidationError(
                        f"layer {layer.name!r} consumes unknown input {src!r}")
            seen.add(layer.name)

    @property
    def output_layer(self) -> str:
        return self.layers[-1].name

    def layer(self, name: str) -> LayerSpec:
        for layer in self.layers:
            if layer.name == name:
                return layer
        raise ValidationError(f"no layer named {name!r}")

    def channels(self) -> dict:
        """Static per-layer channel counts."""
        ch = {}
        for layer in self.layers:
            if layer.kind == "input":
                ch[layer.name] = self.in_channels
            elif layer.kind == "conv":
                ch[layer.name] = int(layer.params["out_channels"])
            elif layer.kind == "concat":
                ch[layer.name] = sum(ch[s] for s in layer.inputs)
            elif layer.kind == "add":
                counts = {ch[s] for s in layer.inputs}
                if len(counts) != 1:
                    raise ValidationError(
                        f"add layer {layer.name!r} mixes channel counts {counts}")
                ch[layer.name] = counts.pop()
            else:
                ch[layer.name] = ch[layer.inputs[0]]
        return ch

    def spatial_dims(self, in_dims) -> dict:
        """Static per-layer spatial dims for a given input size."""
        dims = {}
        for layer in self.layers:
            if layer.kind == "input":
                dims[layer.name] = tuple(int(d) for d in in_dims)
            elif layer.kind == "conv":
                k, s, dil, p = _conv_geometry(layer.params)
                dims[layer.name] = ops.conv3d_output_dims(
                    dims[layer.inputs[0]], k, s, dil, p)
            elif layer.kind == "pool_max":
                w = int(layer.params["window"])
                s = int(layer.params.get("stride", w))
                src = dims[layer.inputs[0]]
                for d in src:
                    if d < w:
                        raise ValidationError(
                            f"pool {layer.name!r} window {w} exceeds dim {d}")
                dims[layer.name] = tuple((d - w) // s + 1 for d in src)
            else:
                shapes = {dims[s] for s in layer.inputs}
                if len(shapes) != 1:
                    raise ValidationError(
                        f"layer {layer.name!r} mixes spatial dims {shapes}")
                dims[layer.name] = shapes.pop()
        return dims

    def to_json(self) -> dict:
        return {"layers": [l.to_json() for l in self.layers],
                "in_channels": self.in_channels,
                "output_scale": [self.output_scale.numerator,
                                 self.output_scale.denominator]}

    @classmethod
    def from_json(cls, obj: dict) -> "NetworkSpec":
        num, den = obj["output_scale"]
        return cls([LayerSpec.from_json(l) for l in obj["layers"]],
                   in_channels=obj["in_channels"],
                   output_scale=Fraction(num, den))


def init_params(spec: NetworkSpec, rng: np.random.Generator,
                dtype=np.float32) -> dict:
    """He-style fan-in init: weights ~ N(0, 2 / fan_in), zero biases."""
    params = {}
    ch = spec.channels()
    for layer in spec.layers:
        if layer.kind != "conv":
            continue
        c_in = ch[layer.inputs[0]]
        c_out = int(layer.params["out_channels"])
        k = int(layer.params["kernel"])
        fan_in = c_in * k ** 3
        std = np.sqrt(2.0 / fan_in)
        params[layer.name] = {
            "weight": (rng.standard_normal((c_out, c_in, k, k, k)) * std).astype(dtype),
            "bias": np.zeros(c_out, dtype=dtype),
        }
    return params


class Network:
    """Executor binding a NetworkSpec to concrete parameters."""

    def __init__(self, spec: NetworkSpec, params: dict):
        self.spec = spec
        self.params = params
        ch = spec.channels()
        for layer in spec.layers:
            if layer.kind != "conv":
                continue
            if layer.name not in params:
                raise ValidationError(f"missing parameters for layer {layer.name!r}")
            w = params[layer.name]["weight"]
            want = (int(layer.params["out_channels"]), ch[layer.inputs[0]],
                    int(layer.params["kernel"]), int(layer.params["kernel"]),
                    int(layer.params["kernel"]))
            if tuple(w.shape) != want:
                raise ValidationError(
                    f"layer {layer.name!r}: weight shape {tuple(w.shape)} != {want}")

    def forward(self, x: np.ndarray, keep: bool = False):
        """Run the graph; returns the last activation, or all when ``keep``."""
        acts = {}
        for layer in self.spec.layers:
            if layer.kind == "input":
                if x.shape[1] != self.spec.in_channels:
                    raise ValidationError(
                        f"input has {x.shape[1]} channels, spec expects "
                        f"{self.spec.in_channels}")
                acts[layer.name] = x
            elif layer.kind == "conv":
                k, s, dil, p = _conv_geometry(layer.params)
                pr = self.params[layer.name]
                acts[layer.name] = ops.conv3d_forward(
                    acts[layer.inputs[0]], pr["weight"], pr["bias"],
                    stride=s, dilation=dil, padding=p)
            elif layer.kind == "relu":
                acts[layer.name] = ops.relu_forward(acts[layer.inputs[0]])
            elif layer.kind == "pool_max":
                w = int(layer.params["window"])
                s = int(layer.params.get("stride", w))
                out, argmax = ops.pool3d_max_forward(acts[layer.inputs[0]], w, s)
                acts[layer.name] = out
                acts[f"{layer.name}/argmax"] = argmax
            elif layer.kind == "add":
                a, b = (acts[s] for s in layer.inputs)
                acts[layer.name] = ops.add_forward(a, b)
            elif layer.kind == "concat":
                acts[layer.name] = ops.concat_forward(
                    [acts[s] for s in layer.inputs])
            if not np.all(np.isfinite(acts[layer.name])):
                raise ValidationError(
                    f"layer {layer.name!r} produced a non-finite activation")
        return acts if keep else acts[self.spec.output_layer]

    def backward(self, acts: dict, grad_out: np.ndarray):
        """Backprop from the output layer; returns (param_grads, grad_input)."""
        grads = {layer.name: None for layer in self.spec.layers}
        grads[self.spec.output_layer] = grad_out
        param_grads = {}

        def fan_in(name, g):
            grads[name] = g if grads[name] is None else grads[name] + g

        for layer in reversed(self.spec.layers):
            g = grads[layer.name]
            if g is None or layer.kind == "input":
                continue
            if layer.kind == "conv":
                k, s, dil, p = _conv_geometry(layer.params)
                pr = self.params[layer.name]
                gx, gw, gb = ops.conv3d_backward(
                    g, acts[layer.inputs[0]], pr["weight"],
                    stride=s, dilation=dil, padding=p)
                param_grads[layer.name] = {"weight": gw, "bias": gb}
                fan_in(layer.inputs[0], gx)
            elif layer.kind == "relu":
                fan_in(layer.inputs[0], ops.relu_backward(g, acts[layer.inputs[0]]))
            elif layer.kind == "pool_max":
                w = int(layer.params["window"])
                s = int(layer.params.get("stride", w))
                gx = ops.pool3d_max_backward(
                    g, acts[layer.inputs[0]], acts[f"{layer.name}/argmax"], w, s)
                fan_in(layer.inputs[0], gx)
            elif layer.kind == "add":
                ga, gb = ops.add_backward(g)
                fan_in(layer.inputs[0], ga)
                fan_in(layer.inputs[1], gb)
            elif layer.kind == "concat":
                ch = self.spec.channels()
                counts = [ch[s] for s in layer.inputs]
                for src, gs in zip(layer.inputs, ops.concat_backward(g, counts)):
                    fan_in(src, gs)
        return param_grads, grads[self.spec.layers[0].name]
