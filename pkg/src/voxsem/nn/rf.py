"""Receptive-field analysis of a layer graph.

Analytic sizes follow the standard recurrence: rf grows by
(support - 1) * jump at each layer, where jump is the product of strides
below and conv support is dilation * (kernel - 1) + 1. ``influence_set``
instead composes exact index offsets backwards, so dilation holes are
respected and the result is the true set of input voxels that can affect
one output position.
"""
from __future__ import annotations

import numpy as np

from .._validation import ValidationError
from .graph import NetworkSpec, _conv_geometry


def _geometry(layer):
    """(support, stride, tap offsets) along one axis."""
    if layer.kind == "conv":
        k, s, dil, p = _conv_geometry(layer.params)
        return dil * (k - 1) + 1, s, [t * dil for t in range(k)], p
    if layer.kind == "pool_max":
        w = int(layer.params["window"])
        s = int(layer.params.get("stride", w))
        return w, s, list(range(w)), 0
    return 1, 1, [0], 0


def receptive_field(spec: NetworkSpec, voxel_size: float | None = None) -> dict:
    """Per-layer receptive field sizes (voxels, optionally meters) and jumps.

    Branches merging in add/concat take the widest incoming field; their
    strides must agree, which holds for any graph this package builds.
    """
    info = {}
    for layer in spec.layers:
        if layer.kind == "input":
            info[layer.name] = {"rf_voxels": 1, "jump": 1}
            continue
        sources = [info[s] for s in layer.inputs]
        jumps = {s["jump"] for s in sources}
        if len(jumps) != 1:
            raise ValidationError(
                f"layer {layer.name!r} merges branches with different strides")
        jump = jumps.pop()
        rf_in = max(s["rf_voxels"] for s in sources)
        support, stride, _, _ = _geometry(layer)
        entry = {"rf_voxels": rf_in + (support - 1) * jump, "jump": jump * stride}
        if voxel_size is not None:
            entry["rf_meters"] = entry["rf_voxels"] * float(voxel_size)
        info[layer.name] = entry
    if voxel_size is not None:
        info[spec.layers[0].name]["rf_meters"] = float(voxel_size)
    return info


def influence_set(spec: NetworkSpec, layer_name: str, out_index,
                  in_dims=None) -> set:
    """Exact input positions that can influence ``out_index`` of a layer.

    out_index is an (x, y, z) position in the named layer's spatial frame.
    Returns a set of integer (x, y, z) input-layer positions. Without
    ``in_dims`` the walk is purely geometric: entries may fall outside the
    actual input when padding is involved, so callers clip. With ``in_dims``
    every intermediate position is checked against its layer's real extent,
    dropping taps that land in padding, and the result is exact.
    """
    spec.layer(layer_name)
    dims = spec.spatial_dims(in_dims) if in_dims is not None else None
    # Walk backwards: map the set of positions at each layer to its inputs.
    targets = {layer_name: {tuple(int(v) for v in out_index)}}
    for layer in reversed(spec.layers):
        here = targets.pop(layer.name, None)
        if here is not None and dims is not None:
            extent = dims[layer.name]
            here = {p for p in here
                    if all(0 <= p[i] < extent[i] for i in range(3))}
        if here is None or layer.kind == "input":
            if here is not None:
                targets[layer.name] = here  # reached the input; keep it
            continue
        support, stride, taps, padding = _geometry(layer)
        expanded = set()
        for pos in here:
            for tx in taps:
                for ty in taps:
                    for tz in taps:
                        expanded.add((pos[0] * stride - padding + tx,
                                      pos[1] * stride - padding + ty,
                                      pos[2] * stride - padding + tz))
        for src in layer.inputs:
            targets.setdefault(src, set()).update(expanded)
    input_name = spec.layers[0].name
    return targets.get(input_name, set())
