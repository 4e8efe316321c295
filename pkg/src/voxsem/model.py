"""Scene-completion network: graph assembly, supervision, training, inference.

The network eats a normalized flipped-TSDF volume and emits per-voxel class
scores at one quarter of the input resolution. The stack: a stride-2 conv,
two residual reduction blocks around a max pool (total reduction 4x), three
dilated residual context blocks, concatenation of the multi-scale features,
and a 1x1x1 classifier head.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import classes
from ._validation import ValidationError, check_positive
from .camera import DepthMap, PinholeCamera
from .grid import Box, GridSpec, VoxelGrid
from .nn.graph import LayerSpec, Network, NetworkSpec, init_params
from .nn.loss import weighted_softmax_loss
from .nn.optim import SgdOptimizer
from .rng import stream
from .tsdf import accurate_tsdf, flip_tsdf, normalize_tsdf
from .visibility import VoxelState, classify_voxels

DOWNSAMPLE_FACTOR = 4


def _ch(base: int, multiplier: float) -> int:
    return max(1, int(round(base * multiplier)))


def build_sscnet(grid_dims=(240, 144, 240), channel_multiplier: float = 1.0,
                 num_classes: int = classes.NUM_CLASSES,
                 in_channels: int = 1) -> NetworkSpec:
    """Build the completion graph for a given input grid size.

    Every grid dim must be divisible by 4 and large enough that no layer
    collapses below one voxel. ``channel_multiplier`` scales layer widths
    for small-scale runs.
    """
    dims = tuple(int(d) for d in grid_dims)
    if any(d % DOWNSAMPLE_FACTOR for d in dims):
        raise ValidationError(f"grid dims {dims} must be divisible by {DOWNSAMPLE_FACTOR}")
    if num_classes < 2:
        raise ValidationError(f"num_classes must be >= 2, got {num_classes}")
    m = float(channel_multiplier)
    if m <= 0:
        raise ValidationError(f"channel_multiplier must be positive, got {m}")

    c_stem, c_r1, c_r2, c_head = _ch(16, m), _ch(32, m), _ch(64, m), _ch(128, m)
    layers = [LayerSpec("in", "input")]

    def conv(name, src, out_ch, kernel, stride=1, dilation=1, padding=0):
        layers.append(LayerSpec(name, "conv", [src], {
            "out_channels": out_ch, "kernel": kernel, "stride": stride,
            "dilation": dilation, "padding": padding}))
        return name

    def relu(name, src):
        layers.append(LayerSpec(name, "relu", [src]))
        return name

    def residual(tag, src, out_ch, dilation=1):
        """conv-relu-conv with a skip; identity skip when channels match."""
        pad = dilation
        a = conv(f"{tag}a", src, out_ch, 3, padding=pad, dilation=dilation)
        ar = relu(f"{tag}a_relu", a)
        b = conv(f"{tag}b", ar, out_ch, 3, padding=pad, dilation=dilation)
        layers.append(LayerSpec(f"{tag}_sum", "add", [b, src]))
        return relu(f"{tag}_relu", f"{tag}_sum")

    def reduction(tag, src, out_ch):
        """Like residual, but the skip taps the first conv (channel change)."""
        a = conv(f"{tag}a", src, out_ch, 3, padding=1)
        ar = relu(f"{tag}a_relu", a)
        b = conv(f"{tag}b", ar, out_ch, 3, padding=1)
        layers.append(LayerSpec(f"{tag}_sum", "add", [b, ar]))
        return relu(f"{tag}_relu", f"{tag}_sum")

    x = conv("stem", "in", c_stem, 7, stride=2, padding=3)
    x = relu("stem_relu", x)
    x = reduction("red1", x, c_r1)
    layers.append(LayerSpec("pool", "pool_max", [x], {"window": 2, "stride": 2}))
    x = reduction("red2", "pool", c_r2)
    feats = [x]
    for i in (1, 2, 3):
        x = residual(f"ctx{i}", x, c_r2, dilation=2)
        feats.append(x)
    layers.append(LayerSpec("fuse", "concat", feats))
    h = conv("head1", "fuse", c_head, 1)
    h = relu("head1_relu", h)
    h = conv("head2", h, c_head, 1)
    h = relu("head2_relu", h)
    conv("score", "head2_relu", int(num_classes), 1)

    spec = NetworkSpec(layers, in_channels=in_channels,
                       output_scale=Fraction(1, DOWNSAMPLE_FACTOR))
    out_dims = spec.spatial_dims(dims)["score"]
    want = tuple(d // DOWNSAMPLE_FACTOR for d in dims)
    if out_dims != want:
        raise ValidationError(
            f"graph reduces {dims} to {out_dims}, expected {want}")
    return spec


def downsample_labels(labels: VoxelGrid, states: VoxelGrid,
                      factor: int = DOWNSAMPLE_FACTOR):
    """Reduce supervision grids to the network's output resolution.

    Each output voxel covers a factor^3 block. Labels take the block
    majority (ties break to the smallest label id). States: any occluded
    child makes the block occluded, else any surface child makes it
    surface, else the majority state.
    """
    if labels.spec != states.spec:
        raise ValidationError("labels and states grids disagree")
    factor = int(factor)
    spec_out = labels.spec.downsampled(factor)
    nx, ny, nz = spec_out.dims

    def blocks(grid):
        d = grid.data
        return (d.reshape(nx, factor, ny, factor, nz, factor)
                 .transpose(0, 2, 4, 1, 3, 5)
                 .reshape(nx * ny * nz, factor ** 3))

    lab = blocks(labels)
    counts = np.zeros((lab.shape[0], classes.NUM_CLASSES), dtype=np.int32)
    rows = np.arange(lab.shape[0])[:, None]
    np.add.at(counts, (rows, lab.astype(np.int64)), 1)
    lab_out = counts.argmax(axis=1).astype(np.uint8)  # argmax takes smallest on ties

    st = blocks(states)
    n_states = len(VoxelState)
    st_counts = np.zeros((st.shape[0], n_states), dtype=np.int32)
    np.add.at(st_counts, (rows, st.astype(np.int64)), 1)
    st_out = st_counts.argmax(axis=1).astype(np.uint8)
    has_surface = st_counts[:, VoxelState.SURFACE] > 0
    has_occluded = st_counts[:, VoxelState.OCCLUDED] > 0
    st_out[has_surface] = VoxelState.SURFACE
    st_out[has_occluded] = VoxelState.OCCLUDED

    shape = (nx, ny, nz)
    return (VoxelGrid(spec_out, lab_out.reshape(shape)),
            VoxelGrid(spec_out, st_out.reshape(shape)))


def balance_sample(labels: VoxelGrid, states: VoxelGrid, seed: int,
                   ratio: int = 2) -> VoxelGrid:
    """Training weight mask: all trusted occupied voxels plus a sampled
    subset of occluded-empty ones.

    Occupied voxels (label != 0) in Surface or Occluded space get weight 1
    (count N). Exactly min(ratio * N, available) occluded-empty voxels are
    drawn uniformly without replacement. Everything else, including all
    observed-free, outside-view, and outside-room voxels, stays at 0.
    """
    if labels.spec != states.spec:
        raise ValidationError("labels and states grids disagree")
    lab = labels.data
    st = states.data
    trusted = (st == VoxelState.SURFACE) | (st == VoxelState.OCCLUDED)
    occupied = (lab != 0) & trusted
    n_occ = int(occupied.sum())

    weights = np.zeros(labels.spec.dims, dtype=np.uint8)
    if n_occ == 0:
        warnings.warn("balance_sample: no occupied voxels; weight mask is empty")
        return VoxelGrid(labels.spec, weights)
    weights[occupied] = 1

    empty_occluded = (lab == 0) & (st == VoxelState.OCCLUDED)
    pool = np.flatnonzero(empty_occluded.reshape(-1))
    take = min(ratio * n_occ, pool.size)
    if take:
        rng = stream(seed, "balance")
        chosen = rng.choice(pool, size=take, replace=False)
        weights.reshape(-1)[chosen] = 1
    return VoxelGrid(labels.spec, weights)


@dataclass
class TrainConfig:
    iterations: int = 2000
    lr: float = 0.01
    momentum: float = 0.9
    accumulation: int = 4
    seed: int = 0
    stop_mean_loss: float | None = None
    log_every: int = 25

    def __post_init__(self):
        if int(self.iterations) < 1:
            raise ValidationError("iterations must be >= 1")
        check_positive(self.lr, "lr")


@dataclass
class TrainSample:
    """One training view: normalized network input plus supervision grids."""

    volume: VoxelGrid
    labels: VoxelGrid
    states: VoxelGrid

    def __post_init__(self):
        if self.volume.spec != self.labels.spec or self.volume.spec != self.states.spec:
            raise ValidationError("sample grids have mismatched specs")


@dataclass
class TrainResult:
    params: dict
    spec: NetworkSpec
    loss_curve: list = field(default_factory=list)
    iterations_run: int = 0
    stopped_early: bool = False


def train(samples, spec: NetworkSpec, config: TrainConfig) -> TrainResult:
    """Train on a list of TrainSample with one view per step.

    Supervision is downsampled once per sample; the balancing mask is
    redrawn on every visit. The loss curve records (iteration, total,
    mean) per step; early stop triggers when the running mean loss over
    the last ``log_every`` steps drops below ``stop_mean_loss``.
    """
    samples = list(samples)
    if not samples:
        raise ValidationError("no training samples")
    dims = samples[0].volume.spec.dims
    for s in samples:
        if s.volume.spec.dims != dims:
            raise ValidationError(
                f"sample dims {s.volume.spec.dims} differ from {dims}")
    out_dims = spec.spatial_dims(dims)[spec.output_layer]

    prepared = []
    for s in samples:
        lab, st = downsample_labels(s.labels, s.states)
        if lab.spec.dims != out_dims:
            raise ValidationError(
                f"downsampled supervision {lab.spec.dims} does not match "
                f"network output {out_dims}")
        x = s.volume.data.astype(np.float32)[None, None]
        prepared.append((x, lab, st))

    rng = stream(config.seed, "train")
    params = init_params(spec, rng)
    # The classifier head starts at the uniform distribution: zero weights
    # make the first steps follow supervision instead of init noise.
    if spec.layer(spec.output_layer).kind == "conv":
        params[spec.output_layer]["weight"][:] = 0.0
    net = Network(spec, params)
    opt = SgdOptimizer(config.lr, config.momentum, config.accumulation)

    curve = []
    recent = []
    stopped = False
    order = []
    for it in range(int(config.iterations)):
        if not order:
            order = list(rng.permutation(len(prepared)))
        x, lab, st = prepared[order.pop(0)]
        weights = balance_sample(lab, st, seed=int(rng.integers(0, 2 ** 31)))

        acts = net.forward(x, keep=True)
        logits = acts[spec.output_layer]
        loss = weighted_softmax_loss(
            logits, lab.data.astype(np.int64)[None], weights.data[None])
        # Backprop the mean-loss gradient: step sizes must not scale with
        # how many voxels the balancing mask happened to keep.
        scale = 1.0 / max(1, loss.weighted_count)
        grads, _ = net.backward(acts, (loss.grad * scale).astype(np.float32))
        opt.step(params, grads)

        curve.append((it, loss.total, loss.mean))
        recent.append(loss.mean)
        if len(recent) > config.log_every:
            recent.pop(0)
        if (config.stop_mean_loss is not None
                and len(recent) == config.log_every
                and float(np.mean(recent)) < config.stop_mean_loss):
            stopped = True
            break

    return TrainResult(params=params, spec=spec, loss_curve=curve,
                       iterations_run=len(curve), stopped_early=stopped)


@dataclass
class Completion:
    """Inference output: per-voxel labels and class probabilities at 1/4 scale."""

    labels: VoxelGrid
    probabilities: np.ndarray
    states: VoxelGrid


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def infer(depth: DepthMap, camera: PinholeCamera, grid_spec: GridSpec,
          spec: NetworkSpec, params: dict, d_max: float,
          room_bounds: Box | None = None) -> Completion:
    """Run the full single-view pipeline: encode, forward, argmax.

    Returns labels on the downsampled grid plus the (c, d, h, w)
    probability volume and the downsampled visibility states.
    """
    if room_bounds is None:
        room_bounds = grid_spec.bounds()
    states = classify_voxels(depth, camera, grid_spec, room_bounds=room_bounds)
    tsdf = accurate_tsdf(depth, camera, grid_spec, d_max=d_max, states=states)
    volume = normalize_tsdf(flip_tsdf(tsdf))

    net = Network(spec, params)
    x = volume.data.astype(np.float32)[None, None]
    logits = net.forward(x)
    probs = _softmax(logits.astype(np.float64))[0]
    pred = probs.argmax(axis=0).astype(np.uint8)

    spec_out = grid_spec.downsampled(DOWNSAMPLE_FACTOR)
    if tuple(pred.shape) != tuple(spec_out.dims):
        raise ValidationError(
            f"network output {pred.shape} does not match grid {spec_out.dims}")
    # States at output resolution reuse the label-downsampling state rule.
    dummy = VoxelGrid(grid_spec, np.zeros(grid_spec.dims, dtype=np.uint8))
    _, st_out = downsample_labels(dummy, states)
    return Completion(labels=VoxelGrid(spec_out, pred),
                      probabilities=probs, states=st_out)
