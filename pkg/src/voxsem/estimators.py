"""Estimator-style front end over the functional pipeline.

TsdfEncoder is a stateless transformer turning (depth, camera, grid)
samples into network-ready volumes; SceneCompleter wraps training and
inference behind fit/predict/predict_proba with sklearn-compatible
parameter handling.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import ValidationError
from .camera import DepthMap, PinholeCamera
from .grid import Box, GridSpec
from .model import Completion, TrainConfig, TrainSample, build_sscnet, infer, train
from .tsdf import TsdfMode, accurate_tsdf, flip_tsdf, normalize_tsdf, projective_tsdf


def _check_sample(sample):
    """Samples are (depth, camera, grid_spec) or (depth, camera, grid_spec, room)."""
    if not isinstance(sample, (tuple, list)) or len(sample) not in (3, 4):
        raise ValidationError(
            "sample must be (depth, camera, grid_spec[, room_bounds])")
    depth, camera, spec = sample[0], sample[1], sample[2]
    room = sample[3] if len(sample) == 4 else None
    if not isinstance(depth, DepthMap):
        raise ValidationError("sample[0] must be a DepthMap")
    if not isinstance(camera, PinholeCamera):
        raise ValidationError("sample[1] must be a PinholeCamera")
    if not isinstance(spec, GridSpec):
        raise ValidationError("sample[2] must be a GridSpec")
    if room is not None and not isinstance(room, Box):
        raise ValidationError("sample[3] must be a Box")
    return depth, camera, spec, room


class TsdfEncoder(TransformerMixin, BaseEstimator):
    """Encode single-view depth into truncated signed distance volumes.

    Parameters
    ----------
    mode : "accurate" or "projective"
    d_max : truncation distance in meters
    flip : apply the sign(d) * (d_max - |d|) encoding
    normalize : scale outputs into [-1, 1]
    """

    def __init__(self, mode: str = "accurate", d_max: float = 0.24,
                 flip: bool = True, normalize: bool = True):
        self.mode = mode
        self.d_max = d_max
        self.flip = flip
        self.normalize = normalize

    def fit(self, X, y=None):
        if self.mode not in ("accurate", "projective"):
            raise ValidationError(f"mode must be accurate or projective, got {self.mode!r}")
        for sample in X:
            _check_sample(sample)
        return self

    def transform(self, X):
        """Returns a list of float32 (nx, ny, nz) arrays, one per sample."""
        if self.mode not in ("accurate", "projective"):
            raise ValidationError(f"mode must be accurate or projective, got {self.mode!r}")
        out = []
        for sample in X:
            depth, camera, spec, room = _check_sample(sample)
            if self.mode == "accurate":
                t = accurate_tsdf(depth, camera, spec, d_max=self.d_max,
                                  room_bounds=room)
            else:
                t = projective_tsdf(depth, camera, spec, d_max=self.d_max)
            if self.flip:
                t = flip_tsdf(t)
            if self.normalize:
                out.append(normalize_tsdf(t).data)
            else:
                out.append(t.data)
        return out


class SceneCompleter(BaseEstimator):
    """Train on encoded views; predict per-voxel labels for new views.

    fit(X) expects TrainSample entries (or (volume, labels, states)
    triples); predict(X) expects the same sample tuples TsdfEncoder eats.
    """

    def __init__(self, grid_dims=(64, 32, 64), channel_multiplier: float = 0.5,
                 num_classes: int = 12, d_max: float = 0.9,
                 iterations: int = 2000, lr: float = 0.01,
                 momentum: float = 0.9, accumulation: int = 4,
                 stop_mean_loss: float | None = None, seed: int = 0):
        self.grid_dims = grid_dims
        self.channel_multiplier = channel_multiplier
        self.num_classes = num_classes
        self.d_max = d_max
        self.iterations = iterations
        self.lr = lr
        self.momentum = momentum
        self.accumulation = accumulation
        self.stop_mean_loss = stop_mean_loss
        self.seed = seed

    def fit(self, X, y=None):
        samples = []
        for entry in X:
            if isinstance(entry, TrainSample):
                samples.append(entry)
            else:
                samples.append(TrainSample(*entry))
        spec = build_sscnet(self.grid_dims, self.channel_multiplier,
                            num_classes=self.num_classes)
        config = TrainConfig(iterations=self.iterations, lr=self.lr,
                             momentum=self.momentum, accumulation=self.accumulation,
                             seed=self.seed, stop_mean_loss=self.stop_mean_loss)
        result = train(samples, spec, config)
        self.network_spec_ = result.spec
        self.params_ = result.params
        self.loss_curve_ = result.loss_curve
        self.iterations_run_ = result.iterations_run
        return self

    def _completion(self, sample) -> Completion:
        depth, camera, spec, room = _check_sample(sample)
        if tuple(spec.dims) != tuple(self.grid_dims):
            raise ValidationError(
                f"grid dims {spec.dims} do not match estimator dims {self.grid_dims}")
        return infer(depth, camera, spec, self.network_spec_, self.params_,
                     d_max=self.d_max, room_bounds=room)

    def _check_fitted(self):
        if not hasattr(self, "params_"):
            raise ValidationError("SceneCompleter is not fitted")

    def predict(self, X):
        """Per-sample label grids at quarter resolution."""
        self._check_fitted()
        return [self._completion(s).labels for s in X]

    def predict_proba(self, X):
        """Per-sample (num_classes, dx, dy, dz) probability volumes."""
        self._check_fitted()
        return [self._completion(s).probabilities for s in X]
