"""Command-line interface.

Subcommands: forge (generate data), encode (depth to TSDF volumes), train,
infer, eval, export. Exit codes: 0 success, 2 bad arguments or invalid
inputs, 3 I/O failure. Set VOXSEM_THREADS to cap BLAS thread counts.
"""
from __future__ import annotations

import argparse
import os
import sys


def _cap_threads():
    n = os.environ.get("VOXSEM_THREADS")
    if not n:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "NUMEXPR_NUM_THREADS"):
        os.environ.setdefault(var, n)


def _add_forge(sub):
    p = sub.add_parser("forge", help="generate labeled scenes and views")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", required=True, type=int, help="generation seed")
    p.add_argument("--scenes", type=int, default=1)
    p.add_argument("--views-per-scene", type=int, default=5)
    p.add_argument("--dims", default="64x32x64", help="grid dims, e.g. 64x32x64")
    p.add_argument("--voxel-size", type=float, default=0.075)
    p.add_argument("--d-max", type=float, default=0.9)
    p.add_argument("--width", type=int, default=640)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--no-encode", action="store_true",
                   help="skip writing encoded TSDF volumes")


def _add_encode(sub):
    p = sub.add_parser("encode", help="encode one depth view into TSDF volumes")
    p.add_argument("--depth", required=True, help="16-bit depth PNG")
    p.add_argument("--camera", required=True,
                   help="view geometry JSON, or a bare camera JSON")
    p.add_argument("--out-prefix", required=True)
    p.add_argument("--mode", choices=("accurate", "projective"), default="accurate")
    p.add_argument("--no-flip", action="store_true")
    p.add_argument("--dims", default=None,
                   help="grid dims (default 240x144x240, or the camera file's)")
    p.add_argument("--voxel-size", type=float, default=None,
                   help="grid voxel size in meters (default 0.02)")
    p.add_argument("--origin", default=None,
                   help="grid origin as x,y,z meters (default: placed in front "
                        "of the camera)")
    p.add_argument("--d-max", type=float, default=None,
                   help="truncation distance (default 0.24, or the camera file's)")


def _add_train(sub):
    p = sub.add_parser("train", help="train a completion network on a manifest")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="checkpoint path (.sscw)")
    p.add_argument("--netspec", required=True, help="network spec JSON path")
    p.add_argument("--loss-curve", default=None, help="optional loss CSV path")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--lr", type=float, default=0.01)
    p.add_argument("--momentum", type=float, default=0.9)
    p.add_argument("--accumulation", type=int, default=4)
    p.add_argument("--channel-multiplier", type=float, default=0.5)
    p.add_argument("--num-classes", type=int, default=12)
    p.add_argument("--stop-mean-loss", type=float, default=None)


def _add_infer(sub):
    p = sub.add_parser("infer", help="complete one view with a trained network")
    p.add_argument("--depth", required=True)
    p.add_argument("--camera", required=True, help="view geometry JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--netspec", required=True)
    p.add_argument("--out", required=True, help="predicted label VOXB path")
    p.add_argument("--states-out", default=None,
                   help="optional output-resolution states VOXB")
    p.add_argument("--probs-out", default=None,
                   help="optional class-probability .npy path")


def _add_eval(sub):
    p = sub.add_parser("eval", help="score a prediction against ground truth")
    p.add_argument("--pred", required=True, help="predicted label VOXB")
    p.add_argument("--labels", required=True, help="ground-truth label VOXB")
    p.add_argument("--states", required=True, help="visibility state VOXB")
    p.add_argument("--task", choices=("completion", "semantic", "surface"),
                   default="semantic",
                   help="completion scores occluded voxels, semantic scores "
                        "surface+occluded, surface scores surface only")
    p.add_argument("--out", default=None, help="report JSON path")
    p.add_argument("--table", default=None, help="text table path")
    p.add_argument("--undefined-as-zero", action="store_true",
                   help="count classes absent from both sides as IoU 0")


def _add_export(sub):
    p = sub.add_parser("export", help="convert a VOXB grid for inspection")
    p.add_argument("--grid", required=True, help="input VOXB path")
    p.add_argument("--out", required=True)
    p.add_argument("--style", choices=("ply", "obj", "slices"), default="ply")
    p.add_argument("--limit", type=float, default=None,
                   help="scalar colormap magnitude for slice montages")


def _parse_dims(text: str):
    from ._validation import ValidationError

    parts = text.lower().split("x")
    if len(parts) != 3:
        raise ValidationError(f"dims must look like 64x32x64, got {text!r}")
    try:
        return tuple(int(p) for p in parts)
    except ValueError as exc:
        raise ValidationError(f"dims must be integers, got {text!r}") from exc


def _run_forge(args) -> int:
    from .pipeline import ForgeConfig, forge_dataset

    config = ForgeConfig(
        out_dir=args.out, seed=args.seed, scenes=args.scenes,
        views_per_scene=args.views_per_scene, dims=_parse_dims(args.dims),
        voxel_size=args.voxel_size, d_max=args.d_max,
        width=args.width, height=args.height, encode=not args.no_encode)
    manifest = forge_dataset(config)
    print(f"wrote {len(manifest['views'])} views over "
          f"{len(manifest['scenes'])} scenes to {args.out}")
    return 0


FULL_SCALE_DIMS = (240, 144, 240)
FULL_SCALE_VOXEL = 0.02
DEFAULT_D_MAX = 0.24


def _encode_geometry(args):
    """Resolve camera, grid, room, and d_max from the file plus flags.

    The camera file may be a full view-geometry document or a bare camera;
    explicit flags override either, and a bare camera falls back to the
    full-scale grid placed in front of the lens.
    """
    from . import io as vio
    from .camera import PinholeCamera
    from .grid import GridSpec
    from .pipeline import ViewGeometry, view_grid_spec

    doc = vio.read_json(args.camera)
    if "camera" in doc:
        geo = ViewGeometry.from_json(doc)
        camera, grid, room, d_max = geo.camera, geo.grid, geo.room, geo.d_max
    else:
        camera, grid, room, d_max = PinholeCamera.from_json(doc), None, None, None

    dims = _parse_dims(args.dims) if args.dims else None
    voxel = args.voxel_size
    if grid is None or dims is not None or voxel is not None or args.origin:
        dims = dims or (grid.dims if grid else FULL_SCALE_DIMS)
        voxel = voxel if voxel is not None else (
            grid.voxel_size if grid else FULL_SCALE_VOXEL)
        if args.origin:
            origin = tuple(float(p) for p in args.origin.split(","))
            if len(origin) != 3:
                from ._validation import ValidationError

                raise ValidationError(f"origin must be x,y,z, got {args.origin!r}")
            grid = GridSpec(origin, voxel, dims)
        else:
            floor = grid.origin[1] if grid else camera.position[1] - 1.5
            grid = view_grid_spec(camera, dims, voxel, floor_y=floor)
    if args.d_max is not None:
        d_max = args.d_max
    elif d_max is None:
        d_max = DEFAULT_D_MAX
    return camera, grid, room, d_max


def _run_encode(args) -> int:
    from . import io as vio
    from .tsdf import accurate_tsdf, flip_tsdf, projective_tsdf
    from .visibility import classify_voxels

    camera, grid, room, d_max = _encode_geometry(args)
    depth = vio.read_depth_png(args.depth)

    states = classify_voxels(depth, camera, grid, room_bounds=room)
    if args.mode == "accurate":
        tsdf = accurate_tsdf(depth, camera, grid, d_max=d_max, states=states)
    else:
        tsdf = projective_tsdf(depth, camera, grid, d_max=d_max)
    if not args.no_flip:
        tsdf = flip_tsdf(tsdf)

    vio.write_voxb(f"{args.out_prefix}_tsdf.voxb", tsdf.as_grid(),
                   vio.PAYLOAD_SCALAR, mode=int(tsdf.mode), d_max=tsdf.d_max)
    vio.write_voxb(f"{args.out_prefix}_states.voxb", states, vio.PAYLOAD_STATE)
    print(f"wrote {args.out_prefix}_tsdf.voxb and {args.out_prefix}_states.voxb")
    return 0


def _run_train(args) -> int:
    from . import io as vio
    from .model import TrainConfig, build_sscnet, train
    from .nn.checkpoint import write_checkpoint
    from .pipeline import load_training_samples

    samples, manifest = load_training_samples(args.manifest)
    dims = tuple(manifest["grid"]["dims"])
    spec = build_sscnet(dims, channel_multiplier=args.channel_multiplier,
                        num_classes=args.num_classes)
    config = TrainConfig(iterations=args.iterations, lr=args.lr,
                         momentum=args.momentum, accumulation=args.accumulation,
                         seed=args.seed, stop_mean_loss=args.stop_mean_loss)
    result = train(samples, spec, config)

    write_checkpoint(args.out, result.params)
    vio.write_json(args.netspec, spec.to_json())
    if args.loss_curve:
        lines = ["iteration,total,mean"]
        lines += [f"{i},{t:.8f},{m:.8f}" for i, t, m in result.loss_curve]
        vio.atomic_write_text(args.loss_curve, "\n".join(lines) + "\n")
    final = result.loss_curve[-1]
    print(f"trained {result.iterations_run} iterations "
          f"(stopped early: {result.stopped_early}); final mean loss {final[2]:.4f}")
    return 0


def _run_infer(args) -> int:
    import numpy as np

    from . import io as vio
    from .model import infer
    from .nn.checkpoint import read_checkpoint
    from .nn.graph import NetworkSpec
    from .pipeline import ViewGeometry

    geo = ViewGeometry.from_json(vio.read_json(args.camera))
    depth = vio.read_depth_png(args.depth)
    spec = NetworkSpec.from_json(vio.read_json(args.netspec))
    params = read_checkpoint(args.checkpoint)

    completion = infer(depth, geo.camera, geo.grid, spec, params,
                       d_max=geo.d_max, room_bounds=geo.room)
    vio.write_voxb(args.out, completion.labels, vio.PAYLOAD_LABEL)
    if args.states_out:
        vio.write_voxb(args.states_out, completion.states, vio.PAYLOAD_STATE)
    if args.probs_out:
        import io as _io

        buf = _io.BytesIO()
        np.save(buf, completion.probabilities.astype(np.float32))
        vio.atomic_write_bytes(args.probs_out, buf.getvalue())
    print(f"wrote {args.out}")
    return 0


def _run_eval(args) -> int:
    from . import io as vio
    from ._validation import ValidationError
    from .metrics import report_table, semantic_iou
    from .model import DOWNSAMPLE_FACTOR, downsample_labels

    pred, pp, _ = vio.read_voxb(args.pred)
    labels, lp, _ = vio.read_voxb(args.labels)
    states, sp, _ = vio.read_voxb(args.states)
    if pp != vio.PAYLOAD_LABEL:
        raise ValidationError(f"{args.pred}: expected a label volume")
    if lp != vio.PAYLOAD_LABEL or sp != vio.PAYLOAD_STATE:
        raise ValidationError("ground truth must be a label plus a state volume")

    f = DOWNSAMPLE_FACTOR
    if tuple(labels.spec.dims) == tuple(f * d for d in pred.spec.dims):
        labels, states = downsample_labels(labels, states)
    if tuple(labels.spec.dims) != tuple(pred.spec.dims):
        raise ValidationError(
            f"prediction dims {pred.spec.dims} do not match ground truth "
            f"{labels.spec.dims} (directly or by a factor of {f})")

    mask_kind = {"completion": "completion_occluded",
                 "semantic": "semantic_full",
                 "surface": "surface_only"}[args.task]
    report = semantic_iou(pred, labels, states, mask_kind=mask_kind,
                          undefined_as_zero=args.undefined_as_zero)
    text = report_table(report)
    print(text, end="")
    if args.out:
        vio.write_json(args.out, report.to_json())
    if args.table:
        vio.atomic_write_text(args.table, text)
    return 0


def _run_export(args) -> int:
    from . import io as vio
    from .export import write_export

    grid, _, _ = vio.read_voxb(args.grid)
    write_export(args.out, grid, args.style, limit=args.limit)
    print(f"wrote {args.out}")
    return 0


_RUNNERS = {
    "forge": _run_forge,
    "encode": _run_encode,
    "train": _run_train,
    "infer": _run_infer,
    "eval": _run_eval,
    "export": _run_export,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="voxsem",
        description="semantic scene completion from single depth views")
    sub = parser.add_subparsers(dest="command", required=True)
    for add in (_add_forge, _add_encode, _add_train, _add_infer, _add_eval,
                _add_export):
        add(sub)
    return parser


def main(argv=None) -> int:
    _cap_threads()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0

    from ._validation import ValidationError

    try:
        return _RUNNERS[args.command](args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
