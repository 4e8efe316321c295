"""Command-line surface: every subcommand, exit codes, and file contracts."""
import filecmp
import json
import os

import numpy as np
import pytest

from voxsem import io as vio
from voxsem.cli import (DEFAULT_D_MAX, FULL_SCALE_DIMS, FULL_SCALE_VOXEL,
                        _encode_geometry, build_parser, main)
from voxsem.forge.cameras import camera_at
from voxsem.tsdf import TsdfMode

FORGE_ARGS = ["--seed", "11", "--scenes", "1", "--views-per-scene", "2",
              "--dims", "32x16x32", "--voxel-size", "0.15",
              "--width", "160", "--height", "120"]


@pytest.fixture(scope="module")
def dataset(tmp_path_factory):
    out = str(tmp_path_factory.mktemp("forged"))
    assert main(["forge", "--out", out] + FORGE_ARGS) == 0
    return out


@pytest.fixture(scope="module")
def trained(dataset, tmp_path_factory):
    out = tmp_path_factory.mktemp("trained")
    ckpt = str(out / "net.sscw")
    spec = str(out / "net.json")
    curve = str(out / "loss.csv")
    rc = main(["train", "--manifest", os.path.join(dataset, "manifest.json"),
               "--out", ckpt, "--netspec", spec, "--loss-curve", curve,
               "--seed", "3", "--iterations", "4",
               "--channel-multiplier", "0.25"])
    assert rc == 0
    return {"checkpoint": ckpt, "netspec": spec, "curve": curve}


class TestParsing:
    def test_no_command_fails(self):
        assert main([]) == 2

    def test_unknown_command_fails(self):
        assert main(["polish"]) == 2

    def test_help_exits_clean(self, capsys):
        assert main(["--help"]) == 0
        assert "forge" in capsys.readouterr().out

    def test_bad_dims_string(self, tmp_path, capsys):
        rc = main(["forge", "--out", str(tmp_path), "--seed", "1",
                   "--dims", "64x32"])
        assert rc == 2
        assert "64x32" in capsys.readouterr().err

    def test_parser_lists_all_subcommands(self):
        text = build_parser().format_help()
        for name in ("forge", "encode", "train", "infer", "eval", "export"):
            assert name in text


class TestForge:
    def test_manifest_references_existing_files(self, dataset):
        manifest = json.load(open(os.path.join(dataset, "manifest.json")))
        assert manifest["grid"]["dims"] == [32, 16, 32]
        assert len(manifest["views"]) == 2
        for view in manifest["views"]:
            for key in ("depth", "camera", "labels", "states", "tsdf"):
                assert os.path.exists(os.path.join(dataset, view[key]))
            assert view["report"]["criteria"]["depth_in_range"]["passed"]

    def test_rerun_is_byte_identical(self, dataset, tmp_path):
        again = str(tmp_path / "again")
        assert main(["forge", "--out", again] + FORGE_ARGS) == 0
        names = sorted(os.listdir(dataset))
        assert names == sorted(os.listdir(again))
        match, mismatch, errors = filecmp.cmpfiles(dataset, again, names,
                                                   shallow=False)
        assert mismatch == [] and errors == []

    def test_zero_scenes_succeeds(self, tmp_path):
        out = str(tmp_path / "empty")
        assert main(["forge", "--out", out, "--seed", "5", "--scenes", "0"]) == 0
        manifest = json.load(open(os.path.join(out, "manifest.json")))
        assert manifest["scenes"] == []
        assert manifest["views"] == []


class TestEncode:
    def test_bare_camera_defaults_to_full_scale(self, tmp_path):
        cam = camera_at((1.0, 1.4, 1.0), yaw=0.4, tilt=-0.1)
        path = tmp_path / "camera.json"
        vio.write_json(str(path), cam.to_json())
        args = build_parser().parse_args(
            ["encode", "--depth", "x", "--camera", str(path),
             "--out-prefix", "x"])
        camera, grid, room, d_max = _encode_geometry(args)
        assert tuple(grid.dims) == FULL_SCALE_DIMS == (240, 144, 240)
        assert grid.voxel_size == FULL_SCALE_VOXEL == 0.02
        assert d_max == DEFAULT_D_MAX == 0.24
        assert room is None
        np.testing.assert_allclose(camera.position, (1.0, 1.4, 1.0))

    def test_matches_pipeline_encoding(self, dataset, tmp_path):
        # Re-encoding a forged view from its own geometry file must
        # reproduce the pipeline's volumes byte for byte.
        prefix = str(tmp_path / "re")
        rc = main(["encode",
                   "--depth", os.path.join(dataset, "scene_000_view_00_depth.png"),
                   "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
                   "--out-prefix", prefix])
        assert rc == 0
        for suffix in ("tsdf", "states"):
            ours = open(f"{prefix}_{suffix}.voxb", "rb").read()
            theirs = open(os.path.join(
                dataset, f"scene_000_view_00_{suffix}.voxb"), "rb").read()
            assert ours == theirs

    def test_projective_unflipped_mode_tag(self, dataset, tmp_path):
        prefix = str(tmp_path / "proj")
        rc = main(["encode",
                   "--depth", os.path.join(dataset, "scene_000_view_00_depth.png"),
                   "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
                   "--out-prefix", prefix, "--mode", "projective", "--no-flip"])
        assert rc == 0
        _, payload, meta = vio.read_voxb(f"{prefix}_tsdf.voxb")
        assert payload == vio.PAYLOAD_SCALAR
        assert meta["mode"] == int(TsdfMode.PROJECTIVE)

    def test_corrupt_depth_names_file(self, dataset, tmp_path, capsys):
        bad = tmp_path / "garbage.png"
        bad.write_bytes(b"not a png at all")
        rc = main(["encode", "--depth", str(bad),
                   "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
                   "--out-prefix", str(tmp_path / "out")])
        assert rc == 2
        err = capsys.readouterr().err
        assert "garbage.png" in err
        assert "decode" in err


class TestTrain:
    def test_artifacts_written(self, trained):
        assert os.path.exists(trained["checkpoint"])
        spec = json.load(open(trained["netspec"]))
        assert spec["output_scale"] == [1, 4]
        lines = open(trained["curve"]).read().strip("\n").split("\n")
        assert lines[0] == "iteration,total,mean"
        assert len(lines) == 1 + 4

    def test_missing_manifest_is_io_error(self, tmp_path):
        rc = main(["train", "--manifest", str(tmp_path / "none.json"),
                   "--out", "x", "--netspec", "y", "--seed", "0"])
        assert rc == 3


class TestInfer:
    def test_writes_quarter_resolution_outputs(self, dataset, trained, tmp_path):
        pred = str(tmp_path / "pred.voxb")
        states = str(tmp_path / "states.voxb")
        probs = str(tmp_path / "probs.npy")
        rc = main(["infer",
                   "--depth", os.path.join(dataset, "scene_000_view_00_depth.png"),
                   "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
                   "--checkpoint", trained["checkpoint"],
                   "--netspec", trained["netspec"],
                   "--out", pred, "--states-out", states, "--probs-out", probs])
        assert rc == 0
        grid, payload, _ = vio.read_voxb(pred)
        assert payload == vio.PAYLOAD_LABEL
        assert tuple(grid.spec.dims) == (8, 4, 8)
        st, sp, _ = vio.read_voxb(states)
        assert sp == vio.PAYLOAD_STATE
        p = np.load(probs)
        assert p.shape == (12, 8, 4, 8)
        np.testing.assert_allclose(p.sum(axis=0), 1.0, atol=1e-5)

    def test_checkpoint_spec_mismatch_rejected(self, dataset, trained,
                                               tmp_path, capsys):
        spec = json.load(open(trained["netspec"]))
        for layer in spec["layers"]:
            if layer["name"] == "stem":
                layer["params"]["out_channels"] += 1
        bad = tmp_path / "bad_spec.json"
        bad.write_text(json.dumps(spec))
        rc = main(["infer",
                   "--depth", os.path.join(dataset, "scene_000_view_00_depth.png"),
                   "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
                   "--checkpoint", trained["checkpoint"],
                   "--netspec", str(bad), "--out", str(tmp_path / "p.voxb")])
        assert rc == 2
        assert "shape" in capsys.readouterr().err


@pytest.fixture(scope="module")
def prediction(dataset, trained, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("pred") / "pred.voxb")
    rc = main(["infer",
               "--depth", os.path.join(dataset, "scene_000_view_00_depth.png"),
               "--camera", os.path.join(dataset, "scene_000_view_00_camera.json"),
               "--checkpoint", trained["checkpoint"],
               "--netspec", trained["netspec"], "--out", out])
    assert rc == 0
    return out


class TestEval:
    @pytest.mark.parametrize("task,mask", [
        ("completion", "completion_occluded"),
        ("semantic", "semantic_full"),
        ("surface", "surface_only"),
    ])
    def test_tasks_write_reports(self, dataset, prediction, tmp_path,
                                 capsys, task, mask):
        report = str(tmp_path / f"{task}.json")
        rc = main(["eval", "--pred", prediction,
                   "--labels", os.path.join(dataset, "scene_000_view_00_labels.voxb"),
                   "--states", os.path.join(dataset, "scene_000_view_00_states.voxb"),
                   "--task", task, "--out", report])
        assert rc == 0
        assert "prec" in capsys.readouterr().out
        blob = json.load(open(report))
        assert blob["mask"] == mask
        assert 0.0 <= blob["completion"]["iou"] <= 1.0

    def test_dimension_mismatch_rejected(self, dataset, prediction, capsys):
        rc = main(["eval", "--pred", prediction,
                   "--labels", prediction,  # quarter-res labels: not 4x pred
                   "--states", os.path.join(dataset, "scene_000_view_00_states.voxb")])
        assert rc == 2


class TestExport:
    def test_labels_to_ply(self, dataset, tmp_path):
        out = str(tmp_path / "scene.ply")
        rc = main(["export",
                   "--grid", os.path.join(dataset, "scene_000_view_00_labels.voxb"),
                   "--out", out])
        assert rc == 0
        assert open(out, "rb").read(3) == b"ply"

    def test_tsdf_to_slices(self, dataset, tmp_path):
        out = str(tmp_path / "tsdf.png")
        rc = main(["export",
                   "--grid", os.path.join(dataset, "scene_000_view_00_tsdf.voxb"),
                   "--out", out, "--style", "slices"])
        assert rc == 0
        assert open(out, "rb").read(4) == b"\x89PNG"

    def test_missing_grid_is_io_error(self, tmp_path):
        rc = main(["export", "--grid", str(tmp_path / "none.voxb"),
                   "--out", str(tmp_path / "x.ply")])
        assert rc == 3
