import json
import shutil
import subprocess
import sys

import pytest

from rainsim.cli import main


def run_cli(*argv):
    return main(list(argv))


def test_inspect_reports_scene(scene_dir, capsys):
    assert run_cli("inspect", "--scene", str(scene_dir)) == 0
    out = capsys.readouterr().out
    assert "grid: 48 x 48" in out
    assert "views:" in out
    assert "sun:" in out


def test_inspect_missing_scene_exits_2(tmp_path, capsys):
    assert run_cli("inspect", "--scene", str(tmp_path / "nope")) == 2
    assert "error:" in capsys.readouterr().err


def test_inspect_corrupt_pfm_names_offset(scene_dir, tmp_path, capsys):
    broken = tmp_path / "broken"
    shutil.copytree(scene_dir, broken)
    pfm = broken / "height.pfm"
    pfm.write_bytes(pfm.read_bytes()[:40])
    assert run_cli("inspect", "--scene", str(broken)) == 2
    err = capsys.readouterr().err
    assert "byte" in err


def test_usage_errors_exit_1(capsys):
    assert run_cli("render") == 1                      # missing required args
    assert run_cli("render", "--bogus") == 1
    assert run_cli() == 1                              # no subcommand
    capsys.readouterr()


def test_render_writes_frames_and_manifest(scene_dir, tmp_path, capsys):
    out = tmp_path / "seq"
    code = run_cli("render", "--scene", str(scene_dir), "--out", str(out),
                   "--frames", "3", "--seed", "11", "--width", "80", "--height", "60")
    assert code == 0
    assert "wrote 3 frames" in capsys.readouterr().out
    for idx in range(3):
        assert (out / f"frame_{idx:06d}.png").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert len(manifest["frames"]) == 3


def test_render_twice_is_byte_identical(scene_dir, tmp_path):
    args = ["--scene", str(scene_dir), "--frames", "2", "--seed", "5",
            "--width", "80", "--height", "60"]
    assert run_cli("render", *args, "--out", str(tmp_path / "a")) == 0
    assert run_cli("render", *args, "--out", str(tmp_path / "b")) == 0
    for idx in range(2):
        name = f"frame_{idx:06d}.png"
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_render_bad_override_exits_2(scene_dir, tmp_path, capsys):
    code = run_cli("render", "--scene", str(scene_dir), "--out", str(tmp_path / "x"),
                   "--set", "rain.spawn_rate=oops")
    assert code == 2
    assert "bad value" in capsys.readouterr().err
    code = run_cli("render", "--scene", str(scene_dir), "--out", str(tmp_path / "y"),
                   "--set", "nope=1")
    assert code == 2


def test_render_unknown_view_exits_2(scene_dir, tmp_path, capsys):
    code = run_cli("render", "--scene", str(scene_dir), "--out", str(tmp_path / "x"),
                   "--frames", "1", "--view", "nope")
    assert code == 2
    assert "unknown view" in capsys.readouterr().err


def test_render_unwritable_out_exits_3(scene_dir, tmp_path, capsys):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    code = run_cli("render", "--scene", str(scene_dir),
                   "--out", str(blocker / "sub"), "--frames", "1")
    assert code == 3
    capsys.readouterr()


def test_config_file_with_flag_precedence(scene_dir, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"frame_count": 1, "seed": 9,
                               "width": 80, "height": 60}))
    out = tmp_path / "seq"
    code = run_cli("render", "--scene", str(scene_dir), "--config", str(cfg),
                   "--out", str(out), "--frames", "2")
    assert code == 0
    capsys.readouterr()
    assert (out / "frame_000001.png").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["seed"] == 9          # file survives
    assert manifest["config"]["frame_count"] == 2   # flag wins


def test_simulate_snapshots(scene_dir, tmp_path, capsys):
    out = tmp_path / "sim"
    code = run_cli("simulate", "--scene", str(scene_dir), "--out", str(out),
                   "--frames", "5", "--every", "2", "--seed", "3")
    assert code == 0
    capsys.readouterr()
    for idx in (0, 2, 4):
        assert (out / f"eta_{idx:06d}.pfm").exists()
    assert not (out / "eta_000001.pfm").exists()
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["complete"] is True
    assert len(manifest["frames"]) == 5


def test_simulate_bad_every_exits_2(scene_dir, tmp_path, capsys):
    code = run_cli("simulate", "--scene", str(scene_dir),
                   "--out", str(tmp_path / "x"), "--every", "0")
    assert code == 2
    capsys.readouterr()


def test_console_script_runs(scene_dir):
    proc = subprocess.run(
        [sys.executable, "-m", "rainsim.cli", "inspect", "--scene", str(scene_dir)],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0
    assert "grid:" in proc.stdout
