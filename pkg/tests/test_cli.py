import subprocess
import sys

import numpy as np
import pytest

from wavenhancer import cli
from wavenhancer.gradsuite import tiny_model_config
from wavenhancer.training import Checkpoint, init_model, save_checkpoint
from wavenhancer.training.data import read_png, write_png
from wavenhancer.training.synthetic import write_pairs


@pytest.fixture
def tiny_checkpoint(tmp_path):
    cfg = tiny_model_config()
    path = tmp_path / "id.wven"
    save_checkpoint(path, Checkpoint.from_training(0, cfg, init_model(cfg)))
    return path


def _write_config(tmp_path, steps=2, seed=0):
    write_pairs(tmp_path / "data", count=2, size=32)
    model = tiny_model_config().to_text().replace("seed = 11", f"seed = {seed}")
    text = f"input_dir = data/input\ntarget_dir = data/target\nmanifest = data/manifest.txt\nsteps = {steps}\ncrop = 32\ncheckpoint_every = 0\n" + model
    path = tmp_path / "run.cfg"
    path.write_text(text)
    return path


def test_missing_config_is_usage_error(capsys):
    assert cli.run(["train"]) == cli.EXIT_USAGE
    err = capsys.readouterr().err
    assert "usage:" in err and "--config" in err


def test_unknown_subcommand(capsys):
    assert cli.run(["frobnicate"]) == cli.EXIT_USAGE
    assert "usage:" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert cli.run(["--help"]) == cli.EXIT_OK
    assert "gradcheck" in capsys.readouterr().out


def test_gradcheck_subset(capsys):
    assert cli.run(["gradcheck", "--only", "relu", "dwt2"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "relu" in out and "ok" in out and "max relative error" in out


def test_gradcheck_unknown_name(capsys):
    assert cli.run(["gradcheck", "--only", "nope"]) == cli.EXIT_USAGE


def test_enhance_identity_checkpoint(tmp_path, tiny_checkpoint):
    img = np.random.default_rng(0).integers(0, 256, size=(1, 3, 30, 34)) / 255.0
    write_png(tmp_path / "in.png", img)
    assert cli.run(["enhance", "--checkpoint", str(tiny_checkpoint), "--input", str(tmp_path / "in.png"),
                    "--output", str(tmp_path / "out.png")]) == cli.EXIT_OK
    out = read_png(tmp_path / "out.png", np.float64)
    assert out.shape == img.shape
    assert np.abs(out - img).max() <= 1 / 255 + 1e-12


def test_enhance_missing_input_is_runtime_error(tmp_path, tiny_checkpoint, capsys):
    code = cli.run(["enhance", "--checkpoint", str(tiny_checkpoint), "--input", str(tmp_path / "none.png"),
                    "--output", str(tmp_path / "out.png")])
    assert code == cli.EXIT_RUNTIME
    assert "none.png" in capsys.readouterr().err
    assert not (tmp_path / "out.png").exists()


def test_enhance_failure_leaves_no_partial_output(tmp_path, tiny_checkpoint, monkeypatch):
    import wavenhancer.training.data as data

    write_png(tmp_path / "in.png", np.full((1, 3, 32, 32), 0.5))

    def broken(_image):
        raise OSError("simulated write failure")
    monkeypatch.setattr(data, "to_uint8", broken)
    code = cli.run(["enhance", "--checkpoint", str(tiny_checkpoint), "--input", str(tmp_path / "in.png"),
                    "--output", str(tmp_path / "out.png")])
    assert code == cli.EXIT_RUNTIME
    assert sorted(p.name for p in tmp_path.iterdir()) == ["id.wven", "in.png"]


def test_eval_writes_csv(tmp_path, tiny_checkpoint):
    write_pairs(tmp_path / "d", count=2, size=32)
    out = tmp_path / "m.csv"
    assert cli.run(["eval", "--checkpoint", str(tiny_checkpoint), "--input-dir", str(tmp_path / "d/input"),
                    "--target-dir", str(tmp_path / "d/target"), "--out", str(out)]) == cli.EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0] == "id,psnr_db,ssim,delta_e"
    assert [line.split(",")[0] for line in lines[1:]] == ["pair000", "pair001", "mean"]


def test_eval_config_mismatch_is_runtime_error(tmp_path, tiny_checkpoint, capsys):
    cfg = _write_config(tmp_path)
    code = cli.run(["eval", "--checkpoint", str(tiny_checkpoint), "--input-dir", str(tmp_path / "data/input"),
                    "--target-dir", str(tmp_path / "data/target"), "--out", str(tmp_path / "m.csv"),
                    "--config", str(cfg)])
    assert code == cli.EXIT_RUNTIME
    assert "seed" in capsys.readouterr().err


@pytest.mark.parametrize("config, env, flag, expected", [
    (1, {}, None, 1), (1, {"WAVEN_SEED": "5"}, None, 5), (1, {"WAVEN_SEED": "5"}, 9, 9), (1, {"WAVEN_SEED": " "}, None, 1),
])
def test_seed_precedence(config, env, flag, expected):
    assert cli.resolve_seed(config, flag, env) == expected


def test_bad_seed_env(tmp_path, monkeypatch):
    monkeypatch.setenv("WAVEN_SEED", "abc")
    assert cli.run(["train", "--config", str(_write_config(tmp_path))]) == cli.EXIT_USAGE


def test_train_uses_env_seed(tmp_path, monkeypatch, capsys):
    cfg = _write_config(tmp_path)
    monkeypatch.setenv("WAVEN_SEED", "3")
    assert cli.run(["train", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == cli.EXIT_OK
    assert "seed 3" in capsys.readouterr().out
    assert "seed = 3" in (tmp_path / "o" / "config.txt").read_text()
    assert cli.run(["train", "--config", str(cfg), "--out-dir", str(tmp_path / "o2"), "--seed", "4"]) == cli.EXIT_OK
    assert "seed 4" in capsys.readouterr().out


def test_train_missing_data_is_runtime_error(tmp_path):
    cfg = tmp_path / "x.cfg"
    cfg.write_text("input_dir = nowhere\ntarget_dir = nowhere\n")
    assert cli.run(["train", "--config", str(cfg), "--out-dir", str(tmp_path / "o")]) == cli.EXIT_RUNTIME


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wavenhancer", "gradcheck", "--list"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert "pipeline" in proc.stdout.split()
