import subprocess
import sys

import numpy as np
import pytest

from leaf_apcen import cli
from leaf_apcen import controller as ctl
from leaf_apcen import signal_io as sio
from leaf_apcen import training as tr


def run(capsys, *argv):
    code = cli.main(list(map(str, argv)))
    out, err = capsys.readouterr()
    return code, dict(line.split("=", 1) for line in out.splitlines() if "=" in line), err


@pytest.fixture
def weights(tmp_path):
    path = tmp_path / "w.apcw"
    ctl.save_weights(ctl.init_weights(seed=1), path)
    return path


def test_extract_binary(capsys, tone_wav, tmp_path):
    code, kv, err = run(capsys, "extract", "--input", tone_wav, "--out", tmp_path / "f.apcn")
    assert code == 0 and "resolved config" in err
    f = sio.load_features(tmp_path / "f.apcn")
    assert f.values.shape == (100, 40) and (kv["frames"], kv["channels"]) == ("100", "40")


def test_extract_csv(capsys, tone_wav, tmp_path):
    code, _, _ = run(capsys, "extract", "--input", tone_wav, "--out", tmp_path / "f.csv", "--format", "csv")
    lines = (tmp_path / "f.csv").read_text().strip().split("\n")
    assert code == 0 and len(lines) == 100 and all(len(line.split(",")) == 40 for line in lines)


def test_extract_directory(capsys, tone_wav, silence_wav, tmp_path):
    code, kv, _ = run(capsys, "extract", "--input", tone_wav.parent, "--out", tmp_path / "feats", "--variant", "energy")
    assert code == 0 and kv["files"] == "2"
    f = sio.load_features(tmp_path / "feats" / "tone.apcn")
    assert f.kind == sio.KIND_ENERGY


def test_extract_missing_checkpoint(capsys, tone_wav, tmp_path):
    code, _, err = run(capsys, "extract", "--input", tone_wav, "--out", tmp_path / "x", "--variant", "apcen")
    assert code == 2 and "--checkpoint" in err


def test_extract_with_controller_weights(capsys, tone_wav, weights, tmp_path):
    code, _, _ = run(capsys, "extract", "--input", tone_wav, "--out", tmp_path / "a.apcn", "--variant", "apcen",
                     "--checkpoint", weights)  # fmt: skip
    assert code == 0 and np.all(np.isfinite(sio.load_features(tmp_path / "a.apcn").values))


def test_extract_variant_mismatch(capsys, tone_wav, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    tr.save_model(tr.init_model(tr.TrainConfig(variant="pcen"), 8), ckpt)
    code, _, _ = run(capsys, "extract", "--input", tone_wav, "--out", tmp_path / "a", "--variant", "apcen",
                     "--checkpoint", ckpt)  # fmt: skip
    assert code == 2


def test_io_and_format_errors(capsys, tmp_path):
    assert run(capsys, "extract", "--input", tmp_path / "none.wav", "--out", tmp_path / "x")[0] == 3
    bad = tmp_path / "bad.wav"
    bad.write_bytes(b"junk")
    assert run(capsys, "extract", "--input", bad, "--out", tmp_path / "x")[0] == 4
    feat = tmp_path / "f.apcn"
    sio.save_features(np.zeros((2, 2)), feat)
    assert run(capsys, "inspect-gain", "--input", bad, "--checkpoint", feat, "--out", tmp_path / "g.csv")[0] == 4


def test_bad_arguments_exit_2(capsys):
    for argv in (["extract", "--bogus"], ["nosuch"], ["extract", "--variant", "mfcc"], ["train"]):
        with pytest.raises(SystemExit) as exc:
            cli.main(argv)
        assert exc.value.code == 2
    capsys.readouterr()


def test_help_lists_defaults(capsys):
    for name in cli.COMMANDS:
        with pytest.raises(SystemExit) as exc:
            cli.main([name, "--help"])
        assert exc.value.code == 0
        out = capsys.readouterr().out
        assert "--seed" in out and "--config" in out
    with pytest.raises(SystemExit):
        cli.main(["extract", "--help"])
    assert "(default: fixed)" in capsys.readouterr().out


def test_config_precedence(capsys, tone_wav, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# features\nvariant = energy\nformat = csv\nn-filters = 20\n")
    code, kv, err = run(capsys, "extract", "--config", cfg, "--input", tone_wav, "--out", tmp_path / "o",
                        "--n-filters", "10")  # fmt: skip
    assert code == 0 and kv["variant"] == "energy" and kv["channels"] == "10"
    assert "n_filters = 10" in err and "format = csv" in err
    assert len((tmp_path / "o").read_text().split("\n")[0].split(",")) == 10


def test_config_supplies_required_flags(capsys, tone_wav, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text(f"input = {tone_wav}\nout = {tmp_path / 'o.apcn'}\nseed = 4\n")
    code, _, err = run(capsys, "extract", "--config", cfg)
    assert code == 0 and "seed = 4" in err


def test_config_rejects_unknown_key(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("bogus = 1\n")
    with pytest.raises(SystemExit) as exc:
        cli.main(["info", "--config", str(cfg)])
    assert exc.value.code == 2


def test_inspect_gain_silence(capsys, silence_wav, weights, tmp_path):
    code, kv, _ = run(capsys, "inspect-gain", "--input", silence_wav, "--checkpoint", weights, "--out", tmp_path / "g.csv")
    assert code == 0
    assert not np.any(np.loadtxt(tmp_path / "g.csv", delimiter=","))
    traj = np.loadtxt(tmp_path / "g_trajectory.csv", delimiter=",", skiprows=1)
    assert traj.shape == (100 * 40, 4)
    assert np.all((traj[:, 2] > 0) & (traj[:, 2] < 1))
    assert np.all((traj[:, 3] >= 0.2) & (traj[:, 3] <= 1.0))
    assert kv["in_box"] == "true"


def test_inspect_gain_tone(capsys, tone_wav, weights, tmp_path):
    code, kv, _ = run(capsys, "inspect-gain", "--input", tone_wav, "--checkpoint", weights, "--out", tmp_path / "g.csv",
                      "--trajectory-out", tmp_path / "t.csv")  # fmt: skip
    G = np.loadtxt(tmp_path / "g.csv", delimiter=",")
    assert code == 0 and G.shape == (100, 40) and np.all(G > 0)
    assert (tmp_path / "t.csv").exists() and float(kv["final_gain_change"]) >= 0


def test_inspect_gain_needs_adaptive_model(capsys, tone_wav, tmp_path):
    ckpt = tmp_path / "m.ckpt"
    tr.save_model(tr.init_model(tr.TrainConfig(variant="fixed"), 8), ckpt)
    assert run(capsys, "inspect-gain", "--input", tone_wav, "--checkpoint", ckpt, "--out", tmp_path / "g.csv")[0] == 2


def test_gradcheck_pass_and_corrupt(capsys):
    code, kv, _ = run(capsys, "gradcheck", "--module", "simp")
    assert code == 0 and kv["failures"] == "0"
    code, kv, err = run(capsys, "gradcheck", "--module", "pcen", "--corrupt")
    assert code == 5 and int(kv["failures"]) > 0 and "coord=(" in err


def test_synth_augment_train_eval(capsys, tmp_path):
    code, kv, _ = run(capsys, "synth-task", "--out", tmp_path / "task", "--train-per-class", 2,
                      "--val-per-class", 1, "--test-per-class", 1, "--seed", 3)  # fmt: skip
    assert code == 0 and kv["clips"] == "32"
    manifest = kv["manifest"]
    code, kv, _ = run(capsys, "augment", "--manifest", manifest, "--out", tmp_path / "aug", "--seed", 3)
    assert code == 0 and all(kv[f"n_{c}"] == "8" for c in ("clean", "babble", "music", "loudness"))
    code, kv, err = run(capsys, "train", "--manifest", tmp_path / "aug" / "manifest.csv", "--variant", "simp_pcen",
                        "--epochs", 2, "--out", tmp_path / "run", "--n-filters", 8)  # fmt: skip
    assert code == 0 and "epoch 2/2" in err and (tmp_path / "run" / "best.ckpt").exists()
    code, kv, _ = run(capsys, "eval", "--checkpoint", tmp_path / "run" / "best.ckpt",
                      "--manifest", tmp_path / "aug" / "manifest.csv")  # fmt: skip
    assert code == 0 and kv["n_clips"] == "8" and 0.0 <= float(kv["accuracy"]) <= 1.0
    code, kv, _ = run(capsys, "info", "--file", tmp_path / "run" / "best.ckpt")
    assert kv["variant"] == "simp_pcen" and kv["n_filters"] == "8"


def test_synth_task_deterministic(capsys, tmp_path):
    for d in ("a", "b"):
        run(capsys, "synth-task", "--out", tmp_path / d, "--train-per-class", 1, "--val-per-class", 0,
            "--test-per-class", 0, "--seed", 5)  # fmt: skip
    for f in (tmp_path / "a").rglob("*.wav"):
        assert f.read_bytes() == (tmp_path / "b" / f.relative_to(tmp_path / "a")).read_bytes()


def test_info(capsys):
    code, kv, _ = run(capsys, "info")
    assert code == 0 and kv["controller_params"] == "9058" and kv["kernels"] in ("compiled", "python")


def test_console_script():
    out = subprocess.run([sys.executable, "-m", "leaf_apcen.cli", "info"], capture_output=True, text=True)
    assert out.returncode == 0 and "controller_params=9058" in out.stdout
