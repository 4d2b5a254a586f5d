import csv

import numpy as np
import pytest

from causaltune import cten, ppm
from causaltune.cli import main
from causaltune.config import RunConfig
from causaltune.experiments import build_model

TINY = RunConfig(steps=2, n_train_scenes=4, n_eval_scenes=2, suite=("fog",))


@pytest.fixture
def cfg_file(tmp_path):
    path = tmp_path / "tiny.cfg"
    TINY.replace(outdir=str(tmp_path / "run")).save(path)
    return path


def _summary(outdir):
    lines = (outdir / "summary.txt").read_text().splitlines()
    return dict(line.split(" = ") for line in lines)


def test_decompose_constant_image(tmp_path):
    src = tmp_path / "c.cten"
    cten.save(src, {"f": np.full((8, 8, 3), 0.6)})
    out = tmp_path / "out"
    assert main(["decompose", "--input", str(src), "--outdir", str(out)]) == 0
    assert np.max(np.abs(cten.load(out / "causal.cten")["causal"])) <= 1e-9
    s = _summary(out)
    assert (s["r_low"], s["r_high"], s["mode"]) == ("0.2", "0.7", "bandpass")
    rows = list(csv.reader(open(out / "gain.csv")))
    assert rows[0] == ["u", "v", "gain"] and len(rows) == 65


@pytest.mark.parametrize("backend", ["dct", "fft", "haar"])
def test_decompose_identity_and_reconstruction(tmp_path, rng, backend):
    x = rng.normal(size=(6, 8, 2))
    src = tmp_path / "x.cten"
    cten.save(src, {"x": x})
    out = tmp_path / "ident"
    assert main(["decompose", "--input", str(src), "--mode", "identity", "--backend", backend,
                 "--outdir", str(out)]) == 0
    assert np.max(np.abs(cten.load(out / "causal.cten")["causal"] - x)) <= 1e-9
    out = tmp_path / "bp"
    assert main(["decompose", "--input", str(src), "--backend", backend, "--outdir", str(out)]) == 0
    total = cten.load(out / "causal.cten")["causal"] + cten.load(out / "noncausal.cten")["noncausal"]
    assert np.max(np.abs(total - x)) <= 1e-9
    assert float(_summary(out)["max_abs_reconstruction_error"]) <= 1e-9


def test_decompose_ppm_and_scene(tmp_path):
    img = np.random.default_rng(0).uniform(size=(16, 12, 3))
    ppm.write(tmp_path / "a.ppm", img)
    assert main(["decompose", "--input", str(tmp_path / "a.ppm"), "--outdir", str(tmp_path / "p")]) == 0
    assert cten.load(tmp_path / "p" / "causal.cten")["causal"].shape == (16, 12, 3)
    assert main(["decompose", "--scene", "4", "--corruption", "night", "--outdir", str(tmp_path / "s")]) == 0


def test_ppm_decoding():
    ascii_ppm = b"P3\n# comment\n2 1\n255\n255 0 0  0 0 255\n"
    img = ppm.decode(ascii_ppm)
    np.testing.assert_array_equal(img, [[[1, 0, 0], [0, 0, 1]]])
    gray = ppm.decode(b"P5 2 2 65535\n" + np.array([0, 65535, 0, 0], ">u2").tobytes())
    assert gray.shape == (2, 2, 3) and gray[0, 1, 2] == 1.0
    img = np.random.default_rng(1).uniform(size=(3, 5, 3))
    np.testing.assert_allclose(ppm.decode(ppm.encode(img)), img, atol=0.5 / 255 + 1e-12)


def test_decompose_errors(tmp_path, capsys):
    assert main(["decompose", "--input", str(tmp_path / "missing.ppm")]) == 4
    assert "missing.ppm" in capsys.readouterr().err
    (tmp_path / "bad.ppm").write_bytes(b"P9 garbage")
    assert main(["decompose", "--input", str(tmp_path / "bad.ppm")]) == 4
    (tmp_path / "bad.cten").write_bytes(b"CTEN\x01")
    assert main(["decompose", "--input", str(tmp_path / "bad.cten")]) == 4
    assert main(["decompose", "--scene", "0", "--rl", "0.7", "--rh", "0.2",
                 "--outdir", str(tmp_path / "o")]) == 2
    odd = tmp_path / "odd.cten"
    cten.save(odd, {"x": np.ones((5, 4, 1))})
    assert main(["decompose", "--input", str(odd), "--backend", "haar", "--outdir", str(tmp_path / "o")]) == 2
    with pytest.raises(SystemExit) as exc:
        main(["decompose", "--mode", "notch"])
    assert exc.value.code == 2


def test_train_eval_roundtrip(tmp_path, cfg_file):
    out = tmp_path / "run"
    assert main(["train", "--config", str(cfg_file)]) == 0
    assert (out / "loss.csv").read_text().splitlines()[0] == "step,loss"
    assert RunConfig.load(out / "config.txt").steps == 2
    assert main(["eval", "--config", str(cfg_file), "--checkpoint", str(out / "checkpoint.cten")]) == 0
    first = (out / "miou.csv").read_bytes(), (out / "iou.csv").read_bytes()
    assert main(["eval", "--config", str(cfg_file), "--checkpoint", str(out / "checkpoint.cten")]) == 0
    assert first == ((out / "miou.csv").read_bytes(), (out / "iou.csv").read_bytes())
    assert first[0].decode().splitlines()[0] == "domain,miou"


def test_train_zero_steps_is_initialization(tmp_path, cfg_file):
    out = tmp_path / "zero"
    assert main(["train", "--config", str(cfg_file), "--steps", "0", "--outdir", str(out)]) == 0
    ck = cten.load(out / "checkpoint.cten")
    init = build_model(TINY).trainable()
    assert set(ck) == set(init) and all(np.array_equal(ck[k], init[k]) for k in init)


def test_train_rejects_bad_config(tmp_path):
    path = tmp_path / "bad.cfg"
    path.write_text("steps = 3\nlearning_rate = 0.1\n")
    assert main(["train", "--config", str(path)]) == 2
    assert main(["train", "--config", str(tmp_path / "none.cfg")]) == 2


def test_eval_mismatched_checkpoint(tmp_path, cfg_file):
    ck = tmp_path / "ck.cten"
    cten.save(ck, {"head.w": np.zeros((32, 4))})
    assert main(["eval", "--config", str(cfg_file), "--checkpoint", str(ck)]) == 2


def test_sweep_cli(tmp_path, cfg_file, caplog):
    out = tmp_path / "sweep.csv"
    args = ["sweep", "--config", str(cfg_file), "--rl-grid", "0.1,0.2", "--rh-grid", "0.6,0.7", "--out", str(out)]
    assert main(args) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "rl,rh,avg_miou,clean,fog" and len(rows) == 5
    first = out.read_bytes()
    assert main(args) == 0
    assert out.read_bytes() == first
    assert main(["sweep", "--config", str(cfg_file), "--rl-grid", "0.7,0.1", "--rh-grid", "0.2",
                 "--out", str(out)]) == 0
    assert "skipping invalid cutoff pair R_L=0.7, R_H=0.2" in caplog.text
    assert len(out.read_text().splitlines()) == 2
    assert main(["sweep", "--config", str(cfg_file), "--rl-grid", "0.7", "--rh-grid", "0.2"]) == 2
    assert main(["sweep", "--config", str(cfg_file), "--rl-grid", "a,b", "--rh-grid", "0.2"]) == 2


def test_ablate_cli_subset(tmp_path, cfg_file):
    out = tmp_path / "ab.csv"
    assert main(["ablate", "--config", str(cfg_file), "--filter-modes", "remove_low,remove_high",
                 "--backends", "fft", "--out", str(out)]) == 0
    rows = out.read_text().splitlines()
    assert rows[0] == "mode,backend,avg_miou,clean,fog"
    assert [r.split(",")[:2] for r in rows[1:]] == [["remove_high", "fft"], ["remove_low", "fft"]]
    assert main(["ablate", "--config", str(cfg_file), "--backends", "dwt", "--out", str(out)]) == 2


def test_selftest_and_gradcheck(capsys):
    assert main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and "kernel backend" in out
    assert main(["gradcheck", "--coords", "60"]) == 0
    assert "max relative error" in capsys.readouterr().out


def test_gradcheck_breach_exits_3(capsys):
    # a huge step makes the central difference useless, which must be reported as a numeric failure
    assert main(["gradcheck", "--eps", "0.5", "--coords", "20"]) == 3


def test_scene_export_and_config(tmp_path, capsys):
    out = tmp_path / "scene.cten"
    assert main(["scene", "--seed", "2", "--corruption", "rain", "--out", str(out)]) == 0
    data = cten.load(out)
    assert data["image"].shape == (64, 64, 3) and data["labels"].shape == (64, 64)
    assert main(["scene", "--seed", "2", "--out", str(tmp_path / "scene.ppm")]) == 0
    assert ppm.read(tmp_path / "scene.ppm").shape == (64, 64, 3)
    capsys.readouterr()
    assert main(["config"]) == 0
    assert RunConfig.loads(capsys.readouterr().out) == RunConfig()
