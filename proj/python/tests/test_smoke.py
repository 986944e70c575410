import json
import math

import numpy as np
import pytest

import rhyme


def test_manifold_round_trip():
    rng = np.random.default_rng(0)
    for _ in range(200):
        v = rng.normal(size=rng.integers(1, 10))
        v *= 3.0 * rng.random() / np.linalg.norm(v)
        c = float(10 ** rng.uniform(-3, 1))
        x = rhyme.manifold.exp_map(v, c)
        assert math.sqrt(c) * np.linalg.norm(x) < 1.0
        np.testing.assert_allclose(rhyme.manifold.log_map(x, c), v, atol=1e-9)


def test_manifold_errors():
    with pytest.raises(ValueError):
        rhyme.manifold.log_map(np.array([2.0, 0.0]), 1.0)
    with pytest.raises(ValueError):
        rhyme.manifold.sphere_normalize(np.zeros(3))
    y = rhyme.manifold.stereographic_to_ball(np.array([1.0, 0.0]), 1.0)
    assert np.linalg.norm(y) == pytest.approx(0.999)


def test_eer_and_ece():
    eer, theta = rhyme.compute_eer([0.1, 0.2, 0.4, 0.3, 0.6, 0.9], [0, 0, 0, 1, 1, 1])
    assert eer == pytest.approx(100.0 / 3.0)
    assert 0.3 < theta < 0.4
    assert rhyme.expected_calibration_error([0.7] * 10, [1] * 7 + [0] * 3) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        rhyme.compute_eer([0.1, 0.2], [0, 0])


def test_embedding_round_trip(tmp_path):
    a = np.arange(12, dtype=np.float32).reshape(3, 4) / 7
    rhyme.write_embedding(tmp_path / "a.rhye", a)
    b = rhyme.read_embedding(tmp_path / "a.rhye")
    assert b.dtype == np.float32
    np.testing.assert_array_equal(a, b)
    raw = bytearray((tmp_path / "a.rhye").read_bytes())
    raw[0] ^= 0xFF
    (tmp_path / "bad.rhye").write_bytes(bytes(raw))
    with pytest.raises(rhyme.FormatError, match="offset 0"):
        rhyme.read_embedding(tmp_path / "bad.rhye")


def test_cli_pipeline(tmp_path):
    arch = tmp_path / "arch"
    code, out, _ = rhyme.run_cli(["gen-synth", "--out", str(arch), "--n-per-class", "20", "--frames", "10",
                                  "--dim", "6"])
    assert code == 0
    manifest = out.strip()
    ckpt = tmp_path / "m.rhym"
    code, _, err = rhyme.run_cli(["--quiet", "train", "--train-manifest", manifest, "--out", str(ckpt),
                                  "--epochs", "2", "--channels", "6", "--utt-dim", "4", "--ablation", "no_gating",
                                  "--no-timestamp"])
    assert code == 0, err
    report = tmp_path / "r.json"
    code, _, err = rhyme.run_cli(["--quiet", "eval", "--model", str(ckpt), "--manifest", manifest,
                                  "--report", str(report), "--by-generator"])
    assert code == 0, err
    r = json.loads(report.read_text())
    assert 0.0 <= r["eer_percent"] <= 100.0

    model = rhyme.Model.load(ckpt)
    assert model.ablation == "no_gating"
    assert rhyme.model_config(model)["fixed_alpha"] == 0.5
    emb = rhyme.read_embedding(arch / "emb" / sorted(p.name for p in (arch / "emb").iterdir())[0])
    t = model.trace(emb)
    assert t["alpha"] == 0.5
    assert t["score"] == pytest.approx(model.score(emb))
    with pytest.raises(ValueError):
        model.score(np.zeros((4, 5), dtype=np.float32))


def test_cli_exit_codes():
    assert rhyme.run_cli(["train", "--out", "x"])[0] == 1
    code, out, _ = rhyme.run_cli(["gradcheck", "--ablation", "full"])
    assert code == 0
    assert " rho " in out
