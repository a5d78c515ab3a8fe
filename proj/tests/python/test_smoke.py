import json

import numpy as np
import pytest

import helmfluid as hf


def smooth_periodic(rng, n=32):
    y, x = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    f = np.zeros((n, n))
    for _ in range(4):
        kx, ky = rng.integers(1, 4, size=2)
        f += rng.standard_normal() * np.sin(2 * np.pi * (kx * x + ky * y) / n + rng.uniform(0, 2 * np.pi))
    return f


def test_discrete_identities():
    rng = np.random.default_rng(0)
    phi = smooth_periodic(rng)
    a = smooth_periodic(rng)
    assert np.abs(hf.vorticity(hf.gradient(phi))).max() <= 1e-10
    assert np.abs(hf.divergence(hf.curl_of_scalar(a))).max() <= 1e-10
    assert hf.gradient(phi).shape == (2, 32, 32)


def test_hodge_round_trip():
    rng = np.random.default_rng(1)
    f = rng.standard_normal((2, 16, 16))
    curl_free, div_free, (mu, mv) = hf.hodge_decompose(f)
    rec = curl_free + div_free
    rec[0] += mu
    rec[1] += mv
    assert np.abs(rec - f).max() <= 1e-12
    assert abs(np.sum(curl_free * div_free)) <= 1e-8 * np.sum(f * f)


def test_metrics_hand_values():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    truth = np.array([[1.0, 2.0], [3.0, 6.0]])
    assert hf.mse(pred, truth) == pytest.approx(1.0, abs=1e-12)
    assert hf.relative_l2(pred, truth) == pytest.approx(2.0 / np.sqrt(50.0), abs=1e-12)
    ones = np.ones((2, 2))
    assert hf.relative_l2(pred, truth, ones) == hf.relative_l2(pred, truth)
    mask = np.array([[1, 1], [1, 0]])
    assert hf.relative_l2(pred, truth, mask) == 0.0


def test_shape_errors_raise():
    with pytest.raises(ValueError):
        hf.divergence(np.zeros((3, 8, 8)))
    with pytest.raises(ValueError):
        hf.relative_l2(np.zeros((4, 4)), np.zeros((5, 5)))


def test_generate_train_predict(tmp_path):
    data = tmp_path / "data"
    manifest = hf.generate_translate(data, 6, seed=2, size=16, frames=6, split=(4, 1, 1))
    assert len(manifest["sequences"]) == 6
    assert (data / "manifest.json").exists()

    config = {
        "model": {"scales": 2, "heads": 2, "channels": [8, 16], "radius": 1, "decoder_hidden": 8},
        "train": {"epochs": 1, "batch_size": 2, "input_len": 3, "pred_len": 2, "seed": 4},
    }
    result = hf.train(data, tmp_path / "run", config, workers=1)
    assert result["best_epoch"] == 1
    assert np.isfinite(result["best_val_rel_l2"])
    assert (tmp_path / "run" / "log.csv").read_text().startswith("epoch,step,train_loss,val_rel_l2,wall_time_s")

    metrics = hf.evaluate(tmp_path / "run" / "checkpoint", data, split="test", workers=1)
    assert metrics["model"]["sequences"] == 1
    assert "rel_l2" in metrics["persistence"]

    predictor = hf.Predictor(tmp_path / "run" / "checkpoint")
    assert predictor.config["train"]["input_len"] == 3
    seq = np.load(data / manifest["sequences"][5]["file"])
    out = predictor.predict(seq[:3], steps=4)
    assert out.shape == (4, 16, 16)
    assert np.all(np.isfinite(out))


def test_gradcheck_suite_passes():
    rows = hf.gradcheck(samples=4)
    assert rows
    failed = [r["name"] for r in rows if not r["passed"]]
    assert not failed, json.dumps(failed)
