"""Smoke tests for the Python bindings: thin checks that the main operations
are reachable and numerically sane end to end."""

import json
import math

import numpy as np
import pytest

import volrob


@pytest.fixture(scope="module")
def phantom():
    image, labels = volrob.generate_phantom(seed=7, shape=(16, 16, 16), num_classes=3)
    assert image.shape == (16, 16, 16)
    assert labels.shape == (16, 16, 16)
    return image, labels


@pytest.fixture(scope="module")
def model(phantom):
    image, labels = phantom
    m = volrob.build_model("conv-seg", 3, (16, 16, 16), seed=3)
    images, label_list = [], []
    for k in range(6):
        img, lab = volrob.generate_phantom(seed=100 + k, shape=(16, 16, 16), num_classes=3)
        images.append(img)
        label_list.append(lab)
    trained, losses = volrob.train_model(m, images, label_list, epochs=6, lr=0.05, seed=3)
    assert losses[-1] < losses[0]
    return trained


def test_phantom_is_deterministic():
    a = volrob.generate_phantom(seed=11, shape=(8, 8, 8))
    b = volrob.generate_phantom(seed=11, shape=(8, 8, 8))
    assert np.array_equal(a[0], b[0])
    assert np.array_equal(a[1], b[1])
    assert a[0].min() >= 0.0 and a[0].max() <= 1.0


def test_forward_and_prediction_shapes(model, phantom):
    image, labels = phantom
    logits = volrob.forward(model, image)
    assert logits.shape == (3, 16, 16, 16)
    probs = volrob.softmax_channels(logits)
    assert np.allclose(probs.sum(axis=0), 1.0, atol=1e-6)
    pred = volrob.predict_labels(model, image)
    assert pred.shape == image.shape


def test_gradient_matches_finite_difference(model, phantom):
    image, labels = phantom
    grad = volrob.input_gradient(model, image, labels, loss="soft-dice")
    h = 1e-4
    idx = (3, 5, 7)
    plus = image.copy()
    minus = image.copy()
    plus[idx] += h
    minus[idx] -= h
    fd = (
        volrob.loss_value(model, plus, labels, loss="soft-dice")
        - volrob.loss_value(model, minus, labels, loss="soft-dice")
    ) / (2 * h)
    scale = max(abs(fd), abs(grad[idx]), 1e-8)
    # float32 inputs limit the probe step accuracy; 1e-2 is ample for a smoke
    # check that the sign and magnitude agree.
    assert abs(fd - grad[idx]) / scale < 1e-2


def test_attacks_respect_budget(model, phantom):
    image, labels = phantom
    eps = 8 / 255
    for runner in (
        lambda: volrob.fgsm(model, image, labels, epsilon=eps),
        lambda: volrob.pgd(model, image, labels, epsilon=eps, steps=4),
        lambda: volrob.cospgd(model, image, labels, epsilon=eps, steps=4),
    ):
        out = runner()
        delta = np.abs(out["x_adv"].astype(np.float64) - image.astype(np.float64))
        assert delta.max() <= eps + 1e-6
        assert out["x_adv"].min() >= 0.0 and out["x_adv"].max() <= 1.0


def test_vafa_tables_stay_bounded(model, phantom):
    image, labels = phantom
    out = volrob.vafa(model, image, labels, q_max=20.0, patch=8, steps=3)
    for table in out["quant_tables"]:
        assert table.min() >= 1.0
        assert table.max() <= 20.0


def test_dct_round_trip():
    rng = np.random.default_rng(5)
    cube = rng.uniform(-1, 1, size=(8, 8, 8))
    coeffs = volrob.dct3(cube)
    back = volrob.idct3(coeffs)
    assert np.abs(back - cube).max() < 1e-6
    assert math.isclose((cube**2).sum(), (coeffs**2).sum(), rel_tol=1e-4)


def test_band_mask_counts():
    mask = volrob.make_band_mask((96, 96, 96), 0, 8)
    assert int(mask.sum()) == 512


def test_metrics(phantom):
    _, labels = phantom
    assert volrob.dsc(labels, labels, 1) == 1.0
    mask = (labels == 1).astype(np.uint8)
    value, flagged = volrob.hd95(mask, mask)
    assert value == 0.0 and not flagged


def test_sliding_window(model):
    big, _ = volrob.generate_phantom(seed=55, shape=(24, 16, 16), num_classes=3)
    logits = volrob.sliding_window_infer(model, big)
    assert logits.shape == (3, 24, 16, 16)


def test_nifti_round_trip(tmp_path, phantom):
    image, labels = phantom
    img_path = str(tmp_path / "x.nii")
    volrob.write_nifti_volume(image, img_path)
    back = volrob.read_nifti_volume(img_path, normalization="none")
    assert np.array_equal(back, image)


def test_whitebox_eval_via_config(tmp_path, model):
    model_path = str(tmp_path / "m.vrm")
    volrob.save_model(model, model_path)
    config = {
        "dataset": {"name": "phantoms", "phantom": {"count": 2, "shape": [16, 16, 16], "seed": 7}},
        "models": [{"id": "conv", "path": model_path}],
        "attacks": [
            {"name": "gn", "epsilon": "8/255"},
            {"name": "pgd", "epsilon": "8/255", "steps": 2},
        ],
        "seed": 1,
    }
    report = volrob.whitebox_eval(config, out_dir=str(tmp_path / "out"))
    assert report["kind"] == "whitebox"
    assert (tmp_path / "out" / "report.json").exists()
    on_disk = json.loads((tmp_path / "out" / "report.json").read_text())
    assert on_disk == report
    cells = {(c["attack"], c["target"]): c for c in report["cells"]}
    assert cells[("pgd", "conv")]["asr_d"] >= cells[("gn", "conv")]["asr_d"] - 1e-9


def test_cli_entry_point(tmp_path):
    rc = volrob.run_cli(["phantom", "--count", "1", "--shape", "8", "--out", str(tmp_path / "d")])
    assert rc == 0
    assert (tmp_path / "d" / "img_0000.nii").exists()
    assert volrob.run_cli(["no-such-command"]) == 2
