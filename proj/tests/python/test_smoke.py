import json
import math

import numpy as np
import pytest

import pytcn


def test_enumerate_and_binomial():
    subsets = pytcn.enumerate_subsets(4, 2)
    assert subsets == [[0, 1], [0, 2], [0, 3], [1, 2], [1, 3], [2, 3]]
    assert pytcn.binomial(10, 3) == len(pytcn.enumerate_subsets(10, 3)) == 120
    with pytest.raises(pytcn.CapacityError):
        pytcn.enumerate_subsets(30, 10, max_combined=1000)


def test_combine_examples():
    x = np.array([1.0, 2.0, 3.0])
    full = [[0, 1, 2]]
    assert pytcn.combine(x, full, "mult").tolist() == [6.0]
    assert pytcn.combine(x, full, "pairwise").tolist() == [11.0]
    assert pytcn.global_interaction(x) == 11.0
    assert pytcn.global_interaction(np.array([-1.0, 2.0, 3.0]), "relu") == 1.0


def test_transform_matches_numpy_products():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 5))
    z = pytcn.transform(x, m=2)
    expected = np.stack([x[:, i] * x[:, j] for i in range(5) for j in range(i + 1, 5)], axis=1)
    assert z.shape == (20, 10)
    np.testing.assert_allclose(z, expected, rtol=0, atol=1e-15)

    aug = pytcn.transform(x, m=3, approach="pairwise", augment_original=True,
                          append_global_interaction=True)
    assert aug.shape == (20, math.comb(5, 3) + 5 + 1)
    np.testing.assert_array_equal(aug[:, 10:15], x)
    with pytest.raises(ValueError, match="m exceeds feature count"):
        pytcn.transform(x, m=6)


def test_synth_is_seeded():
    x1, y1 = pytcn.synth_interaction(200, 4, seed=3)
    x2, y2 = pytcn.synth_interaction(200, 4, seed=3)
    np.testing.assert_array_equal(x1, x2)
    assert y1 == y2
    assert set(y1) == {0, 1}


def test_train_predict_evaluate_and_save(tmp_path):
    x, y = pytcn.synth_interaction(600, 4, noise_std=0.0, seed=1)
    model = pytcn.Model("tcn", n_classes=2, seed=1)
    assert not model.is_fitted
    history = model.fit(x, y, pytcn.TrainConfig(max_epochs=30, seed=1))
    assert model.is_fitted
    assert 1 <= history["best_epoch"] <= history["stopped_epoch"] <= 30
    assert model.feature_names[:2] == ["comb_0_1", "comb_0_2"]

    proba = model.predict_proba(x)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    assert model.predict(x) == list(proba.argmax(axis=1))
    metrics = model.evaluate(x, y)
    assert metrics["accuracy"] > 0.8
    assert sum(map(sum, metrics["confusion"])) == 600

    path = tmp_path / "checkpoint.json"
    model.save(path)
    assert json.loads(path.read_text())["kind"] == "tcn"
    restored = pytcn.Model.load(path)
    np.testing.assert_array_equal(restored.predict_proba(x), proba)


def test_grad_check_on_toy_models():
    rng = np.random.default_rng(2)
    x = rng.normal(size=(8, 6))
    y = [0, 1, 2, 0, 1, 2, 0, 1]
    logistic = pytcn.Model("logistic", n_classes=3)
    assert logistic.grad_check(x, y)["max_relative_error"] < 1e-6
    report = pytcn.Model("tcn", n_classes=3).grad_check(x, y)
    assert report["max_relative_error"] < 1e-4
    assert {"dense", "residual", "batchnorm", "dropout"} <= set(report["per_layer_type"])


def test_unfitted_model_raises():
    with pytest.raises(pytcn.StateError):
        pytcn.Model().predict(np.zeros((1, 3)))
    with pytest.raises(ValueError):
        pytcn.Model("transformer")


def test_load_csv(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,y\n1,2,u\n3,4,v\n5,6,u\n")
    d = pytcn.load_csv(path, "y")
    assert d["y"] == [0, 1, 0]
    assert d["class_names"] == ["u", "v"]
    assert d["feature_names"] == ["a", "b"]
    np.testing.assert_array_equal(d["X"], [[1, 2], [3, 4], [5, 6]])
    with pytest.raises(pytcn.SchemaError):
        pytcn.load_csv(path, "label")
