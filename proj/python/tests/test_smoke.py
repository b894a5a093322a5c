import json
import math

import numpy as np
import pytest

import lur


def make_data(n=120, seed=3):
    rng = np.random.default_rng(seed)
    x = rng.uniform(-2, 2, size=(n, 4))
    y = 55 + 3 * np.sin(2 * x[:, 0]) + 2 * (x[:, 1] > 0) + 0.3 * rng.normal(size=n)
    return x, ["a", "b", "c", "d"], y


def test_fit_predict_round_trip(tmp_path):
    x, names, y = make_data()
    for family in ["LM", "ENET", "SVR", "RF", "GBT"]:
        hyper = {"n_trees": 50} if family == "RF" else {}
        m = lur.fit_model(family, x, names, y, hyper=hyper, seed=1)
        assert m.family == family
        p = np.array(m.predict(x, names))
        assert np.mean((p - y) ** 2) < np.var(y)
        path = tmp_path / f"{family}.json"
        m.save(path)
        back = lur.Model.load(path)
        assert back.predict(x, names) == m.predict(x, names)


def test_tree_shap_local_accuracy():
    x, names, y = make_data()
    m = lur.fit_model("GBT", x, names, y, hyper={"rounds": 60, "max_depth": 3}, seed=2)
    base, values, cols = lur.tree_shap(m, x, names)
    assert cols == names
    pred = np.array(m.predict(x, names))
    assert np.max(np.abs(base + values.sum(axis=1) - pred)) < 1e-6


def test_statistics():
    assert lur.wilcoxon_rank_sum([1, 2, 3], [4, 5, 6]) == pytest.approx(0.1)
    assert lur.benjamini_hochberg([0.01, 0.04, 0.03]) == pytest.approx([0.03, 0.04, 0.04])
    xy = np.array([[0, 0], [1, 0], [0, 1], [1, 1]], dtype=float)
    assert lur.morans_i([1, -1, -1, 1], xy) < 0
    res = lur.moran_test([1, -1, -1, 1], xy, n_perm=99, seed=1)
    assert res["expected"] == pytest.approx(-1 / 3)
    assert lur.segment_length_in_circle((-5, 0.6), (5, 0.6), (0, 0), 1.0) == pytest.approx(1.6)
    assert lur.yeo_johnson(1.5, 1.0) == 1.5
    t = np.arange(6.0)
    assert math.isinf(lur.variance_inflation(np.column_stack([t, 2 * t, np.sin(t)]))[0])


def test_nested_cv_report():
    x, names, y = make_data(80)
    rep = lur.nested_cv(x, names, y, ["c"] * 80,
                        [{"family": "LM"}, {"family": "GBT", "grid": {"rounds": [20, 40], "max_depth": [2]}}],
                        repeats=1, folds=4, inner_folds=3, seed=5, threads=1)
    assert {s["family"] for s in rep["summary"]} == {"LM", "GBT"}


def test_errors_map_to_python_exceptions():
    x, names, y = make_data()
    with pytest.raises(lur.ValidationError):
        lur.fit_model("XGB", x, names, y)
    with pytest.raises(ValueError):
        lur.fit_model("RF", x, names, y, hyper={"mtry": 99})


def test_pipeline_commands(tmp_path):
    data = tmp_path / "data"
    files = lur.synth(data, n_sites=150, cities=2)
    assert "config.json" in files
    cfg = json.loads((data / "config.json").read_text())
    cfg["families"] = [{"family": "LM"}, {"family": "GBT", "grid": {"rounds": [20], "max_depth": [2]}}]
    cfg["cv"] = {"repeats": 1, "folds": 3, "inner_folds": 2, "seed": 1}
    cfg["mapping"]["cell_size"] = 200.0
    cfg["moran"]["n_perm"] = 19
    path = data / "small.json"
    path.write_text(json.dumps(cfg))
    for step in [lur.features, lur.train, lur.evaluate, lur.explain, lur.predict_grid, lur.exposure]:
        manifest = step(path, threads=1)
        assert manifest["outputs"]
    exposure = json.loads((data / "out" / "exposure" / "exposure.json").read_text())
    for col in exposure["columns"]:
        assert all(a >= b for a, b in zip(col["counts"], col["counts"][1:]))
