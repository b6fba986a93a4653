import math

import numpy as np
import pytest

import chronos


def test_normalize_and_pearson():
    rng = np.random.default_rng(1)
    a, b = rng.normal(size=64), rng.normal(size=64)
    s, r = chronos.normalize(a), chronos.normalize(b)
    assert np.linalg.norm(s.values) == pytest.approx(1.0)
    assert chronos.pearson(a, b) == pytest.approx(np.corrcoef(a, b)[0, 1])
    assert 1 - np.sum((s.values - r.values) ** 2) / 2 == pytest.approx(np.corrcoef(a, b)[0, 1])


def test_dft_matches_numpy():
    x = np.random.default_rng(2).normal(size=32)
    got = np.array(chronos.dft(x))
    np.testing.assert_allclose(got, np.fft.fft(x) / math.sqrt(32), atol=1e-12)


def test_constant_series_raises():
    with pytest.raises(chronos.Error) as info:
        chronos.normalize([3.0] * 8)
    assert info.value.kind == "ConstantSeries"
    assert info.value.exit_code == 11


def test_baselines_and_network():
    ns = chronos.normalize(np.sin(np.arange(32) / 3.0) + np.arange(32) * 0.01)
    assert len(chronos.embed_dft(ns, 4)) == 4
    assert len(chronos.embed_downsample(ns, 4)) == 4
    net = chronos.init_network(chronos.feature_width(32), 16, 4, 0)
    z = net.embed(ns)
    assert z.shape == (4,)
    assert np.linalg.norm(z) == pytest.approx(1.0)


def test_kdtree_matches_linear_scan(tmp_path):
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(300, 4))
    tree = chronos.KdTree(list(range(300)), pts)
    q = rng.normal(size=4)
    ids, d2 = tree.top_k(q, 10)
    want = np.argsort(np.sum((pts - q) ** 2, axis=1), kind="stable")[:10]
    assert list(ids) == list(want)
    tree.save(tmp_path / "t.chi")
    again = chronos.KdTree.load(tmp_path / "t.chi")
    assert list(again.top_k(q, 10)[0]) == list(ids)


def test_train_and_sweep(tmp_path):
    ds = chronos.gen_example2(200, 32, 4, 0.01, 5)
    sp = chronos.split(ds, seed=1)
    cfg = chronos.TrainConfig.desk()
    cfg.hidden_size, cfg.iterations, cfg.m, cfg.loss = 32, 100, 4, "order"
    res = chronos.train(ds, sp, cfg)
    assert res.final_loss < res.initial_loss
    res.params.save(tmp_path / "m.chr")
    assert chronos.Network.load(tmp_path / "m.chr") == res.params

    rows = chronos.sweep(ds, sp, [("dft", 4, "dft"), ("learned", 4, res.params), ("exact", 0, None)], k_values=[5])
    assert [r["method"] for r in rows] == ["dft", "learned", "exact"]
    assert rows[2]["rho"] == 1.0
    assert all(0.0 <= r["rho"] <= 1.0 for r in rows)


def test_dataset_round_trip(tmp_path):
    values = np.random.default_rng(4).normal(size=(5, 16))
    ds = chronos.Dataset(values, ids=[10, 11, 12, 13, 14])
    ds.save_csv(tmp_path / "d.csv")
    back = chronos.load_csv(tmp_path / "d.csv")
    np.testing.assert_array_equal(back.values, values)
    assert list(back.ids) == [10, 11, 12, 13, 14]
