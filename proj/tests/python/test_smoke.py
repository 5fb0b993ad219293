import json
import math

import numpy as np
import pytest

import gola


def random_adapter(rng, c_out, c_in, r, scale=1.0):
    return gola.AdapterPair(
        rng.standard_normal((c_out, c_in)),
        rng.standard_normal((r, c_in)),
        rng.standard_normal((c_out, r)),
        scale,
    )


def test_version():
    assert gola.__version__ == "1.0.0"


def test_forward_matches_merge():
    rng = np.random.default_rng(0)
    a = random_adapter(rng, 12, 9, 3, scale=0.5)
    h = rng.standard_normal((9, 4))
    np.testing.assert_allclose(gola.forward(a, h), gola.merge(a) @ h, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(gola.effective_update(a), 0.5 * a.B @ a.A, rtol=1e-12, atol=1e-12)


def test_shape_errors_become_python_exceptions():
    rng = np.random.default_rng(1)
    a = random_adapter(rng, 4, 6, 2)
    with pytest.raises(gola.ShapeError):
        gola.forward(a, np.zeros((5, 1)))
    with pytest.raises(gola.GolaError):
        gola.AdapterPair(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((2, 3)))


def test_rank_importance_hand_value():
    B = np.zeros((3, 4))
    B[0, 0] = 2.0
    s = gola.rank_importance(B, 1)
    assert not s.degenerate
    np.testing.assert_allclose(s.scores, [1.5 * math.sqrt(3)] + [0.5 * math.sqrt(3)] * 3, rtol=1e-12)
    assert gola.sort_ranks(s)[0] == 0


def test_partition_defaults_and_invariance():
    rng = np.random.default_rng(2)
    a = random_adapter(rng, 96, 96, 64)
    g = gola.partition(a)
    p = g.partition
    assert (p.k, p.n) == (16, 8)
    assert sorted(len(group) for group in p.groups) == [6] * 8
    assert sum(g.frozen_mask) == 16
    np.testing.assert_allclose(gola.effective_update(g.adapter), gola.effective_update(a), atol=1e-12)
    assert gola.partition(a, 16, 8, 0).partition == p
    with pytest.raises(gola.ParameterError):
        gola.partition(a, 63, 2)


def test_orth_loss_and_heatmap():
    rng = np.random.default_rng(3)
    g = gola.partition(random_adapter(rng, 24, 24, 10), 2, 4, 0)
    loss = gola.orth_loss(g, 0, 1)
    assert loss > 0
    grad = gola.orth_loss_grad(g, 0, 1)
    assert set(grad) == {"A_i", "A_j", "B_i", "B_j"}
    assert grad["A_i"].shape == (2, 24)
    heat = gola.orth_heatmap(g, "A")
    assert heat.shape == (4, 4)
    assert heat.max() == pytest.approx(1.0)
    np.testing.assert_allclose(heat, heat.T)
    pair = gola.sample_pair(4, gola.Rng(7))
    assert 0 <= pair[0] < pair[1] < 4


def test_singular_spectrum():
    A = np.array([[2.0, 0.0]])
    B = np.array([[1.0], [3.0]])
    s = gola.singular_spectrum(gola.AdapterPair(np.zeros((2, 2)), A, B))
    assert s[0] == pytest.approx(2 * math.sqrt(10))


def test_metrics():
    pred = np.array([[3, 4, 10, 10], [15, 20, 10, 10], [6, 8, 10, 10]], dtype=float)
    truth = np.zeros((3, 4))
    truth[:, 2:] = 10
    assert gola.precision_rate(pred, truth) == pytest.approx(2 / 3)
    assert gola.center_error([0, 0, 10, 10], [3, 4, 10, 10]) == pytest.approx(5.0)
    assert gola.iou([0, 0, 10, 10], [5, 0, 10, 10]) == pytest.approx(1 / 3)
    assert gola.mpr(pred, truth, truth, truth, 20.0) == 1.0
    assert gola.success_auc(truth, truth) == pytest.approx(1.0)


def test_train_small_run():
    task = gola.make_synthetic_task(16, 2, 0)
    cfg = gola.TrainConfig()
    cfg.rank, cfg.k, cfg.n, cfg.steps, cfg.batch = 10, 2, 4, 10, 8
    assert cfg.lambda_ == pytest.approx(1.4e-3)
    report = gola.train(task, cfg)
    assert len(report.task_trace) == 10
    assert report.frozen_checksum_before == report.frozen_checksum_after
    assert gola.confidence_gate(0.84)
    assert not gola.confidence_gate(0.83)


def test_container_and_cli(tmp_path):
    rng = np.random.default_rng(4)
    a = random_adapter(rng, 20, 20, 10)
    path = tmp_path / "a.gola"
    gola.write_adapter(path, a, "blocks.0")
    back = gola.read_adapter(path)
    np.testing.assert_array_equal(back.A, a.A.astype(np.float32).astype(np.float64))

    out_json = tmp_path / "p.json"
    code, out, err = gola.run_cli(["partition", "--in", str(path), "--out", str(out_json), "--k", "2", "--n", "4"])
    assert code == 0, err
    assert out.startswith("partition: r=10 k=2 n=4 group_size=2")
    assert json.loads(out_json.read_text())["k"] == 2

    bad = tmp_path / "bad.gola"
    bad.write_bytes(b"NOPE" + path.read_bytes()[4:])
    code, _, err = gola.run_cli(["partition", "--in", str(bad), "--out", str(out_json)])
    assert code == 3
    assert "magic" in err
