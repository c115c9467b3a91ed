import math

import numpy as np
import pytest

import cldyn


def test_covariance_matches_sample_covariance():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((6, 3))
    c = cldyn.contrastive_covariance(np.vstack([x, x]))
    expected = np.cov(x, rowvar=False)
    np.testing.assert_allclose(c, expected, atol=1e-12)


def test_closed_forms():
    a = cldyn.analytic_A_summation(0.2, 3)
    eig = np.linalg.eigvalsh(a)
    assert eig.max() == pytest.approx(0.64)
    assert eig.min() == pytest.approx(0.2)
    assert cldyn.summation_tie_threshold() == pytest.approx((3 - math.sqrt(5)) / 2)
    assert cldyn.modulation_probability(0.0, 4) == pytest.approx(0.234375)
    assert cldyn.modulation_probability(2.0, 9) == 0.5
    assert cldyn.blowup_time(1.0, 1.0) == pytest.approx(math.log(2))


def test_power_iteration_converges_to_atom():
    w0 = np.array([0.9, math.sqrt(1 - 0.81), 0.0])
    out = cldyn.power_iterate_summation(0.2, 3, w0, 1e-12, 200)
    assert out["converged"]
    assert abs(out["limit"][0]) > 1 - 1e-10


def test_rank1_solver_against_dense():
    d = np.array([1.0, 0.0])
    b = np.array([1.0, 1.0])
    lam, s = cldyn.rank1_top_eigen(d, b, 0.25)
    dense = np.diag(d) + 0.25 * np.outer(b, b)
    assert lam == pytest.approx(np.linalg.eigvalsh(dense).max(), abs=1e-12)


def test_infonce_identical_representations():
    f = np.full((5, 2), 0.3)
    out = cldyn.infonce_loss(f, f, tau=0.5, eps=1.0)
    assert out["value"] == pytest.approx(-0.5 * 5 * math.log(1 / 5))
    assert out["grad_anchors"].shape == (5, 2)


def test_errors_map_to_python():
    with pytest.raises(ValueError):
        cldyn.modulation_probability(-2.0, 3)
    with pytest.raises(ValueError):
        cldyn.run_experiment('kind = "table1"\nseeds = []\n', "/tmp/unused")
    with pytest.raises(cldyn.InvalidConfiguration):
        cldyn.default_config("table9")


def test_short_training_run(tmp_path):
    out = cldyn.train(activation="relu", P=3, beta=2, seed=1, steps=50, batch=32)
    assert out["ok"]
    assert 0.0 <= out["chi_plus"] <= 1.0
    assert len(out["loss"]) == 50
    net = out["net"]
    assert net.W.shape == (10 * 6, 20)
    path = str(tmp_path / "net.ckpt")
    net.save(path)
    back = cldyn.TwoLayerNet.load(path)
    np.testing.assert_array_equal(back.W, net.W)
    emb = cldyn.make_embedding(20, 20, 1.0)
    assert cldyn.matching_scores(back, emb, out["pool"])[0] == pytest.approx(out["chi_plus"])
    cldyn.render_weight_grid(back, 20, 1.0, str(tmp_path / "w.pgm"), out["pool"])
    assert (tmp_path / "w.pgm").read_bytes().startswith(b"P5")


def test_experiment_runner(tmp_path):
    cfg = 'kind = "table1"\nseeds = [1]\n[sweep]\nbeta = [1]\nP = [3]\nactivation = ["relu"]\n[train]\nsteps = 20\nbatch = 16\n'
    assert cldyn.run_experiment(cfg, str(tmp_path)) == 0
    table = (tmp_path / "table.csv").read_text().splitlines()
    assert table[0].startswith("beta,P,activation")
    assert len(table) == 2
    assert "kind = \"table1\"" in cldyn.default_config("table1")
