"""Smoke tests for the python bindings: simulate, detect, train a little."""

import math
import os
import subprocess

import numpy as np
import pytest

import mtcad


@pytest.fixture(scope="module")
def scenario():
    cfg = mtcad.ScenarioConfig(n_devices=12, pilot_len=5)
    return mtcad.generate_scenario(cfg, seed=7)


def test_scenario_shapes_and_power_control(scenario):
    assert scenario.pilots.shape == (5, 12)
    assert scenario.scaled_pilots.shape == (5, 12)
    products = np.asarray(scenario.power) * np.asarray(scenario.gain)
    assert np.allclose(products, products[0], rtol=1e-12)
    assert scenario.noise_var == pytest.approx(10 ** (-12.9), rel=1e-12)


def test_sample_and_covariance(scenario):
    s = mtcad.draw_sample(scenario, m_antennas=16, activity_ratio=0.2, seed=3,
                          keep_received=True)
    assert s.labels.shape == (12,)
    assert s.cov.shape == (5, 5)
    np.testing.assert_allclose(s.cov, s.cov.conj().T, atol=1e-12)
    c = mtcad.sample_covariance(s.received)
    np.testing.assert_allclose(c, s.cov, atol=1e-12)


def test_covariance_detector_recovers_easy_instance(scenario):
    s = mtcad.draw_sample(scenario, m_antennas=64, activity_ratio=0.2, seed=11)
    res = mtcad.detect_cd(s.cov, s.scaled_pilots, scenario.noise_var)
    assert len(res.activity) == 12
    decided = np.array(mtcad.threshold(res.activity, 0.5), dtype=np.uint8)
    np.testing.assert_array_equal(decided, s.labels)
    # the exact nll of the returned point matches the reported trace tail
    val = mtcad.nll(res.activity, s.cov, s.scaled_pilots, scenario.noise_var)
    assert val == pytest.approx(res.pass_nll[-1], rel=1e-12)
    assert all(b <= a + 1e-9 for a, b in zip(res.pass_nll, res.pass_nll[1:]))


def test_ht_forward_and_training_smoke():
    cfg = mtcad.HTConfig(layers=1, d_model=16, d_attn=8, heads=2, d_ff=32)
    model = mtcad.HetTransformer(cfg, pilot_len=4, seed=5)
    scen_cfg = mtcad.ScenarioConfig(n_devices=10, pilot_len=4)

    trace = mtcad.train_ht(model, scen_cfg, m_antennas=8, activity_ratio=0.1,
                           epochs=2, steps=5, batch=8, lr=1e-3, seed=9)
    assert len(trace) == 2
    assert all(math.isfinite(loss) for _, loss, _ in trace)

    scenario = mtcad.generate_scenario(scen_cfg, seed=1)
    sample = mtcad.draw_sample(scenario, m_antennas=8, activity_ratio=0.1, seed=2)
    probs = model.forward(sample.scaled_pilots, sample.cov)
    assert probs.shape == (10,)
    assert np.all(probs > 0) and np.all(probs < 1)

    # scale adaptability: same weights on a wider deployment
    wide_cfg = mtcad.ScenarioConfig(n_devices=17, pilot_len=4)
    wide = mtcad.generate_scenario(wide_cfg, seed=3)
    ws = mtcad.draw_sample(wide, m_antennas=32, activity_ratio=0.1, seed=4)
    assert model.forward(ws.scaled_pilots, ws.cov).shape == (17,)


def test_ht_checkpoint_roundtrip(tmp_path):
    cfg = mtcad.HTConfig(layers=1, d_model=8, d_attn=4, heads=2, d_ff=16)
    model = mtcad.HetTransformer(cfg, pilot_len=3, seed=6)
    scen_cfg = mtcad.ScenarioConfig(n_devices=6, pilot_len=3)
    mtcad.train_ht(model, scen_cfg, m_antennas=4, activity_ratio=0.2,
                   epochs=1, steps=3, batch=4, lr=1e-3, seed=10)

    path = str(tmp_path / "model.mtcht")
    model.save(path)
    loaded = mtcad.HetTransformer.load(path)
    assert loaded.param_count == model.param_count

    scenario = mtcad.generate_scenario(scen_cfg, seed=12)
    sample = mtcad.draw_sample(scenario, m_antennas=4, activity_ratio=0.2, seed=13)
    np.testing.assert_array_equal(model.forward(sample.scaled_pilots, sample.cov),
                                  loaded.forward(sample.scaled_pilots, sample.cov))


def test_metrics_and_operating_point():
    pm, pf = mtcad.pm_pf([1, 0, 0, 0], [1, 0, 1, 0])
    assert (pm, pf) == (0.5, 0.0)

    curve = mtcad.roc_sweep([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
    pms = [p for _, p, _ in curve]
    pfs = [f for _, _, f in curve]
    assert pms == sorted(pms)
    assert pfs == sorted(pfs, reverse=True)

    op = mtcad.operating_point(curve, ratio=1.0)
    assert op.crossed
    assert op.pm == pytest.approx(0.0)
    assert op.pf == pytest.approx(0.0)


def test_weighted_loss_matches_hand_value():
    probs = np.array([[0.8, 0.3]])
    labels = np.array([[1, 0]], dtype=np.uint8)
    loss = mtcad.weighted_bce_loss(probs, labels, activity_ratio=0.1)
    expected = 0.9 * -math.log(0.8) + 0.1 * -math.log(0.7)
    assert loss == pytest.approx(expected, rel=1e-12)


def test_cli_round_trip(tmp_path):
    cli = os.environ.get("MTCAD_CLI")
    if not cli or not os.path.exists(cli):
        pytest.skip("MTCAD_CLI not set")
    data = str(tmp_path / "d.mtcds")
    out = subprocess.run(
        [cli, "gen-data", "--n", "8", "--lp", "4", "--m", "8", "--count", "20",
         "--out", data],
        capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    curve = str(tmp_path / "c.tsv")
    out = subprocess.run(
        [cli, "eval", "--data", data, "--covariance", "--curve-out", curve],
        capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert os.path.exists(curve)

    # documented exit codes: 2 for I/O problems, 1 for usage errors
    missing = subprocess.run(
        [cli, "eval", "--data", str(tmp_path / "nope.mtcds"), "--covariance"],
        capture_output=True, text=True)
    assert missing.returncode == 2
    usage = subprocess.run([cli, "eval", "--data", data], capture_output=True,
                           text=True)
    assert usage.returncode == 1
