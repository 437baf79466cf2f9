import json
import logging
import math

import numpy as np
import pytest

from pgnn_hsm.errors import ConfigError, DivergedLoss, RankDeficient
from pgnn_hsm.inverse_model import (BlackBoxModel, NNParams, PgnnModel, PhysicalModel, RegressorSpec, TrainConfig,
                                    build_regressors, fit_network, fit_physical, input_transform, load_model,
                                    model_from_json, model_to_json, nn_forward, rotation_mask, save_model,
                                    train_blackbox, train_residual)
from pgnn_hsm.trajectory import MotionLimits, back_and_forth

SPEC = RegressorSpec()
TS = SPEC.sample_time
THETA = (5.7e-5, 1e-4)


def random_windows(rng, n, spread=30.0):
    y0 = rng.uniform(-spread, spread, size=(n, 1))
    v = rng.uniform(-20, 20, size=(n, 1))
    a = rng.uniform(-80, 80, size=(n, 1))
    t = np.array([2, 1, 0, -1, -2]) * TS
    return y0 + v * t + 0.5 * a * t ** 2


def synthetic_regs(residual=None, seconds=2.0):
    prof = back_and_forth(0.5, MotionLimits(15, 80, 1000), TS, 0.05, repetitions=3)
    y = prof.y[: int(seconds / TS)]
    phys = PhysicalModel(*THETA, SPEC)
    regs = build_regressors(y, np.zeros_like(y), SPEC)
    regs.u = phys.predict(regs.phi)
    if residual is not None:
        regs.u = regs.u + residual(regs.phi[:, 2])
    return regs


def make_models(rng):
    phys = PhysicalModel(*THETA, SPEC, 1e-6)
    pg = PgnnModel(phys, NNParams.init(3, 5, rng), np.array([80.0, 15.0, 2 * math.pi]), 3e-4)
    pg_id = PgnnModel(phys, NNParams.init(5, 4, rng), np.full(5, 20.0), 3e-4, transform="identity")
    bb = BlackBoxModel(NNParams.init(5, 4, rng), np.full(5, 20.0), 5e-3)
    return [phys, pg, pg_id, bb]


def test_physical_predict():
    phys = PhysicalModel(2.0, 3.0, RegressorSpec(sample_time=0.5))
    w = np.array([1.0, 0.25, 0.0, 0.25, 1.0])  # y = t^2 about t = 0 with T_s = 0.5
    assert phys.predict(w) == pytest.approx(2.0 * 2.0 + 3.0 * 0.0)
    assert phys.predict(np.stack([w, w])).shape == (2,)


def test_fast_window_path_matches_batch():
    rng = np.random.default_rng(0)
    W = random_windows(rng, 50)
    for m in make_models(rng):
        batch = m.predict(W)
        single = np.array([m.predict_window(list(w)) for w in W])
        np.testing.assert_allclose(single, batch, rtol=1e-12, atol=1e-15)


def test_json_roundtrip_identical_predictions(tmp_path):
    rng = np.random.default_rng(1)
    probes = random_windows(rng, 100)
    for m in make_models(rng):
        path = tmp_path / f"{m.kind}.json"
        save_model(m, path)
        back = load_model(path)
        assert type(back) is type(m)
        np.testing.assert_array_equal(back.predict(probes), m.predict(probes))


def test_model_json_rejects_bad_documents():
    rng = np.random.default_rng(2)
    doc = json.loads(model_to_json(make_models(rng)[1]))
    for key, value in (("format", "other"), ("version", 99), ("kind", "mystery")):
        bad = dict(doc, **{key: value})
        with pytest.raises(ValueError):
            model_from_json(json.dumps(bad))


def test_pgnn_input_size_checked():
    phys = PhysicalModel(*THETA)
    with pytest.raises(ValueError):
        PgnnModel(phys, NNParams.zeros(5, 2), np.ones(5))
    with pytest.raises(ValueError):
        PgnnModel(phys, NNParams.zeros(3, 2), np.ones(3), transform="fourier")


def test_pgnn_rotation_invariance_untrained():
    rng = np.random.default_rng(3)
    pg = make_models(rng)[1]
    W = random_windows(rng, 500)
    mask = rotation_mask(SPEC)
    u = pg.predict(W)
    for n in (-3, 1, 2):
        assert np.all(np.abs(pg.predict(W + 2 * math.pi * n * mask) - u) < 1e-9 * (1 + np.abs(u)))


def test_fit_physical_exact_on_noiseless_data():
    regs = synthetic_regs()
    phys = fit_physical(regs, SPEC)
    assert phys.theta_inertia == pytest.approx(THETA[0], rel=1e-8)
    assert phys.theta_viscous == pytest.approx(THETA[1], rel=1e-8)
    assert phys.residual_rms < 1e-12


def test_fit_physical_normal_equations_oracle():
    # compare to numpy's SVD least squares on noisy data
    rng = np.random.default_rng(4)
    regs = synthetic_regs()
    regs.u = regs.u + rng.normal(scale=1e-4, size=len(regs))
    phys = fit_physical(regs, SPEC)
    A = phys.features(regs.phi)
    ref, *_ = np.linalg.lstsq(A, regs.u, rcond=None)
    np.testing.assert_allclose(phys.theta, ref, rtol=1e-9)


def test_fit_physical_rank_deficient():
    y = np.full(50, 1.3)
    with pytest.raises(RankDeficient):
        fit_physical(build_regressors(y, np.zeros(50), SPEC), SPEC)
    # constant velocity: acceleration feature is identically zero
    y = 0.01 * np.arange(50)
    with pytest.raises(RankDeficient):
        fit_physical(build_regressors(y, np.ones(50), SPEC), SPEC)


def test_fit_physical_warns_on_negative_inertia(caplog):
    regs = synthetic_regs()
    regs.u = -regs.u
    with caplog.at_level(logging.WARNING):
        fit_physical(regs, SPEC)
    assert "not positive" in caplog.text


@pytest.mark.parametrize("bad", [{"optimizer": "sgd"}, {"learning_rate": 0.0}, {"epochs": 0}, {"hidden": 0},
                                 {"regularization": -1.0}, {"lr_decay": 1.5}, {"restarts": 0}])
def test_train_config_validation(bad):
    with pytest.raises(ConfigError):
        TrainConfig(**bad)


def test_fit_network_learns_and_is_seeded():
    rng = np.random.default_rng(5)
    X = rng.uniform(-1, 1, size=(200, 2))
    y = np.sin(2 * X[:, 0]) * 0.5 + 0.3 * X[:, 1]
    cfg = TrainConfig(hidden=8, epochs=800, learning_rate=2e-2, seed=7)
    nn, hist, best = fit_network(X, y, cfg)
    assert len(hist) == 801
    assert hist[best] == hist.min()
    assert hist[best] < 1e-3 * np.mean(y ** 2) + 1e-4
    nn2, hist2, _ = fit_network(X, y, cfg)
    np.testing.assert_array_equal(nn.flat(), nn2.flat())
    np.testing.assert_array_equal(hist, hist2)


def test_fit_network_minibatch_and_lbfgs():
    rng = np.random.default_rng(6)
    X = rng.uniform(-1, 1, size=(100, 1))
    y = X[:, 0] ** 2
    nn, hist, _ = fit_network(X, y, TrainConfig(hidden=4, epochs=100, batch_size=16, seed=1))
    assert hist.min() < hist[0]
    nn, hist, best = fit_network(X, y, TrainConfig(hidden=4, optimizer="lbfgs", epochs=500, restarts=2, seed=1))
    assert best == len(hist) - 1
    assert np.max(np.abs(nn_forward(nn, X) - y)) < 1e-2


def test_absurd_learning_rate_diverges():
    rng = np.random.default_rng(8)
    X = rng.uniform(-1, 1, size=(100, 3))
    y = rng.uniform(-1, 1, size=100)
    with pytest.raises(DivergedLoss) as info:
        fit_network(X, y, TrainConfig(hidden=16, epochs=50, learning_rate=1e3))
    assert "learning_rate" in info.value.hint


def test_train_residual_reports_in_input_units():
    regs = synthetic_regs(residual=lambda y: 1e-4 * np.sin(np.mod(y, 2 * math.pi)))
    phys = PhysicalModel(*THETA, SPEC)
    res = train_residual(regs, phys, TrainConfig(hidden=8, epochs=300, subsample=4, seed=0))
    assert res.extra["physical_only_loss"] == pytest.approx(np.mean((1e-4 * np.sin(regs.phi[::4, 2])) ** 2),
                                                            rel=1e-6)
    assert res.final_loss < 0.2 * res.extra["physical_only_loss"]
    model = res.model
    assert model.physical is phys
    X = input_transform(regs.phi[::4], SPEC)
    np.testing.assert_allclose(np.max(np.abs(X), axis=0), model.in_scale)


def test_train_blackbox_fits_physical_data():
    regs = synthetic_regs()
    res = train_blackbox(regs, TrainConfig(hidden=8, epochs=300, subsample=4, seed=0), SPEC)
    assert isinstance(res.model, BlackBoxModel)
    assert res.final_loss < res.loss_history[0]
