import json

import numpy as np
import pytest

from conftest import central_diff
from fredf.data import make_windows
from fredf.loss import LossConfig
from fredf.model import (
    AdamState,
    EarlyStopping,
    LinearDF,
    MlpDF,
    TrainConfig,
    adam_step,
    backward,
    build_model,
    evaluate_mse,
    fit,
    load_checkpoint,
    predict,
    save_checkpoint,
)


def linear_oracle(model, x):
    """Per-window, per-channel loop form of the linear map."""
    w, b = model.params["weight"], model.params["bias"]
    out = np.zeros((x.shape[0], model.t, model.d))
    for n in range(x.shape[0]):
        for c in range(model.d):
            wc = w[c] if model.per_channel else w
            bc = b[c] if model.per_channel else b
            for j in range(model.t):
                out[n, j, c] = sum(x[n, i, c] * wc[i, j] for i in range(model.h)) + bc[j]
    return out


def mlp_oracle(model, x):
    p = model.params
    flat = x.reshape(x.shape[0], -1)
    return (np.tanh(flat @ p["w1"] + p["b1"]) @ p["w2"] + p["b2"]).reshape(-1, model.t, model.d)


@pytest.mark.parametrize("per_channel", [False, True])
def test_linear_forward_matches_loop(rng, per_channel):
    m = LinearDF.init(5, 4, 3, seed=1, per_channel=per_channel)
    m.params["bias"] = rng.standard_normal(m.params["bias"].shape)
    x = rng.standard_normal((6, 5, 3))
    np.testing.assert_allclose(m.forward(x), linear_oracle(m, x), atol=1e-12)
    np.testing.assert_allclose(m.forward(x[0]), linear_oracle(m, x[:1])[0], atol=1e-12)


def test_mlp_forward(rng):
    m = MlpDF.init(4, 3, 2, seed=2, hidden=7)
    x = rng.standard_normal((5, 4, 2))
    np.testing.assert_allclose(m.forward(x), mlp_oracle(m, x), atol=1e-12)


def test_glorot_bounds():
    m = LinearDF.init(96, 96, 1, seed=0)
    bound = np.sqrt(6 / 192)
    w = m.params["weight"]
    assert np.all(np.abs(w) <= bound)
    assert np.abs(w).max() > 0.9 * bound
    assert np.all(m.params["bias"] == 0)


MODELS = [
    ("linear", lambda: LinearDF.init(6, 5, 2, seed=3)),
    ("per_channel", lambda: LinearDF.init(6, 5, 2, seed=3, per_channel=True)),
    ("mlp", lambda: MlpDF.init(6, 5, 2, seed=3, hidden=8)),
]
LOSSES = [
    LossConfig(alpha=0.0),
    LossConfig(alpha=0.8),
    LossConfig(alpha=1.0, axis="both"),
    LossConfig(alpha=0.5, basis="legendre"),
]


@pytest.mark.parametrize("name, make", MODELS, ids=[m[0] for m in MODELS])
@pytest.mark.parametrize("cfg", LOSSES, ids=["a0", "a08", "both", "legendre"])
def test_end_to_end_gradients(name, make, cfg):
    r = np.random.default_rng(len(name))
    model = make()
    for _ in range(20):
        for k, v in model.params.items():
            model.params[k] = r.standard_normal(v.shape) * 0.3
        x, y = r.standard_normal((3, 6, 2)), r.standard_normal((3, 5, 2))
        _, grads = backward(model, x, y, cfg)
        for key, p in model.params.items():
            def f(val, key=key):
                saved = model.params[key]
                model.params[key] = val
                out = backward(model, x, y, cfg)[0]
                model.params[key] = saved
                return out
            numeric = central_diff(f, p)
            err = np.linalg.norm(grads[key] - numeric)
            assert err <= 1e-4 * max(np.linalg.norm(numeric), 1e-8), key


def test_adam_first_step_bounded():
    state = AdamState(lr=1e-3)
    p = {"x": np.array([1.0, -2.0, 0.0])}
    g = {"x": np.array([5.0, -1e-3, 0.0])}
    step = adam_step(state, p, g)["x"] - p["x"]
    assert np.all(np.abs(step) <= 1e-3 * (1 + 1e-6))
    np.testing.assert_allclose(step[:2], [-1e-3, 1e-3], rtol=1e-4)


def test_adam_minimizes_quadratic():
    state = AdamState(lr=0.1)
    p = {"x": np.array(1.0)}
    for _ in range(100):
        p = adam_step(state, p, {"x": 2 * p["x"]})
    assert abs(p["x"]) < 0.05


def test_adam_matches_reference_recursion():
    state = AdamState(lr=0.01)
    p = {"x": np.array([0.5])}
    m = v = 0.0
    x = 0.5
    for k in range(1, 6):
        g = np.sin(x) + 1
        p = adam_step(state, p, {"x": np.array([g])})
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        x = x - 0.01 * (m / (1 - 0.9**k)) / (np.sqrt(v / (1 - 0.999**k)) + 1e-8)
        assert p["x"][0] == pytest.approx(x, rel=1e-12)


def test_early_stopping_constant_stream():
    s = EarlyStopping(3)
    stops = [s.update(e, 1.0) for e in range(10)]
    assert stops.index(True) == 3  # fourth epoch


def test_early_stopping_in_training():
    # all-zero series: zero gradients, so the validation score never improves
    x = np.zeros((60, 1))
    ds = make_windows(x, 4, 2)
    report, _ = fit(LinearDF(4, 2, 1), ds, ds, TrainConfig(seed=1, patience=3))
    assert report.epochs_run == 4
    assert report.stopped_early
    assert report.best_epoch == 0


class ArrayWindows:
    """Minimal stand-in for a windowed dataset over explicit (input, label) arrays."""

    def __init__(self, inputs, labels):
        self.inputs, self.labels = inputs, labels
        self.t, self.d = labels.shape[1:]

    def __len__(self):
        return self.inputs.shape[0]


def test_fit_learns_noiseless_linear_system():
    r = np.random.default_rng(0)
    a = r.standard_normal((8, 4)) / np.sqrt(8)
    x = r.standard_normal((4000, 8, 1))
    y = np.einsum("nhd,ht->ntd", x, a)
    train, val = ArrayWindows(x[:3000], y[:3000]), ArrayWindows(x[3000:], y[3000:])
    cfg = TrainConfig(seed=0, batch_size=8, loss=LossConfig(alpha=0))
    report, model = fit(LinearDF(8, 4, 1), train, val, cfg)
    assert report.epochs_run <= 10
    assert report.train_mse < 1e-4
    np.testing.assert_allclose(model.params["weight"], a, atol=2e-2)


def test_fit_restores_best_parameters_and_is_deterministic():
    r = np.random.default_rng(0)
    vals = np.cumsum(r.standard_normal((400, 2)), axis=0) * 0.1
    train, val = make_windows(vals[:300], 12, 6), make_windows(vals[300:], 12, 6)
    cfg = TrainConfig(seed=9, loss=LossConfig(alpha=0.8))
    rep1, m1 = fit(LinearDF.init(12, 6, 2, seed=9), train, val, cfg)
    rep2, m2 = fit(LinearDF.init(12, 6, 2, seed=9), train, val, cfg)
    assert rep1.to_dict() == rep2.to_dict()
    assert all(np.array_equal(m1.params[k], m2.params[k]) for k in m1.params)
    assert evaluate_mse(m1, val) == min(rep1.val_mse)
    assert rep1.epochs_run <= 10
    assert rep1.train_mse == evaluate_mse(m1, train)


@pytest.mark.parametrize("kwargs", [
    {"lr": 1e-2},
    {"max_epochs": 11},
    {"max_epochs": 0},
    {"patience": 10},
    {"batch_size": 0},
])
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


def test_predict_covers_every_window(rng):
    ds = make_windows(rng.standard_normal((107, 2)), 5, 3)
    m = LinearDF.init(5, 3, 2, seed=0)
    out = predict(m, ds, chunk=7)
    assert out.shape == (len(ds), 3, 2) == (100, 3, 2)
    np.testing.assert_allclose(out, m.forward(ds.inputs), atol=1e-13)


@pytest.mark.parametrize("config", [
    {"kind": "linear", "h": 4, "t": 3, "d": 2, "per_channel": False},
    {"kind": "linear", "h": 4, "t": 3, "d": 2, "per_channel": True},
    {"kind": "mlp", "h": 4, "t": 3, "d": 2, "hidden": 5},
])
def test_checkpoint_round_trip(tmp_path, rng, config):
    m = build_model(config, seed=4)
    path = tmp_path / "ck.npz"
    save_checkpoint(path, m, {"note": "x"})
    loaded, extra = load_checkpoint(path)
    assert extra == {"note": "x"}
    assert loaded.config() == m.config()
    x = rng.standard_normal((3, 4, 2))
    assert np.array_equal(loaded.forward(x), m.forward(x))


def test_checkpoint_version_checked(tmp_path):
    m = LinearDF(2, 2, 1)
    meta = {"version": 99, "model": m.config(), "extra": {}}
    path = tmp_path / "bad.npz"
    np.savez(path, **{"param/weight": m.params["weight"], "param/bias": m.params["bias"],
                     "meta": np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)})
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_shape_errors():
    m = LinearDF(4, 2, 1)
    with pytest.raises(ValueError):
        m.forward(np.zeros((2, 5, 1)))
    with pytest.raises(ValueError):
        build_model({"kind": "rnn", "h": 1, "t": 1, "d": 1})
