"""Direct multi-output forecasters, Adam, and the early-stopped training loop.

Models map an input window ``(B, H, D)`` (or a single ``(H, D)`` window) to a
``(B, T, D)`` forecast in one shot. Parameters live in a plain ``dict`` of
float64 arrays so the optimizer and checkpoint code stay model-agnostic.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import WindowedDataset
from .loss import LossConfig, combined_loss, temporal_loss
from .numkit import make_rng

CHECKPOINT_VERSION = 1
LEARNING_RATES = (1e-3, 5e-4, 1e-4)
MAX_EPOCHS = 10
SHUFFLE_SALT = 0x5DEECE66D


def _glorot(rng, fan_in: int, fan_out: int, shape) -> np.ndarray:
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def _as_batch(x, h: int, d: int):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    if x.ndim != 3 or x.shape[1:] != (h, d):
        raise ValueError(f"input shape {x.shape[-2:]} does not match model (H={h}, D={d})")
    return x, single


class LinearDF:
    """Linear map from the last ``h`` steps to the next ``t`` steps.

    By default one ``(h, t)`` weight matrix is shared by every channel; with
    ``per_channel=True`` each of the ``d`` channels gets its own.
    """

    kind = "linear"

    def __init__(self, h: int, t: int, d: int, per_channel: bool = False, params: dict | None = None):
        self.h, self.t, self.d = h, t, d
        self.per_channel = per_channel
        if params is None:
            params = self._zeros()
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    def _zeros(self) -> dict:
        if self.per_channel:
            return {"weight": np.zeros((self.d, self.h, self.t)), "bias": np.zeros((self.d, self.t))}
        return {"weight": np.zeros((self.h, self.t)), "bias": np.zeros(self.t)}

    @classmethod
    def init(cls, h, t, d, seed: int, per_channel: bool = False) -> "LinearDF":
        m = cls(h, t, d, per_channel)
        rng = make_rng(seed)
        m.params["weight"] = _glorot(rng, h, t, m.params["weight"].shape)
        return m

    def config(self) -> dict:
        return {"kind": self.kind, "h": self.h, "t": self.t, "d": self.d, "per_channel": self.per_channel}

    def forward(self, x) -> np.ndarray:
        xb, single = _as_batch(x, self.h, self.d)
        w, b = self.params["weight"], self.params["bias"]
        xt = np.swapaxes(xb, 1, 2)  # (B, D, H)
        if self.per_channel:
            out = (xt[:, :, None, :] @ w)[:, :, 0, :] + b
        else:
            out = xt @ w + b
        out = np.swapaxes(out, 1, 2)
        return out[0] if single else out

    def grads(self, x, g_out) -> dict:
        xb, single = _as_batch(x, self.h, self.d)
        g = g_out[None] if single else g_out
        if self.per_channel:
            xd = np.moveaxis(xb, 2, 0)  # (D, B, H)
            gd = np.moveaxis(g, 2, 0)  # (D, B, T)
            return {"weight": np.swapaxes(xd, 1, 2) @ gd, "bias": g.sum(axis=0).T}
        x2 = np.swapaxes(xb, 1, 2).reshape(-1, self.h)
        g2 = np.swapaxes(g, 1, 2).reshape(-1, self.t)
        return {"weight": x2.T @ g2, "bias": g.sum(axis=(0, 2))}


class MlpDF:
    """Two-layer perceptron on the flattened window: ``tanh(x W1 + b1) W2 + b2``."""

    kind = "mlp"

    def __init__(self, h: int, t: int, d: int, hidden: int = 128, params: dict | None = None):
        if hidden < 1:
            raise ValueError("hidden width must be >= 1")
        self.h, self.t, self.d, self.hidden = h, t, d, hidden
        if params is None:
            params = {
                "w1": np.zeros((h * d, hidden)),
                "b1": np.zeros(hidden),
                "w2": np.zeros((hidden, t * d)),
                "b2": np.zeros(t * d),
            }
        self.params = {k: np.asarray(v, dtype=np.float64) for k, v in params.items()}

    @classmethod
    def init(cls, h, t, d, seed: int, hidden: int = 128) -> "MlpDF":
        m = cls(h, t, d, hidden)
        rng = make_rng(seed)
        m.params["w1"] = _glorot(rng, h * d, hidden, (h * d, hidden))
        m.params["w2"] = _glorot(rng, hidden, t * d, (hidden, t * d))
        return m

    def config(self) -> dict:
        return {"kind": self.kind, "h": self.h, "t": self.t, "d": self.d, "hidden": self.hidden}

    def _hidden(self, xb):
        flat = xb.reshape(xb.shape[0], -1)
        return flat, np.tanh(flat @ self.params["w1"] + self.params["b1"])

    def forward(self, x) -> np.ndarray:
        xb, single = _as_batch(x, self.h, self.d)
        _, hid = self._hidden(xb)
        out = (hid @ self.params["w2"] + self.params["b2"]).reshape(-1, self.t, self.d)
        return out[0] if single else out

    def grads(self, x, g_out) -> dict:
        xb, single = _as_batch(x, self.h, self.d)
        g = (g_out[None] if single else g_out).reshape(xb.shape[0], -1)
        flat, hid = self._hidden(xb)
        g_hid = (g @ self.params["w2"].T) * (1.0 - hid * hid)
        return {
            "w1": flat.T @ g_hid,
            "b1": g_hid.sum(axis=0),
            "w2": hid.T @ g,
            "b2": g.sum(axis=0),
        }


def forward(model, l) -> np.ndarray:
    return model.forward(l)


def backward(model, l, y, cfg: LossConfig) -> tuple:
    """(loss value, parameter gradients) of the fused loss on a window batch."""
    yhat = model.forward(l)
    y = np.asarray(y, dtype=np.float64)
    if y.shape != yhat.shape:
        raise ValueError(f"label shape {y.shape} does not match forecast shape {yhat.shape}")
    res = combined_loss(yhat, y, cfg)
    return res.value, model.grads(l, res.grad)


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """Bias-corrected Adam update; returns new parameter arrays and advances ``state``."""
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**state.step
    c2 = 1.0 - b2**state.step
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ValueError(f"gradient for {name} has shape {g.shape}, parameter {p.shape}")
        m = state.m.get(name, np.zeros_like(p))
        v = state.v.get(name, np.zeros_like(p))
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name], state.v[name] = m, v
        out[name] = p - state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return out


@dataclass(frozen=True)
class TrainConfig:
    lr: float = 1e-3
    max_epochs: int = MAX_EPOCHS
    patience: int = 3
    batch_size: int = 32
    seed: int = 2024
    loss: LossConfig = field(default_factory=LossConfig)

    def __post_init__(self):
        if not any(math.isclose(self.lr, r) for r in LEARNING_RATES):
            raise ValueError(f"lr must be one of {LEARNING_RATES}, got {self.lr}")
        if not 1 <= self.max_epochs <= MAX_EPOCHS:
            raise ValueError(f"max_epochs must lie in [1, {MAX_EPOCHS}], got {self.max_epochs}")
        if not 1 <= self.patience < self.max_epochs:
            raise ValueError("patience must satisfy 1 <= patience < max_epochs")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["loss"] = self.loss.to_dict()
        return d


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    val_mse: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False
    train_mse: float | None = None

    @property
    def epochs_run(self) -> int:
        return len(self.val_mse)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epochs_run"] = self.epochs_run
        return d


class EarlyStopping:
    """Tracks the best score; ``update`` returns True when training should stop."""

    def __init__(self, patience: int):
        self.patience = patience
        self.best = math.inf
        self.best_epoch = -1
        self.bad_epochs = 0

    def update(self, epoch: int, score: float) -> bool:
        if score < self.best:
            self.best, self.best_epoch, self.bad_epochs = score, epoch, 0
            return False
        self.bad_epochs += 1
        return self.bad_epochs >= self.patience


def predict(model, dataset: WindowedDataset, chunk: int = 1024) -> np.ndarray:
    """Forecasts for every window (no partial chunk is dropped)."""
    n = len(dataset)
    out = np.empty((n, dataset.t, dataset.d))
    x = dataset.inputs
    for start in range(0, n, chunk):
        out[start: start + chunk] = model.forward(x[start: start + chunk])
    return out


def evaluate_mse(model, dataset: WindowedDataset) -> float:
    return temporal_loss(predict(model, dataset), dataset.labels).value


def fit(model, train: WindowedDataset, val: WindowedDataset, tcfg: TrainConfig) -> tuple:
    """Train with Adam on shuffled mini-batches; keep the best-validation parameters.

    Model selection always uses the validation temporal MSE, whatever the
    training loss mix. Returns ``(report, model)`` with ``model.params`` set to
    the best epoch's parameters.
    """
    if len(train) < 1 or len(val) < 1:
        raise ValueError("training and validation sets must be nonempty")
    rng = make_rng(tcfg.seed ^ SHUFFLE_SALT)
    state = AdamState(lr=tcfg.lr)
    stopper = EarlyStopping(tcfg.patience)
    report = TrainReport()
    best_params = {k: v.copy() for k, v in model.params.items()}
    x_all, y_all = train.inputs, train.labels
    n = len(train)
    for epoch in range(tcfg.max_epochs):
        order = rng.permutation(n)
        total, seen = 0.0, 0
        for start in range(0, n, tcfg.batch_size):
            idx = order[start: start + tcfg.batch_size]
            value, grads = backward(model, x_all[idx], y_all[idx], tcfg.loss)
            model.params = adam_step(state, model.params, grads)
            total += value * idx.size
            seen += idx.size
        report.train_loss.append(total / seen)
        score = evaluate_mse(model, val)
        report.val_mse.append(score)
        stop = stopper.update(epoch, score)
        if stopper.best_epoch == epoch:
            best_params = {k: v.copy() for k, v in model.params.items()}
        if stop:
            report.stopped_early = epoch + 1 < tcfg.max_epochs
            break
    report.best_epoch = stopper.best_epoch
    model.params = best_params
    report.train_mse = evaluate_mse(model, train)
    return report, model


def build_model(config: dict, seed: int | None = None):
    """Model from a ``config()`` dict; random init when ``seed`` is given, zeros otherwise."""
    kind = config["kind"]
    if kind == "linear":
        args = (config["h"], config["t"], config["d"])
        pc = bool(config.get("per_channel", False))
        return LinearDF.init(*args, seed=seed, per_channel=pc) if seed is not None else LinearDF(*args, per_channel=pc)
    if kind == "mlp":
        args = (config["h"], config["t"], config["d"])
        hidden = int(config.get("hidden", 128))
        return MlpDF.init(*args, seed=seed, hidden=hidden) if seed is not None else MlpDF(*args, hidden=hidden)
    raise ValueError(f"unknown model kind {kind!r}")


def save_checkpoint(path, model, extra: dict | None = None) -> None:
    """Write ``model`` to an ``.npz`` archive.

    Layout: one float64 array per parameter under ``param/<name>`` and a
    ``meta`` entry holding UTF-8 JSON with ``version``, ``model`` (the model's
    ``config()``) and any ``extra`` metadata (scaler, split, loss, ...).
    """
    meta = {"version": CHECKPOINT_VERSION, "model": model.config(), "extra": extra or {}}
    arrays = {f"param/{k}": v for k, v in model.params.items()}
    arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode("utf-8"), dtype=np.uint8)
    with Path(path).open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple:
    """Inverse of :func:`save_checkpoint`; returns ``(model, extra)``."""
    with np.load(Path(path), allow_pickle=False) as z:
        meta = json.loads(z["meta"].tobytes().decode("utf-8"))
        params = {k.split("/", 1)[1]: z[k].copy() for k in z.files if k.startswith("param/")}
    if meta.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {meta.get('version')}")
    model = build_model(meta["model"])
    for k, v in params.items():
        if k not in model.params or model.params[k].shape != v.shape:
            raise ValueError(f"checkpoint parameter {k} does not match model layout")
    model.params = params
    return model, meta["extra"]
