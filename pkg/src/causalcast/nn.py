"""From-scratch recurrent forecaster: GRU -> LSTM -> dense -> linear head.

Pure numpy, float64 throughout.  Gradients come from handwritten
backpropagation through time, optimization from a handwritten Adam, and
regularization from inverted dropout so evaluation needs no rescaling.
Checkpoints serialize every parameter as base64 little-endian float64,
making save/load/predict round trips bit-identical.

Parameter dictionary layout (gate blocks stacked along columns):

======== =========== ==========================================
key      shape       meaning
======== =========== ==========================================
gru_W    (F, 3G)     input kernels, gate order [z, r, n]
gru_U    (G, 3G)     recurrent kernels, same order
gru_bx   (3G,)       input-side gate biases
gru_bh   (3G,)       recurrent-side gate biases
lstm_W   (G, 4L)     input kernels, gate order [i, f, o, g]
lstm_U   (L, 4L)     recurrent kernels
lstm_b   (4L,)       gate biases (forget block initialized to 1)
dense_W  (L, D)      ReLU layer weights
dense_b  (D,)
head_W   (D, 1)      linear output
head_b   (1,)
======== =========== ==========================================

The GRU uses split input/recurrent biases with the reset gate applied
after the recurrent matmul (so the two candidate biases are not
redundant), and the update convention h_t = (1 - z) * h_{t-1} + z * n_t.
"""

from __future__ import annotations

import base64
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Frequency, LagWindowSet, NormalizationStats
from .errors import (
    EmptySplit,
    InvalidArgument,
    NumericalError,
    ParseError,
    ShapeError,
)

CHECKPOINT_FORMAT = "causalcast.checkpoint"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    """Layer sizes and dropout for one forecaster instance."""

    feature_count: int
    lookback: int = 21
    gru_units: int = 64
    lstm_units: int = 128
    dense_units: int = 64
    dropout_rate: float = 0.2

    def __post_init__(self):
        for name in ("feature_count", "lookback", "gru_units", "lstm_units",
                     "dense_units"):
            if getattr(self, name) < 1:
                raise InvalidArgument(f"{name} must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise InvalidArgument(
                f"dropout_rate must lie in [0, 1), got {self.dropout_rate}"
            )


@dataclass
class RecurrentModel:
    config: ModelConfig
    params: dict[str, np.ndarray]


@dataclass
class AdamState:
    learning_rate: float
    beta1: float
    beta2: float
    epsilon: float
    step: int
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 64
    max_epochs: int = 100
    patience: int = 10
    learning_rate: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise InvalidArgument("batch_size must be >= 1")
        if self.max_epochs < 1:
            raise InvalidArgument("max_epochs must be >= 1")
        if self.patience < 1:
            raise InvalidArgument("patience must be >= 1")


@dataclass(frozen=True)
class TrainHistory:
    train_loss: tuple[float, ...]
    validation_loss: tuple[float, ...]
    best_epoch: int
    stopped_epoch: int


# ---------------------------------------------------------------------------
# initialization
# ---------------------------------------------------------------------------

def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _glorot_gates(
    rng: np.random.Generator, fan_in: int, units: int, n_gates: int
) -> np.ndarray:
    return np.hstack([_glorot(rng, fan_in, units) for _ in range(n_gates)])


def init_model(config: ModelConfig, seed: int = 0) -> RecurrentModel:
    """Seeded Glorot-uniform weights, zero biases, LSTM forget bias 1."""
    rng = np.random.default_rng(seed)
    F, G = config.feature_count, config.gru_units
    L, D = config.lstm_units, config.dense_units
    lstm_b = np.zeros(4 * L)
    lstm_b[L : 2 * L] = 1.0
    params = {
        "gru_W": _glorot_gates(rng, F, G, 3),
        "gru_U": _glorot_gates(rng, G, G, 3),
        "gru_bx": np.zeros(3 * G),
        "gru_bh": np.zeros(3 * G),
        "lstm_W": _glorot_gates(rng, G, L, 4),
        "lstm_U": _glorot_gates(rng, L, L, 4),
        "lstm_b": lstm_b,
        "dense_W": _glorot(rng, L, D),
        "dense_b": np.zeros(D),
        "head_W": _glorot(rng, D, 1),
        "head_b": np.zeros(1),
    }
    return RecurrentModel(config=config, params=params)


def parameter_count(model: RecurrentModel) -> int:
    return sum(p.size for p in model.params.values())


# ---------------------------------------------------------------------------
# layer forward passes
# ---------------------------------------------------------------------------

def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_hidden(h: np.ndarray, layer: str, step: int) -> None:
    # tanh-gated outputs live in [-1, 1]; NaN fails the comparison too
    if not np.all(np.abs(h) <= 1.0):
        raise NumericalError(
            f"{layer} hidden state non-finite or out of [-1, 1] at step {step}"
        )


def _gru_forward(
    params: dict[str, np.ndarray],
    x: np.ndarray,
    h0: np.ndarray | None = None,
    want_cache: bool = False,
):
    W, U = params["gru_W"], params["gru_U"]
    bx, bh = params["gru_bx"], params["gru_bh"]
    B, T, F = x.shape
    G = U.shape[0]
    if W.shape[0] != F:
        raise ShapeError(f"GRU expects {W.shape[0]} features, got {F}")
    h = np.zeros((B, G)) if h0 is None else np.broadcast_to(
        np.asarray(h0, dtype=np.float64), (B, G)
    ).copy()
    gx = (x.reshape(B * T, F) @ W).reshape(B, T, 3 * G) + bx
    hs = np.empty((B, T, G))
    cache = None
    if want_cache:
        cache = {k: np.empty((B, T, G)) for k in ("z", "r", "n", "a", "hprev")}
        cache["x"] = x
    for t in range(T):
        gh = h @ U + bh
        z = _sigmoid(gx[:, t, :G] + gh[:, :G])
        r = _sigmoid(gx[:, t, G : 2 * G] + gh[:, G : 2 * G])
        a = gh[:, 2 * G :]
        n = np.tanh(gx[:, t, 2 * G :] + r * a)
        if want_cache:
            cache["z"][:, t] = z
            cache["r"][:, t] = r
            cache["n"][:, t] = n
            cache["a"][:, t] = a
            cache["hprev"][:, t] = h
        h = (1.0 - z) * h + z * n
        _check_hidden(h, "GRU", t)
        hs[:, t] = h
    return hs, cache


def _lstm_forward(
    params: dict[str, np.ndarray],
    x: np.ndarray,
    h0: np.ndarray | None = None,
    c0: np.ndarray | None = None,
    want_cache: bool = False,
):
    W, U, b = params["lstm_W"], params["lstm_U"], params["lstm_b"]
    B, T, K = x.shape
    L = U.shape[0]
    if W.shape[0] != K:
        raise ShapeError(f"LSTM expects {W.shape[0]} inputs, got {K}")
    h = np.zeros((B, L)) if h0 is None else np.broadcast_to(
        np.asarray(h0, dtype=np.float64), (B, L)
    ).copy()
    c = np.zeros((B, L)) if c0 is None else np.broadcast_to(
        np.asarray(c0, dtype=np.float64), (B, L)
    ).copy()
    px = (x.reshape(B * T, K) @ W).reshape(B, T, 4 * L) + b
    hs = np.empty((B, T, L))
    cache = None
    if want_cache:
        cache = {
            k: np.empty((B, T, L))
            for k in ("i", "f", "o", "g", "tc", "cprev", "hprev")
        }
        cache["x"] = x
    for t in range(T):
        pre = px[:, t] + h @ U
        i = _sigmoid(pre[:, :L])
        f = _sigmoid(pre[:, L : 2 * L])
        o = _sigmoid(pre[:, 2 * L : 3 * L])
        g = np.tanh(pre[:, 3 * L :])
        if want_cache:
            cache["i"][:, t] = i
            cache["f"][:, t] = f
            cache["o"][:, t] = o
            cache["g"][:, t] = g
            cache["cprev"][:, t] = c
            cache["hprev"][:, t] = h
        c = f * c + i * g
        if not np.all(np.isfinite(c)):
            raise NumericalError(f"LSTM cell state non-finite at step {t}")
        tc = np.tanh(c)
        h = o * tc
        _check_hidden(h, "LSTM", t)
        if want_cache:
            cache["tc"][:, t] = tc
        hs[:, t] = h
    return hs, c, cache


def gru_forward(params, x_sequence, h0=None) -> np.ndarray:
    """Hidden-state sequence of a GRU over ``x_sequence``.

    Accepts one sequence (tau, F) or a batch (B, tau, F); the result
    mirrors the input's leading dimensions with the feature axis
    replaced by the hidden size.
    """
    x = np.asarray(x_sequence, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    hs, _ = _gru_forward(params, x, h0=h0)
    return hs[0] if single else hs


def lstm_forward(params, x_sequence, h0=None, c0=None):
    """(hidden sequence, final cell state) of an LSTM over ``x_sequence``."""
    x = np.asarray(x_sequence, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    hs, c, _ = _lstm_forward(params, x, h0=h0, c0=c0)
    return (hs[0], c[0]) if single else (hs, c)


# ---------------------------------------------------------------------------
# full model forward / backward
# ---------------------------------------------------------------------------

def draw_dropout_masks(
    config: ModelConfig, batch_size: int, rng: np.random.Generator | None
):
    """Inverted-dropout masks for the GRU output sequence and the final
    LSTM state; None when the rate is zero or no generator is given."""
    if rng is None or config.dropout_rate <= 0.0:
        return None
    keep = 1.0 - config.dropout_rate
    seq = (rng.random((batch_size, config.lookback, config.gru_units)) < keep)
    state = (rng.random((batch_size, config.lstm_units)) < keep)
    return seq / keep, state / keep


def _forward(model: RecurrentModel, x: np.ndarray, masks, want_cache: bool):
    cfg = model.config
    if x.ndim != 3:
        raise ShapeError(f"batch must be B x tau x F, got shape {x.shape}")
    if x.shape[1] != cfg.lookback or x.shape[2] != cfg.feature_count:
        raise ShapeError(
            f"batch windows are {x.shape[1]} x {x.shape[2]}, model expects "
            f"{cfg.lookback} x {cfg.feature_count}"
        )
    if not np.all(np.isfinite(x)):
        raise NumericalError("non-finite values in input batch")
    p = model.params
    hs, gru_cache = _gru_forward(p, x, want_cache=want_cache)
    seq = hs * masks[0] if masks is not None else hs
    lstm_hs, _, lstm_cache = _lstm_forward(p, seq, want_cache=want_cache)
    h_final = lstm_hs[:, -1]
    hd = h_final * masks[1] if masks is not None else h_final
    dense_pre = hd @ p["dense_W"] + p["dense_b"]
    dense_out = np.maximum(dense_pre, 0.0)
    pred = dense_out @ p["head_W"] + p["head_b"]
    if not np.all(np.isfinite(pred)):
        raise NumericalError("non-finite prediction")
    cache = None
    if want_cache:
        cache = {
            "gru": gru_cache,
            "lstm": lstm_cache,
            "dense_in": hd,
            "dense_pre": dense_pre,
            "dense_out": dense_out,
        }
    return pred, cache


def model_forward(
    model: RecurrentModel, batch, dropout_rng: np.random.Generator | None = None
) -> np.ndarray:
    """Predictions (B, 1) for a batch of lag windows.

    Evaluation mode (no dropout) when ``dropout_rng`` is None; passing a
    seeded generator enables train-mode inverted dropout, reproducible
    for a fixed seed.
    """
    x = np.asarray(batch, dtype=np.float64)
    masks = draw_dropout_masks(model.config, x.shape[0], dropout_rng)
    pred, _ = _forward(model, x, masks, want_cache=False)
    return pred


def _gru_backward(params, cache, dhs):
    U = params["gru_U"]
    x = cache["x"]
    B, T, F = x.shape
    G = U.shape[0]
    dgx = np.empty((B, T, 3 * G))
    dgh = np.empty((B, T, 3 * G))
    dh_next = np.zeros((B, G))
    for t in range(T - 1, -1, -1):
        z = cache["z"][:, t]
        r = cache["r"][:, t]
        n = cache["n"][:, t]
        a = cache["a"][:, t]
        hprev = cache["hprev"][:, t]
        dh = dhs[:, t] + dh_next
        dz = dh * (n - hprev)
        dpre_n = dh * z * (1.0 - n * n)
        dpre_r = dpre_n * a * r * (1.0 - r)
        dpre_z = dz * z * (1.0 - z)
        dgx[:, t, :G] = dpre_z
        dgx[:, t, G : 2 * G] = dpre_r
        dgx[:, t, 2 * G :] = dpre_n
        dgh[:, t, :G] = dpre_z
        dgh[:, t, G : 2 * G] = dpre_r
        dgh[:, t, 2 * G :] = dpre_n * r
        dh_next = dh * (1.0 - z) + dgh[:, t] @ U.T
    flat_gx = dgx.reshape(B * T, 3 * G)
    flat_gh = dgh.reshape(B * T, 3 * G)
    return {
        "gru_W": x.reshape(B * T, F).T @ flat_gx,
        "gru_U": cache["hprev"].reshape(B * T, G).T @ flat_gh,
        "gru_bx": flat_gx.sum(axis=0),
        "gru_bh": flat_gh.sum(axis=0),
    }


def _lstm_backward(params, cache, dh_last):
    W, U = params["lstm_W"], params["lstm_U"]
    x = cache["x"]
    B, T, K = x.shape
    L = U.shape[0]
    dpre = np.empty((B, T, 4 * L))
    dh = dh_last
    dc = np.zeros((B, L))
    for t in range(T - 1, -1, -1):
        i = cache["i"][:, t]
        f = cache["f"][:, t]
        o = cache["o"][:, t]
        g = cache["g"][:, t]
        tc = cache["tc"][:, t]
        cprev = cache["cprev"][:, t]
        dc = dc + dh * o * (1.0 - tc * tc)
        dpre[:, t, :L] = dc * g * i * (1.0 - i)
        dpre[:, t, L : 2 * L] = dc * cprev * f * (1.0 - f)
        dpre[:, t, 2 * L : 3 * L] = dh * tc * o * (1.0 - o)
        dpre[:, t, 3 * L :] = dc * i * (1.0 - g * g)
        dh = dpre[:, t] @ U.T
        dc = dc * f
    flat = dpre.reshape(B * T, 4 * L)
    grads = {
        "lstm_W": x.reshape(B * T, K).T @ flat,
        "lstm_U": cache["hprev"].reshape(B * T, L).T @ flat,
        "lstm_b": flat.sum(axis=0),
    }
    dx = (flat @ W.T).reshape(B, T, K)
    return dx, grads


def backward(model: RecurrentModel, batch, targets, masks=None):
    """MSE loss and its gradient for every parameter, via full BPTT.

    ``masks`` must be the exact dropout masks used in the corresponding
    forward pass (None for evaluation-mode gradients); pre-draw them
    with :func:`draw_dropout_masks`.

    Returns (gradients keyed like ``model.params``, scalar loss).
    """
    x = np.asarray(batch, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ShapeError(
            f"{x.shape[0]} windows but {y.shape[0]} targets"
        )
    pred, cache = _forward(model, x, masks, want_cache=True)
    resid = pred[:, 0] - y
    B = x.shape[0]
    loss = float(resid @ resid) / B
    p = model.params
    grads: dict[str, np.ndarray] = {}

    dpred = (2.0 / B) * resid[:, None]
    grads["head_W"] = cache["dense_out"].T @ dpred
    grads["head_b"] = dpred.sum(axis=0)
    ddense = (dpred @ p["head_W"].T) * (cache["dense_pre"] > 0.0)
    grads["dense_W"] = cache["dense_in"].T @ ddense
    grads["dense_b"] = ddense.sum(axis=0)
    dhd = ddense @ p["dense_W"].T
    dh_final = dhd * masks[1] if masks is not None else dhd
    dseq, lstm_grads = _lstm_backward(p, cache["lstm"], dh_final)
    grads.update(lstm_grads)
    dhs = dseq * masks[0] if masks is not None else dseq
    grads.update(_gru_backward(p, cache["gru"], dhs))
    return grads, loss


# ---------------------------------------------------------------------------
# optimization
# ---------------------------------------------------------------------------

def adam_init(
    params: dict[str, np.ndarray],
    learning_rate: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    epsilon: float = 1e-8,
) -> AdamState:
    return AdamState(
        learning_rate=learning_rate,
        beta1=beta1,
        beta2=beta2,
        epsilon=epsilon,
        step=0,
        m={k: np.zeros_like(v) for k, v in params.items()},
        v={k: np.zeros_like(v) for k, v in params.items()},
    )


def adam_step(state: AdamState, params, grads):
    """One bias-corrected Adam update, in place; returns (params, state)."""
    state.step += 1
    c1 = 1.0 - state.beta1 ** state.step
    c2 = 1.0 - state.beta2 ** state.step
    for key, p in params.items():
        g = grads[key]
        m = state.m[key]
        v = state.v[key]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= state.learning_rate * (m / c1) / (np.sqrt(v / c2) + state.epsilon)
    return params, state


class EarlyStopping:
    """Stop after `patience` epochs without strict improvement."""

    def __init__(self, patience: int):
        if patience < 1:
            raise InvalidArgument("patience must be >= 1")
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.epochs_without_improvement = 0

    def update(self, epoch: int, loss: float) -> bool:
        """Record one epoch's validation loss; True means stop now."""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.epochs_without_improvement = 0
            return False
        self.epochs_without_improvement += 1
        return self.epochs_without_improvement >= self.patience


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

def _window_arrays(windows) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(windows, LagWindowSet):
        return windows.inputs, windows.targets
    x, y = windows
    return np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)


def predict(model: RecurrentModel, inputs, batch_size: int = 512) -> np.ndarray:
    """Evaluation-mode predictions flattened to shape (S,)."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.shape[0] == 0:
        return np.empty(0)
    chunks = [
        model_forward(model, x[s : s + batch_size])
        for s in range(0, x.shape[0], batch_size)
    ]
    return np.concatenate(chunks, axis=0)[:, 0]


def evaluate_mse(model: RecurrentModel, inputs, targets) -> float:
    y = np.asarray(targets, dtype=np.float64).reshape(-1)
    resid = predict(model, inputs) - y
    return float(resid @ resid) / y.shape[0]


def _copy_params(params: dict[str, np.ndarray]) -> dict[str, np.ndarray]:
    return {k: v.copy() for k, v in params.items()}


def train(
    model: RecurrentModel,
    train_windows,
    validation_windows,
    config: TrainConfig,
) -> tuple[RecurrentModel, TrainHistory]:
    """Minibatch Adam with seeded shuffling and early stopping.

    Each epoch shuffles the training samples, runs train-mode
    forward/backward/Adam per minibatch, then measures validation MSE in
    evaluation mode.  Stops after `config.patience` epochs without
    improvement (or at max_epochs) and restores the best epoch's
    weights, so the returned model never validates worse than any epoch
    seen.  One generator seeded with `config.seed` drives both shuffling
    and dropout, making runs exactly repeatable.
    """
    x_tr, y_tr = _window_arrays(train_windows)
    x_va, y_va = _window_arrays(validation_windows)
    if x_tr.shape[0] == 0:
        raise EmptySplit("no training samples")
    if x_va.shape[0] == 0:
        raise EmptySplit("no validation samples")
    rng = np.random.default_rng(config.seed)
    state = adam_init(model.params, learning_rate=config.learning_rate)
    stopper = EarlyStopping(config.patience)
    best = _copy_params(model.params)
    train_losses: list[float] = []
    val_losses: list[float] = []
    n = x_tr.shape[0]
    stopped = 0
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        sse = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            masks = draw_dropout_masks(model.config, idx.size, rng)
            try:
                grads, loss = backward(model, x_tr[idx], y_tr[idx], masks)
                adam_step(state, model.params, grads)
            except NumericalError as exc:
                raise NumericalError(f"epoch {epoch}: {exc}") from exc
            sse += loss * idx.size
        train_losses.append(sse / n)
        val_loss = evaluate_mse(model, x_va, y_va)
        val_losses.append(val_loss)
        improved = val_loss < stopper.best_loss
        should_stop = stopper.update(epoch, val_loss)
        if improved:
            best = _copy_params(model.params)
        stopped = epoch
        if should_stop:
            break
    model.params = best
    return model, TrainHistory(
        train_loss=tuple(train_losses),
        validation_loss=tuple(val_losses),
        best_epoch=stopper.best_epoch,
        stopped_epoch=stopped,
    )


# ---------------------------------------------------------------------------
# checkpointing
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Checkpoint:
    """A trained model plus everything needed to predict on raw data.

    ``lead`` is in months (the reporting unit); ``lead_steps`` is the
    same horizon in dataset timesteps (equal for monthly data).
    """

    model: RecurrentModel
    features: tuple[str, ...] = ()
    target: str | None = None
    lead: int | None = None
    lead_steps: int | None = None
    frequency: Frequency | None = None
    normalization: NormalizationStats | None = None
    train_config: TrainConfig | None = None
    method: str | None = None


def _encode_array(a: np.ndarray) -> dict:
    data = np.ascontiguousarray(a, dtype="<f8")
    return {
        "shape": list(a.shape),
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(d: dict) -> np.ndarray:
    flat = np.frombuffer(base64.b64decode(d["data"]), dtype="<f8")
    return flat.reshape([int(s) for s in d["shape"]]).copy()


def save_checkpoint(path, checkpoint: Checkpoint) -> None:
    ck = checkpoint
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model": {
            "config": asdict(ck.model.config),
            "params": {k: _encode_array(v) for k, v in ck.model.params.items()},
        },
        "features": list(ck.features),
        "target": ck.target,
        "lead": ck.lead,
        "lead_steps": ck.lead_steps,
        "frequency": ck.frequency.value if ck.frequency is not None else None,
        "normalization": (
            ck.normalization.to_dict() if ck.normalization is not None else None
        ),
        "train_config": asdict(ck.train_config) if ck.train_config else None,
        "method": ck.method,
    }
    Path(path).write_text(json.dumps(blob, indent=2) + "\n")


def load_checkpoint(path) -> Checkpoint:
    blob = json.loads(Path(path).read_text())
    if blob.get("format") != CHECKPOINT_FORMAT:
        raise ParseError(f"{path} is not a {CHECKPOINT_FORMAT} file")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise ParseError(
            f"unsupported checkpoint version {blob.get('version')!r}"
        )
    model = RecurrentModel(
        config=ModelConfig(**blob["model"]["config"]),
        params={k: _decode_array(v) for k, v in blob["model"]["params"].items()},
    )
    return Checkpoint(
        model=model,
        features=tuple(blob.get("features", ())),
        target=blob.get("target"),
        lead=blob.get("lead"),
        lead_steps=blob.get("lead_steps"),
        frequency=(
            Frequency(blob["frequency"]) if blob.get("frequency") else None
        ),
        normalization=(
            NormalizationStats.from_dict(blob["normalization"])
            if blob.get("normalization")
            else None
        ),
        train_config=(
            TrainConfig(**blob["train_config"])
            if blob.get("train_config")
            else None
        ),
        method=blob.get("method"),
    )
