"""From-scratch LSTM sequence classifier over binary blockage streams.

One bit enters per time step (input dimension 1); the final hidden state
feeds a dense softmax over the count classes. Everything is double
precision and deterministic given the seed: initialization, shuffling,
batched backpropagation through time, and classical-momentum SGD are all
implemented here with plain numpy arrays.

Gate order throughout is (input, forget, cell candidate, output).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    BlockageSequence,
    FileFormatError,
    LabeledDataset,
    ModelMismatchError,
    atomic_write_text,
)

GATE_NAMES = ("input", "forget", "cell", "output")
MODEL_FORMAT_VERSION = 1
_PROB_FLOOR = 1e-12


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # clip keeps exp() in range; sigmoid saturates to exactly 0/1 well inside +-60
    return 1.0 / (1.0 + np.exp(-np.clip(x, -60.0, 60.0)))


def _softmax_columns(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=0, keepdims=True)
    expd = np.exp(shifted)
    return expd / expd.sum(axis=0, keepdims=True)


@dataclass
class LstmParams:
    """All learned parameters. Arrays are float64 and mutually consistent.

    w_x   (4, hidden)          per-gate input weights (input dimension 1)
    w_h   (4, hidden, hidden)  per-gate recurrent weights
    b     (4, hidden)          per-gate biases
    w_out (classes, hidden)    dense softmax layer
    b_out (classes,)
    """

    w_x: np.ndarray
    w_h: np.ndarray
    b: np.ndarray
    w_out: np.ndarray
    b_out: np.ndarray

    def __post_init__(self):
        hidden = self.w_x.shape[-1]
        classes = self.b_out.shape[0]
        expected = {
            "w_x": (4, hidden),
            "w_h": (4, hidden, hidden),
            "b": (4, hidden),
            "w_out": (classes, hidden),
            "b_out": (classes,),
        }
        for name, shape in expected.items():
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.shape != shape:
                raise ValueError(f"{name} has shape {arr.shape}, expected {shape}")
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} contains non-finite entries")
            setattr(self, name, arr)

    @property
    def hidden(self) -> int:
        return self.w_x.shape[1]

    @property
    def classes(self) -> int:
        return self.b_out.shape[0]

    def arrays(self) -> dict[str, np.ndarray]:
        return {
            "w_x": self.w_x,
            "w_h": self.w_h,
            "b": self.b,
            "w_out": self.w_out,
            "b_out": self.b_out,
        }

    def copy(self) -> "LstmParams":
        return LstmParams(**{k: v.copy() for k, v in self.arrays().items()})


def zeros_like_params(params: LstmParams) -> LstmParams:
    return LstmParams(**{k: np.zeros_like(v) for k, v in params.arrays().items()})


def init_params(hidden: int, classes: int, rng: np.random.Generator) -> LstmParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights; forget bias 1, others 0."""
    if hidden < 1 or classes < 2:
        raise ValueError("need hidden >= 1 and at least two classes")

    def uniform(shape, fan_in, fan_out):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-limit, limit, size=shape)

    b = np.zeros((4, hidden))
    b[GATE_NAMES.index("forget")] = 1.0
    return LstmParams(
        w_x=uniform((4, hidden), 1, hidden),
        w_h=uniform((4, hidden, hidden), hidden, hidden),
        b=b,
        w_out=uniform((classes, hidden), hidden, classes),
        b_out=np.zeros(classes),
    )


@dataclass(frozen=True)
class TrainHyper:
    """SGDM hyperparameters. clip_norm is an escape hatch, off by default."""

    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 120
    batch_size: int = 15
    rng_seed: int = 0
    clip_norm: float | None = None

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must be in [0, 1)")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")


@dataclass
class OptimizerState:
    """Classical-momentum velocity, shape-congruent with the parameters."""

    velocity: LstmParams

    @classmethod
    def zeros(cls, params: LstmParams) -> "OptimizerState":
        return cls(velocity=zeros_like_params(params))


# ---------------------------------------------------------------------------
# Forward pass
# ---------------------------------------------------------------------------

def lstm_step(
    x: float, h: np.ndarray, c: np.ndarray, params: LstmParams
) -> tuple[np.ndarray, np.ndarray]:
    """One recurrence step: returns (h', c') for scalar input bit x."""
    pre = params.w_x * x + params.w_h @ h + params.b  # (4, hidden)
    i = _sigmoid(pre[0])
    f = _sigmoid(pre[1])
    g = np.tanh(pre[2])
    o = _sigmoid(pre[3])
    for name, gate in zip(GATE_NAMES, (i, f, g, o)):
        if not np.isfinite(gate).all():
            raise FloatingPointError(f"non-finite {name} gate activation")
    c_next = f * c + i * g
    h_next = o * np.tanh(c_next)
    return h_next, c_next


def _forward_batch(X: np.ndarray, params: LstmParams, need_cache: bool = True):
    """Batched forward over X of shape (w, batch); returns (probs, cache).

    probs has shape (classes, batch). The cache holds everything the
    backward pass re-reads: per-step gate activations, cell states, their
    tanh, and hidden states.
    """
    steps, batch = X.shape
    hidden = params.hidden
    w_h_flat = params.w_h.reshape(4 * hidden, hidden)
    pre_x = (
        params.w_x.reshape(4 * hidden)[None, :, None] * X[:, None, :]
        + params.b.reshape(4 * hidden)[None, :, None]
    )  # (w, 4*hidden, batch)

    if need_cache:
        gates = np.empty((steps, 4, hidden, batch))
        cells = np.empty((steps, hidden, batch))
        cells_tanh = np.empty((steps, hidden, batch))
        hiddens = np.empty((steps, hidden, batch))

    h = np.zeros((hidden, batch))
    c = np.zeros((hidden, batch))
    for t in range(steps):
        pre = (w_h_flat @ h + pre_x[t]).reshape(4, hidden, batch)
        i = _sigmoid(pre[0])
        f = _sigmoid(pre[1])
        g = np.tanh(pre[2])
        o = _sigmoid(pre[3])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        if need_cache:
            gates[t, 0], gates[t, 1], gates[t, 2], gates[t, 3] = i, f, g, o
            cells[t] = c
            cells_tanh[t] = tc
            hiddens[t] = h

    probs = _softmax_columns(params.w_out @ h + params.b_out[:, None])
    cache = (X, gates, cells, cells_tanh, hiddens) if need_cache else None
    return probs, cache


def forward(sequence: BlockageSequence, params: LstmParams) -> np.ndarray:
    """Class probability vector for one sequence, from zero initial state."""
    X = sequence.bits.astype(np.float64)[:, None]
    probs, _ = _forward_batch(X, params, need_cache=False)
    return probs[:, 0]


def cross_entropy(probs: np.ndarray, label: int) -> float:
    """Negative log probability of the true class, floored at 1e-12."""
    probs = np.asarray(probs)
    if not 0 <= label < probs.shape[0]:
        raise ValueError(f"label {label} out of range for {probs.shape[0]} classes")
    return float(-np.log(max(float(probs[label]), _PROB_FLOOR)))


# ---------------------------------------------------------------------------
# Backward pass (reverse accumulation through all steps)
# ---------------------------------------------------------------------------

def _backward_batch(
    probs: np.ndarray, labels: np.ndarray, cache, params: LstmParams
) -> LstmParams:
    """Mean-over-batch gradients of the cross-entropy loss."""
    X, gates, cells, cells_tanh, hiddens = cache
    steps, _, hidden, batch = gates.shape
    w_h_flat_T = params.w_h.reshape(4 * hidden, hidden).T

    d_logits = probs.copy()
    d_logits[labels, np.arange(batch)] -= 1.0
    d_logits /= batch

    d_w_out = d_logits @ hiddens[-1].T
    d_b_out = d_logits.sum(axis=1)

    dh = params.w_out.T @ d_logits
    dc = np.zeros((hidden, batch))
    d_pre = np.empty((steps, 4, hidden, batch))
    for t in range(steps - 1, -1, -1):
        i, f, g, o = gates[t]
        tc = cells_tanh[t]
        do = dh * tc
        dc = dc + dh * o * (1.0 - tc * tc)
        di = dc * g
        dg = dc * i
        if t > 0:
            df = dc * cells[t - 1]
        else:
            df = np.zeros_like(dc)  # initial cell state is zero
        d_pre[t, 0] = di * i * (1.0 - i)
        d_pre[t, 1] = df * f * (1.0 - f)
        d_pre[t, 2] = dg * (1.0 - g * g)
        d_pre[t, 3] = do * o * (1.0 - o)
        dh = w_h_flat_T @ d_pre[t].reshape(4 * hidden, batch)
        dc = dc * f

    h_prev = np.concatenate([np.zeros((1, hidden, batch)), hiddens[:-1]])
    grads = LstmParams(
        w_x=np.einsum("tghb,tb->gh", d_pre, X),
        w_h=np.einsum("tgab,tcb->gac", d_pre, h_prev),
        b=d_pre.sum(axis=(0, 3)),
        w_out=d_w_out,
        b_out=d_b_out,
    )
    for name, arr in grads.arrays().items():
        if not np.isfinite(arr).all():
            raise FloatingPointError(f"non-finite gradient in {name}")
    return grads


def backward(
    sequence: BlockageSequence, label: int, params: LstmParams
) -> LstmParams:
    """Exact gradients of cross_entropy(forward(sequence), label)."""
    X = sequence.bits.astype(np.float64)[:, None]
    probs, cache = _forward_batch(X, params)
    if not 0 <= label < params.classes:
        raise ValueError(f"label {label} out of range for {params.classes} classes")
    return _backward_batch(probs, np.array([label]), cache, params)


# ---------------------------------------------------------------------------
# Optimization and training
# ---------------------------------------------------------------------------

def sgdm_step(
    params: LstmParams,
    grads: LstmParams,
    state: OptimizerState,
    hyper: TrainHyper,
) -> tuple[LstmParams, OptimizerState]:
    """Classical momentum: v <- momentum*v - lr*grad; params <- params + v."""
    new_velocity = {}
    new_params = {}
    for name, p in params.arrays().items():
        v = hyper.momentum * state.velocity.arrays()[name]
        v -= hyper.learning_rate * grads.arrays()[name]
        new_velocity[name] = v
        new_params[name] = p + v
    return LstmParams(**new_params), OptimizerState(LstmParams(**new_velocity))


def _clip_gradients(grads: LstmParams, max_norm: float) -> LstmParams:
    total = math.sqrt(sum(float((a * a).sum()) for a in grads.arrays().values()))
    if total <= max_norm or total == 0.0:
        return grads
    scale = max_norm / total
    return LstmParams(**{k: v * scale for k, v in grads.arrays().items()})


def _dataset_matrix(dataset: LabeledDataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.stack([s.sequence.bits for s in dataset.samples]).T.astype(np.float64)
    y = np.array([s.label for s in dataset.samples], dtype=np.intp)
    return X, y


def _mean_loss(X: np.ndarray, y: np.ndarray, params: LstmParams, chunk: int = 256) -> float:
    total = 0.0
    for start in range(0, X.shape[1], chunk):
        cols = slice(start, start + chunk)
        probs, _ = _forward_batch(X[:, cols], params, need_cache=False)
        picked = np.maximum(probs[y[cols], np.arange(probs.shape[1])], _PROB_FLOOR)
        total += float(-np.log(picked).sum())
    return total / X.shape[1]


@dataclass
class LstmModel:
    """Trained classifier plus the metadata needed to apply and persist it."""

    params: LstmParams
    window_slots: int
    slot_duration: float
    train_config: dict = field(default_factory=dict)

    @property
    def hidden(self) -> int:
        return self.params.hidden

    @property
    def classes(self) -> int:
        return self.params.classes


def train(
    dataset: LabeledDataset,
    hidden: int,
    hyper: TrainHyper,
    classes: int | None = None,
) -> tuple[LstmModel, list[float]]:
    """Train with per-epoch shuffling and mean-of-batch gradients.

    The returned loss curve has epochs+1 entries: entry 0 is the dataset
    mean loss before any update, entry e the mean training loss seen during
    epoch e. Identical (dataset, hidden, hyper) give bit-identical models.
    """
    if len(dataset) == 0:
        raise ValueError("cannot train on an empty dataset")
    n_classes = dataset.classes + 1
    if classes is not None and classes != n_classes:
        raise ValueError(f"arch declares {classes} classes but dataset has {n_classes}")

    X_all, y_all = _dataset_matrix(dataset)
    n = X_all.shape[1]
    rng = np.random.default_rng(hyper.rng_seed)
    params = init_params(hidden, n_classes, rng)
    state = OptimizerState.zeros(params)

    loss_log = [_mean_loss(X_all, y_all, params)]
    for _ in range(hyper.epochs):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, hyper.batch_size):
            batch = order[start : start + hyper.batch_size]
            probs, cache = _forward_batch(X_all[:, batch], params)
            picked = np.maximum(probs[y_all[batch], np.arange(batch.size)], _PROB_FLOOR)
            epoch_loss += float(-np.log(picked).sum())
            grads = _backward_batch(probs, y_all[batch], cache, params)
            if hyper.clip_norm is not None:
                grads = _clip_gradients(grads, hyper.clip_norm)
            params, state = sgdm_step(params, grads, state, hyper)
        loss_log.append(epoch_loss / n)

    model = LstmModel(
        params=params,
        window_slots=dataset.w,
        slot_duration=dataset.slot_duration,
        train_config={
            "hidden": hidden,
            "learning_rate": hyper.learning_rate,
            "momentum": hyper.momentum,
            "epochs": hyper.epochs,
            "batch_size": hyper.batch_size,
            "rng_seed": hyper.rng_seed,
        },
    )
    return model, loss_log


def predict(model: LstmModel, sequence: BlockageSequence) -> int:
    """Count estimate: argmax class, ties broken toward the smaller index."""
    if sequence.w != model.window_slots:
        raise ModelMismatchError(
            f"sequence has {sequence.w} slots but the model was trained on "
            f"{model.window_slots}"
        )
    if not math.isclose(sequence.slot_duration, model.slot_duration, abs_tol=1e-9):
        raise ModelMismatchError(
            f"sequence slot duration {sequence.slot_duration} s does not match "
            f"the model's {model.slot_duration} s"
        )
    return int(np.argmax(forward(sequence, model.params)))


def predict_batch(model: LstmModel, sequences: Sequence[BlockageSequence]) -> list[int]:
    """predict() over many sequences with one batched forward pass."""
    for seq in sequences:
        if seq.w != model.window_slots:
            raise ModelMismatchError(
                f"sequence has {seq.w} slots but the model was trained on "
                f"{model.window_slots}"
            )
    if not sequences:
        return []
    X = np.stack([s.bits for s in sequences]).T.astype(np.float64)
    probs, _ = _forward_batch(X, model.params, need_cache=False)
    return [int(k) for k in probs.argmax(axis=0)]


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_model(model: LstmModel, path: str | os.PathLike) -> None:
    """Self-describing JSON document; floats keep full round-trip precision."""
    document = {
        "format_version": MODEL_FORMAT_VERSION,
        "architecture": {
            "hidden": model.hidden,
            "classes": model.classes,
            "window_slots": model.window_slots,
            "slot_duration": model.slot_duration,
        },
        "training": model.train_config,
        "weights": {
            "input_weights": model.params.w_x.tolist(),
            "recurrent_weights": model.params.w_h.tolist(),
            "gate_biases": model.params.b.tolist(),
            "dense_weights": model.params.w_out.tolist(),
            "dense_bias": model.params.b_out.tolist(),
        },
    }
    atomic_write_text(path, json.dumps(document, sort_keys=True, indent=1) + "\n")


def load_model(path: str | os.PathLike) -> LstmModel:
    try:
        with open(path) as handle:
            document = json.load(handle)
    except OSError as exc:
        raise FileFormatError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: corrupt model file ({exc})") from exc
    try:
        version = document["format_version"]
        if version != MODEL_FORMAT_VERSION:
            raise FileFormatError(
                f"{path}: model format version {version} is not supported "
                f"(expected {MODEL_FORMAT_VERSION})"
            )
        arch = document["architecture"]
        weights = document["weights"]
        params = LstmParams(
            w_x=np.array(weights["input_weights"]),
            w_h=np.array(weights["recurrent_weights"]),
            b=np.array(weights["gate_biases"]),
            w_out=np.array(weights["dense_weights"]),
            b_out=np.array(weights["dense_bias"]),
        )
        if params.hidden != arch["hidden"] or params.classes != arch["classes"]:
            raise FileFormatError(
                f"{path}: weight shapes do not match the declared architecture"
            )
        return LstmModel(
            params=params,
            window_slots=int(arch["window_slots"]),
            slot_duration=float(arch["slot_duration"]),
            train_config=dict(document.get("training", {})),
        )
    except FileFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FileFormatError(f"{path}: corrupt model file ({exc})") from exc
