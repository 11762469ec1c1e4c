"""Fully connected regression network trained by backpropagation.

Weights are stored per layer as ``(fan_out, fan_in)`` matrices, so a batch
``X`` of shape ``(m, fan_in)`` moves forward as ``X @ W.T + b``.  Hidden layers
share one activation; the single output unit is linear.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .dataset import (
    N_FEATURES,
    Dataset,
    NormalizationStats,
    denormalize_target,
    normalize_features,
)
from .errors import (
    BadArchitecture,
    CorruptModel,
    DimensionMismatch,
    EmptyBatch,
    InvalidConfig,
    NonFiniteLoss,
    SchemaVersionMismatch,
)

FORMAT_NAME = "cakenet-mlp"
FORMAT_VERSION = "1"
DEFAULT_HIDDEN = (10,)
DEFAULT_ACTIVATION = "tanh"


def _sigmoid(z):
    # split by sign so exp never overflows
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _sigmoid_grad(z, a):
    return a * (1.0 - a)


def _tanh_grad(z, a):
    return 1.0 - a * a


def _relu(z):
    return np.maximum(z, 0.0)


def _relu_grad(z, a):
    return (z > 0).astype(float)


# name -> (activation, derivative given pre-activation and activation)
ACTIVATIONS = {
    "sigmoid": (_sigmoid, _sigmoid_grad),
    "tanh": (np.tanh, _tanh_grad),
    "relu": (_relu, _relu_grad),
}


@dataclass(frozen=True, eq=False)
class MlpModel:
    """Immutable network parameters plus the standardization stats used to train them.

    Any input width is accepted here so that small hand-built networks can be
    analysed; :func:`init_model` and :func:`predict` insist on the seven
    filtration features.
    """

    weights: tuple
    biases: tuple
    hidden_activation: str = DEFAULT_ACTIVATION
    norm_stats: Optional[NormalizationStats] = None
    output_activation = "identity"

    def __post_init__(self):
        if self.hidden_activation not in ACTIVATIONS:
            raise BadArchitecture(
                f"unknown activation {self.hidden_activation!r}; choose from {sorted(ACTIVATIONS)}"
            )
        weights = tuple(np.array(w, dtype=float) for w in self.weights)
        biases = tuple(np.array(b, dtype=float).reshape(-1) for b in self.biases)
        if not weights:
            raise BadArchitecture("a model needs at least one weight matrix")
        if len(weights) != len(biases):
            raise BadArchitecture(f"{len(weights)} weight matrices but {len(biases)} bias vectors")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
                raise BadArchitecture(f"layer {i}: weight matrix has shape {w.shape}")
            if b.shape != (w.shape[0],):
                raise BadArchitecture(f"layer {i}: bias length {b.shape[0]} != fan_out {w.shape[0]}")
            if i > 0 and w.shape[1] != weights[i - 1].shape[0]:
                raise BadArchitecture(
                    f"layer {i}: fan_in {w.shape[1]} != previous fan_out {weights[i - 1].shape[0]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise BadArchitecture(f"layer {i}: non-finite parameters")
        if weights[-1].shape[0] != 1:
            raise BadArchitecture(f"output layer must have one unit, has {weights[-1].shape[0]}")
        for arr in weights + biases:
            arr.setflags(write=False)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "biases", biases)

    @property
    def layer_sizes(self) -> tuple:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    @property
    def n_parameters(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def replace(self, weights=None, biases=None, norm_stats=None) -> MlpModel:
        return MlpModel(
            self.weights if weights is None else weights,
            self.biases if biases is None else biases,
            self.hidden_activation,
            self.norm_stats if norm_stats is None else norm_stats,
        )

    def same_parameters(self, other: MlpModel) -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and self.hidden_activation == other.hidden_activation
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


def _check_layer_sizes(layer_sizes):
    sizes = list(layer_sizes)
    if len(sizes) < 2:
        raise BadArchitecture(f"need at least input and output layers, got {sizes}")
    for s in sizes:
        if isinstance(s, bool) or not isinstance(s, (int, np.integer)) or s < 1:
            raise BadArchitecture(f"layer sizes must be positive integers, got {sizes}")
    if sizes[0] != N_FEATURES:
        raise BadArchitecture(f"first layer must have {N_FEATURES} inputs, got {sizes[0]}")
    if sizes[-1] != 1:
        raise BadArchitecture(f"last layer must have 1 output, got {sizes[-1]}")
    return [int(s) for s in sizes]


def init_model(layer_sizes=(N_FEATURES,) + DEFAULT_HIDDEN + (1,), hidden_activation=DEFAULT_ACTIVATION,
               seed=0, norm_stats=None) -> MlpModel:
    """Glorot-uniform weights drawn layer by layer from ``default_rng(seed)``; zero biases."""
    sizes = _check_layer_sizes(layer_sizes)
    if hidden_activation not in ACTIVATIONS:
        raise BadArchitecture(f"unknown activation {hidden_activation!r}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return MlpModel(tuple(weights), tuple(biases), hidden_activation, norm_stats)


def _as_batch(model, x):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.ndim != 2 or x.shape[1] != model.layer_sizes[0]:
        raise DimensionMismatch(f"model expects {model.layer_sizes[0]} inputs, got shape {np.shape(x)}")
    return x, single


def _forward_pass(weights, biases, activation, x):
    """Return pre-activations and activations for every layer (activations[0] is the input)."""
    act, _ = ACTIVATIONS[activation]
    zs, activations = [], [x]
    last = len(weights) - 1
    for i, (w, b) in enumerate(zip(weights, biases)):
        z = activations[-1] @ w.T + b
        zs.append(z)
        activations.append(z if i == last else act(z))
    return zs, activations


def forward(model: MlpModel, features):
    """Network output in normalized target space; a float for one row, an array for a batch."""
    x, single = _as_batch(model, features)
    out = _forward_pass(model.weights, model.biases, model.hidden_activation, x)[1][-1][:, 0]
    return float(out[0]) if single else out


class Gradients(NamedTuple):
    loss: float
    weights: tuple
    biases: tuple


def _backprop(weights, biases, activation, x, y):
    _, act_grad = ACTIVATIONS[activation]
    m = x.shape[0]
    zs, activations = _forward_pass(weights, biases, activation, x)
    resid = activations[-1][:, 0] - y
    loss = float(np.mean(resid * resid))

    n_layers = len(weights)
    grad_w = [None] * n_layers
    grad_b = [None] * n_layers
    delta = (2.0 / m) * resid[:, None]
    for i in range(n_layers - 1, -1, -1):
        grad_w[i] = delta.T @ activations[i]
        grad_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ weights[i]) * act_grad(zs[i - 1], activations[i])
    return Gradients(loss, tuple(grad_w), tuple(grad_b))


def gradients(model: MlpModel, features, targets) -> Gradients:
    """Loss ``mean((yhat - y)**2)`` over the batch and its exact gradient by reverse accumulation."""
    x, _ = _as_batch(model, features)
    y = np.asarray(targets, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise EmptyBatch("cannot differentiate the loss of an empty batch")
    if y.shape[0] != x.shape[0]:
        raise DimensionMismatch(f"{x.shape[0]} feature rows but {y.shape[0]} targets")
    return _backprop(model.weights, model.biases, model.hidden_activation, x, y)


def loss(model: MlpModel, features, targets) -> float:
    pred = forward(model, np.atleast_2d(features))
    resid = pred - np.asarray(targets, dtype=float).reshape(-1)
    return float(np.mean(resid * resid))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    momentum: float = 0.9
    epochs: int = 150
    batch_size: Optional[int] = None  # None trains full-batch
    seed: int = 0
    init_scheme: str = "uniform_glorot"
    early_stop_patience: Optional[int] = None
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        lr = self.learning_rate
        if not (isinstance(lr, (int, float)) and math.isfinite(lr) and lr >= 0):
            raise InvalidConfig(f"learning_rate must be a finite value >= 0, got {lr!r}")
        if not (isinstance(self.momentum, (int, float)) and 0.0 <= self.momentum < 1.0):
            raise InvalidConfig(f"momentum must lie in [0, 1), got {self.momentum!r}")
        if isinstance(self.epochs, bool) or not isinstance(self.epochs, int) or self.epochs < 1:
            raise InvalidConfig(f"epochs must be a positive integer, got {self.epochs!r}")
        bs = self.batch_size
        if bs is not None and (isinstance(bs, bool) or not isinstance(bs, int) or bs < 1):
            raise InvalidConfig(f"batch_size must be a positive integer or full, got {bs!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or not 0 <= self.seed < 2**64:
            raise InvalidConfig(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.init_scheme != "uniform_glorot":
            raise InvalidConfig(f"unsupported init_scheme {self.init_scheme!r}")
        p = self.early_stop_patience
        if p is not None and (isinstance(p, bool) or not isinstance(p, int) or p < 1):
            raise InvalidConfig(f"early_stop_patience must be a positive integer, got {p!r}")

    @classmethod
    def from_dict(cls, payload) -> TrainConfig:
        payload = dict(payload)
        if str(payload.get("batch_size", "")).lower() == "full":
            payload["batch_size"] = None
        unknown = set(payload) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise InvalidConfig(f"unknown training options: {', '.join(sorted(unknown))}")
        return cls(**payload)

    def to_dict(self):
        out = asdict(self)
        if out["batch_size"] is None:
            out["batch_size"] = "full"
        return out


@dataclass
class TrainHistory:
    train_loss: list = field(default_factory=list)
    val_loss: Optional[list] = None
    best_epoch: Optional[int] = None

    @property
    def epochs(self):
        return len(self.train_loss)

    def to_csv(self) -> str:
        lines = ["epoch,train_loss,val_loss"]
        for i, tl in enumerate(self.train_loss):
            vl = "" if self.val_loss is None else repr(self.val_loss[i])
            lines.append(f"{i + 1},{tl!r},{vl}")
        return "\n".join(lines) + "\n"


def _check_finite(value, epoch):
    if not math.isfinite(value):
        raise NonFiniteLoss(epoch, value)


def train(model: MlpModel, train_set: Dataset, config: TrainConfig = TrainConfig(),
          validation: Optional[Dataset] = None) -> tuple[MlpModel, TrainHistory]:
    """Mini-batch gradient descent with classical momentum.

    Each step applies ``v <- momentum * v - lr * grad`` then ``param <- param + v``.
    Row order within an epoch comes from ``default_rng(config.seed)``.  With
    ``early_stop_patience`` set and a validation set given, training stops once
    the validation loss has not improved for that many epochs and the
    parameters from the best epoch are returned.
    """
    if not train_set.normalized:
        raise DimensionMismatch("train expects a normalized dataset")
    if validation is not None and not validation.normalized:
        raise DimensionMismatch("validation set must be normalized")
    x, y = train_set.features, train_set.target
    n = len(train_set)
    if n == 0:
        raise EmptyBatch("training set is empty")
    _as_batch(model, x[:1])

    weights = [w.copy() for w in model.weights]
    biases = [b.copy() for b in model.biases]
    vel_w = [np.zeros_like(w) for w in weights]
    vel_b = [np.zeros_like(b) for b in biases]
    batch = n if config.batch_size is None else min(config.batch_size, n)
    rng = np.random.default_rng(config.seed)
    lr, mu = config.learning_rate, config.momentum

    def current():
        return MlpModel(tuple(weights), tuple(biases), model.hidden_activation, model.norm_stats)

    early = config.early_stop_patience is not None and validation is not None
    history = TrainHistory(val_loss=[] if validation is not None else None)
    best_val, best_params, stale = math.inf, None, 0

    with np.errstate(over="ignore", invalid="ignore"):
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(n) if config.shuffle_each_epoch else np.arange(n)
            for start in range(0, n, batch):
                idx = order[start:start + batch]
                g = _backprop(weights, biases, model.hidden_activation, x[idx], y[idx])
                _check_finite(g.loss, epoch)
                for i in range(len(weights)):
                    vel_w[i] = mu * vel_w[i] - lr * g.weights[i]
                    vel_b[i] = mu * vel_b[i] - lr * g.biases[i]
                    weights[i] = weights[i] + vel_w[i]
                    biases[i] = biases[i] + vel_b[i]
                if not all(np.all(np.isfinite(w)) for w in weights):
                    raise NonFiniteLoss(epoch, math.inf)

            snapshot = current()
            epoch_loss = loss(snapshot, x, y)
            _check_finite(epoch_loss, epoch)
            history.train_loss.append(epoch_loss)
            if validation is not None:
                val = loss(snapshot, validation.features, validation.target)
                _check_finite(val, epoch)
                history.val_loss.append(val)
                if early:
                    if val < best_val:
                        best_val, best_params, stale = val, snapshot, 0
                        history.best_epoch = epoch
                    else:
                        stale += 1
                        if stale >= config.early_stop_patience:
                            break

    final = best_params if early and best_params is not None else current()
    return final, history


def predict(model: MlpModel, raw_features):
    """Cake moisture (mass fraction) for rows given in physical units."""
    if model.norm_stats is None:
        raise DimensionMismatch("model carries no normalization stats; cannot predict from raw inputs")
    x = np.asarray(raw_features, dtype=float)
    if x.shape[-1] != N_FEATURES:
        raise DimensionMismatch(f"expected {N_FEATURES} raw features, got shape {x.shape}")
    return denormalize_target(forward(model, normalize_features(x, model.norm_stats)), model.norm_stats)


# ---------------------------------------------------------------------------
# Persistence


def model_to_dict(model: MlpModel):
    return {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "layer_sizes": list(model.layer_sizes),
        "hidden_activation": model.hidden_activation,
        "output_activation": model.output_activation,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
        "norm_stats": None if model.norm_stats is None else model.norm_stats.to_dict(),
    }


def save_model(model: MlpModel) -> str:
    # json writes floats with repr, which round-trips float64 exactly
    return json.dumps(model_to_dict(model), indent=1) + "\n"


def load_model(text: str) -> MlpModel:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CorruptModel(f"model file is not valid JSON: {exc}") from None
    if not isinstance(payload, dict) or payload.get("format") != FORMAT_NAME:
        raise CorruptModel("not a cakenet model file")
    version = str(payload.get("version"))
    if version != FORMAT_VERSION:
        raise SchemaVersionMismatch(f"model file version {version!r}, reader supports {FORMAT_VERSION!r}")
    try:
        if payload.get("output_activation", "identity") != "identity":
            raise CorruptModel("only identity output activation is supported")
        stats = payload.get("norm_stats")
        model = MlpModel(
            tuple(np.array(w, dtype=float) for w in payload["weights"]),
            tuple(np.array(b, dtype=float) for b in payload["biases"]),
            payload["hidden_activation"],
            None if stats is None else NormalizationStats.from_dict(stats),
        )
    except CorruptModel:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptModel(f"model file is malformed: {exc}") from None
    if list(model.layer_sizes) != list(payload.get("layer_sizes", [])):
        raise CorruptModel("layer_sizes does not match the stored weight shapes")
    return model
