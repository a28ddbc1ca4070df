"""Feedforward networks with manual backpropagation and seeded training.

The dense-stack forward/backward primitives here are shared with the
message-passing networks, which are built from the same kind of small MLPs.
Only scalar-output models are exposed through the public entry points of
this module; the graph module drives the vector-output case directly.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .numerics import RandomSource
from .synthdata import LabeledSet

__all__ = [
    "ACTIVATIONS",
    "Gradients",
    "MlpModel",
    "TrainConfig",
    "TrainHistory",
    "forward",
    "grad",
    "init_mlp",
    "load_checkpoint",
    "mse",
    "predict_batch",
    "save_checkpoint",
    "train",
]

ACTIVATIONS = ("relu", "tanh", "cos", "quadratic")


def activation_apply(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "tanh":
        return np.tanh(z)
    if kind == "cos":
        return np.cos(z)
    if kind == "quadratic":
        return z * z
    raise ValueError(f"unknown activation {kind!r}")


def activation_grad(kind: str, z: np.ndarray) -> np.ndarray:
    if kind == "relu":
        # Subgradient at exactly 0 taken as 0.
        return (z > 0.0).astype(np.float64)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    if kind == "cos":
        return -np.sin(z)
    if kind == "quadratic":
        return 2.0 * z
    raise ValueError(f"unknown activation {kind!r}")


# ---------------------------------------------------------------------------
# dense stacks (shared with the graph networks)
# ---------------------------------------------------------------------------


def stack_forward(
    weights: list[np.ndarray],
    biases: Optional[list[np.ndarray]],
    activation: str,
    scales: Optional[list[float]],
    x: np.ndarray,
) -> tuple[np.ndarray, list]:
    """Forward pass of a dense stack on an n x d_in batch.

    Layout: z_k = s_k * (h W_k' + b_k), h = act(z_k) between layers, and the
    last layer stays linear.  Returns the n x d_out output and the caches
    needed by :func:`stack_backward`.
    """
    h = x
    caches = []
    last = len(weights) - 1
    for k, w in enumerate(weights):
        z = h @ w.T
        if biases is not None:
            z = z + biases[k]
        if scales is not None and scales[k] != 1.0:
            z = z * scales[k]
        caches.append((h, z))
        h = activation_apply(activation, z) if k < last else z
    return h, caches


def stack_backward(
    weights: list[np.ndarray],
    biases: Optional[list[np.ndarray]],
    activation: str,
    scales: Optional[list[float]],
    caches: list,
    d_out: np.ndarray,
) -> tuple[list[np.ndarray], Optional[list[np.ndarray]], np.ndarray]:
    """Gradients of the stack: per-layer dW, db, and the input gradient."""
    d_w = [None] * len(weights)
    d_b = [None] * len(weights) if biases is not None else None
    d_z = d_out
    for k in range(len(weights) - 1, -1, -1):
        h_prev, z = caches[k]
        if k < len(weights) - 1:
            d_z = d_z * activation_grad(activation, z)
        s = 1.0 if scales is None else scales[k]
        d_pre = d_z if s == 1.0 else d_z * s
        d_w[k] = d_pre.T @ h_prev
        if d_b is not None:
            d_b[k] = d_pre.sum(axis=0)
        d_z = d_pre @ weights[k]
    return d_w, d_b, d_z


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass
class MlpModel:
    """Scalar-output MLP; last layer has output width 1."""

    weights: list[np.ndarray]
    biases: Optional[list[np.ndarray]]
    activation: str = "relu"
    init_scheme: str = "default"
    init_seed: Optional[int] = None

    @property
    def scales(self) -> Optional[list[float]]:
        if self.init_scheme != "ntk":
            return None
        return [float(np.sqrt(2.0 / w.shape[0])) for w in self.weights]

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    def copy(self) -> "MlpModel":
        return MlpModel(
            weights=[w.copy() for w in self.weights],
            biases=None if self.biases is None else [b.copy() for b in self.biases],
            activation=self.activation,
            init_scheme=self.init_scheme,
            init_seed=self.init_seed,
        )

    def parameters(self) -> list[np.ndarray]:
        params = list(self.weights)
        if self.biases is not None:
            params += list(self.biases)
        return params


def init_mlp(
    layer_sizes: list[int],
    activation: str = "relu",
    scheme: str = "default",
    bias: bool = True,
    rng: Optional[RandomSource] = None,
) -> MlpModel:
    """Fresh model with the given layer widths, e.g. [d, 128, 1].

    ``default`` draws weights and biases uniform on +-1/sqrt(fan_in);
    ``ntk`` draws standard normals and rescales each layer's output by
    sqrt(2/fan_out) at evaluation time.
    """
    if len(layer_sizes) < 2:
        raise ValueError("need at least an input and an output layer size")
    if activation not in ACTIVATIONS:
        raise ValueError(f"unknown activation {activation!r}")
    if scheme not in ("default", "ntk"):
        raise ValueError(f"unknown init scheme {scheme!r}")
    rng = rng if rng is not None else RandomSource(0, "mlp-init")
    g = rng.generator()
    weights = []
    biases = [] if bias else None
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        if scheme == "ntk":
            w = g.standard_normal((fan_out, fan_in))
            b = g.standard_normal(fan_out)
        else:
            bound = 1.0 / np.sqrt(fan_in)
            w = g.uniform(-bound, bound, size=(fan_out, fan_in))
            b = g.uniform(-bound, bound, size=fan_out)
        weights.append(w)
        if bias:
            biases.append(b)
    return MlpModel(
        weights=weights,
        biases=biases,
        activation=activation,
        init_scheme=scheme,
        init_seed=rng.seed,
    )


def predict_batch(model: MlpModel, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.in_dim:
        raise ValueError(f"expected n x {model.in_dim} inputs, got shape {x.shape}")
    if x.shape[0] == 0:
        return np.zeros(0)
    out, _ = stack_forward(model.weights, model.biases, model.activation, model.scales, x)
    return out[:, 0]


def forward(model: MlpModel, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError(f"expected a d-vector, got shape {x.shape}")
    out = float(predict_batch(model, x[None, :])[0])
    if not np.isfinite(out):
        raise FloatingPointError("non-finite network output")
    return out


def mse(preds: np.ndarray, labels: np.ndarray) -> float:
    diff = preds - labels
    return float(diff @ diff / len(labels))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: Optional[list[np.ndarray]]

    def flat(self) -> list[np.ndarray]:
        out = list(self.weights)
        if self.biases is not None:
            out += list(self.biases)
        return out


def grad(model: MlpModel, x: np.ndarray, y: np.ndarray) -> Gradients:
    """Gradient of mean squared error over the batch."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ValueError("batch must be a nonempty n x d matrix")
    out, caches = stack_forward(model.weights, model.biases, model.activation, model.scales, x)
    d_out = 2.0 * (out[:, 0] - y)[:, None] / len(y)
    d_w, d_b, _ = stack_backward(
        model.weights, model.biases, model.activation, model.scales, caches, d_out
    )
    for k, g_k in enumerate(d_w):
        if not np.all(np.isfinite(g_k)):
            raise FloatingPointError(f"non-finite gradient in layer {k} weights")
    if d_b is not None:
        for k, g_k in enumerate(d_b):
            if not np.all(np.isfinite(g_k)):
                raise FloatingPointError(f"non-finite gradient in layer {k} biases")
    return Gradients(weights=d_w, biases=d_b)


# ---------------------------------------------------------------------------
# optimizers and training
# ---------------------------------------------------------------------------


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    lr_decay: float = 0.5
    decay_every: int = 50
    batch_size: int = 64
    weight_decay: float = 1e-5
    epochs: int = 250
    optimizer: str = "adam"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.learning_rate < 0.0:
            raise ValueError("learning rate must be nonnegative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class TrainHistory:
    train_mse: list[float] = field(default_factory=list)
    val_mse: list[float] = field(default_factory=list)
    best_epoch: int = -1
    diverged: bool = False


class Optimizer:
    """Adam or plain SGD over a flat parameter list, with L2 weight decay."""

    def __init__(self, params: list[np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.t = 0
        if cfg.optimizer == "adam":
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]

    def step(self, params: list[np.ndarray], grads: list[np.ndarray], lr: float) -> None:
        wd = self.cfg.weight_decay
        if self.cfg.optimizer == "sgd":
            for p, g in zip(params, grads):
                p -= lr * (g + wd * p)
            return
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            g = g + wd * p
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)


def train(
    model: MlpModel,
    train_set: LabeledSet,
    val_set: LabeledSet,
    cfg: TrainConfig,
) -> tuple[MlpModel, TrainHistory]:
    """Minibatch training; returns the best-validation-epoch snapshot.

    The learning rate is multiplied by ``lr_decay`` every ``decay_every``
    epochs.  A non-finite loss aborts the run and returns the last finite
    best snapshot with the ``diverged`` flag set.
    """
    if train_set.dim != model.in_dim or val_set.dim != model.in_dim:
        raise ValueError("dataset dimension does not match the model")
    model = model.copy()
    history = TrainHistory()
    if cfg.epochs == 0:
        return model, history

    g = RandomSource(cfg.seed, "mlp-train").generator()
    params = model.parameters()
    opt = Optimizer(params, cfg)
    best = model.copy()
    best_val = np.inf
    x_tr, y_tr = train_set.inputs, train_set.labels
    n = len(y_tr)

    for epoch in range(cfg.epochs):
        lr = cfg.learning_rate * cfg.lr_decay ** (epoch // cfg.decay_every)
        perm = g.permutation(n)
        ok = True
        for start in range(0, n, cfg.batch_size):
            idx = perm[start : start + cfg.batch_size]
            try:
                grads = grad(model, x_tr[idx], y_tr[idx])
            except FloatingPointError:
                ok = False
                break
            opt.step(params, grads.flat(), lr)
            if not all(np.all(np.isfinite(p)) for p in params):
                ok = False
                break
        if not ok:
            history.diverged = True
            break
        train_loss = mse(predict_batch(model, x_tr), y_tr)
        val_loss = mse(predict_batch(model, val_set.inputs), val_set.labels)
        if not (np.isfinite(train_loss) and np.isfinite(val_loss)):
            history.diverged = True
            break
        history.train_mse.append(train_loss)
        history.val_mse.append(val_loss)
        if val_loss < best_val:
            best_val = val_loss
            best = model.copy()
            history.best_epoch = epoch
    return best, history


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


def save_checkpoint(model: MlpModel, path: str) -> None:
    """Self-describing npz checkpoint; weights round-trip bit-exactly."""
    arrays = {f"weight_{k}": w for k, w in enumerate(model.weights)}
    if model.biases is not None:
        arrays.update({f"bias_{k}": b for k, b in enumerate(model.biases)})
    header = {
        "n_layers": len(model.weights),
        "has_bias": model.biases is not None,
        "activation": model.activation,
        "init_scheme": model.init_scheme,
        "init_seed": model.init_seed,
        "layer_sizes": [model.weights[0].shape[1]] + [w.shape[0] for w in model.weights],
    }
    arrays["header"] = np.frombuffer(json.dumps(header).encode("utf-8"), dtype=np.uint8)
    np.savez(path, **arrays)


def load_checkpoint(path: str) -> MlpModel:
    with np.load(path) as data:
        header = json.loads(bytes(data["header"]).decode("utf-8"))
        weights = [data[f"weight_{k}"] for k in range(header["n_layers"])]
        biases = None
        if header["has_bias"]:
            biases = [data[f"bias_{k}"] for k in range(header["n_layers"])]
    return MlpModel(
        weights=weights,
        biases=biases,
        activation=header["activation"],
        init_scheme=header["init_scheme"],
        init_seed=header["init_seed"],
    )
