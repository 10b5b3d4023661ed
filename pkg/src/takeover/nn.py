"""Feed-forward classifier: ReLU hidden stack, softmax head, Adam training."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, EmptyPartition, SchemaMismatch, ShapeMismatch

HIDDEN_DIMS = (23, 14, 8)


@dataclass(frozen=True)
class NetworkConfig:
    input_dim: int
    output_dim: int
    hidden_dims: tuple[int, ...] = HIDDEN_DIMS
    learning_rate: float = 0.001
    batch_size: int = 30
    max_epochs: int = 400
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    patience: int = 50
    seed: int = 0

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.input_dim, *self.hidden_dims, self.output_dim)


@dataclass
class Network:
    """Dense layers; weights[i] has shape (fan_in, fan_out)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def layer_dims(self) -> tuple[int, ...]:
        return (self.weights[0].shape[0], *(w.shape[1] for w in self.weights))

    def copy(self) -> "Network":
        return Network([w.copy() for w in self.weights],
                       [b.copy() for b in self.biases])


def _init_with_rng(config: NetworkConfig, rng: np.random.Generator) -> Network:
    weights, biases = [], []
    dims = config.layer_dims
    for fan_in, fan_out in zip(dims, dims[1:]):
        # He initialization: variance 2 / fan_in, biases zero.
        weights.append(rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases)


def init_network(config: NetworkConfig) -> Network:
    """Seeded He-initialized network; layers are drawn in order."""
    return _init_with_rng(config, np.random.default_rng(config.seed))


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _forward_cached(net: Network, X: np.ndarray):
    pre, post = [], [X]
    a = X
    last = len(net.weights) - 1
    for i, (W, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ W + b
        pre.append(z)
        a = softmax(z) if i == last else np.maximum(z, 0.0)
        post.append(a)
    return pre, post


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one row or a batch.

    Raises:
        DimensionMismatch: feature width differs from the input layer.
    """
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != net.weights[0].shape[0]:
        raise DimensionMismatch(
            f"got {X.shape[1]} features, network expects {net.weights[0].shape[0]}")
    probs = _forward_cached(net, X)[1][-1]
    return probs[0] if single else probs


def loss_and_grad(net: Network, X: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy over the batch and its exact gradients.

    Returns:
        (loss, weight_grads, bias_grads) with grads shaped like the params.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=int)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise DimensionMismatch("X must be (batch, features) aligned with y")
    if X.shape[1] != net.weights[0].shape[0]:
        raise DimensionMismatch(
            f"got {X.shape[1]} features, network expects {net.weights[0].shape[0]}")
    n = X.shape[0]
    pre, post = _forward_cached(net, X)
    probs = post[-1]
    eps = np.finfo(float).tiny
    loss = float(-np.mean(np.log(probs[np.arange(n), y] + eps)))
    delta = probs.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    w_grads = [np.empty_like(w) for w in net.weights]
    b_grads = [np.empty_like(b) for b in net.biases]
    for i in range(len(net.weights) - 1, -1, -1):
        w_grads[i] = post[i].T @ delta
        b_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, w_grads, b_grads


@dataclass
class AdamState:
    """First/second moment accumulators and the step counter."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0


def init_adam(params: list[np.ndarray]) -> AdamState:
    return AdamState([np.zeros_like(p) for p in params],
                     [np.zeros_like(p) for p in params], 0)


def adam_step(params: list[np.ndarray], grads: list[np.ndarray],
              state: AdamState, config: NetworkConfig):
    """One bias-corrected Adam update; returns (new_params, new_state).

    Raises:
        ShapeMismatch: params, grads and state shapes disagree.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeMismatch("params, grads and state must have equal length")
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ShapeMismatch(f"shape mismatch: {p.shape} vs {g.shape}")
    t = state.t + 1
    b1, b2 = config.beta1, config.beta2
    new_params, new_m, new_v = [], [], []
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        new_params.append(p - config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon))
        new_m.append(m)
        new_v.append(v)
    return new_params, AdamState(new_m, new_v, t)


@dataclass
class TrainReport:
    train_loss: list[float]
    val_loss: list[float]
    train_acc: list[float]
    val_acc: list[float]
    best_epoch: int
    epochs_run: int
    stopping_reason: str

    def to_dict(self) -> dict:
        return asdict(self)


def _pack(net: Network) -> list[np.ndarray]:
    params = []
    for w, b in zip(net.weights, net.biases):
        params.append(w)
        params.append(b)
    return params


def _unpack(params: list[np.ndarray]) -> Network:
    return Network(params[0::2], params[1::2])


def _eval(net: Network, X: np.ndarray, y: np.ndarray):
    pre, post = _forward_cached(net, X)
    probs = post[-1]
    eps = np.finfo(float).tiny
    loss = float(-np.mean(np.log(probs[np.arange(len(y)), y] + eps)))
    acc = float(np.mean(probs.argmax(axis=1) == y))
    return loss, acc


def train(train_X: np.ndarray, train_y: np.ndarray,
          val_X: np.ndarray, val_y: np.ndarray,
          config: NetworkConfig):
    """Mini-batch Adam training with early stopping on validation loss.

    Rows are reshuffled every epoch from the seeded stream that also drew
    the initial weights. The best-validation-loss weights are restored
    before returning, so the result is never worse than the best epoch.

    Returns:
        (network, TrainReport)

    Raises:
        EmptyPartition: empty training or validation partition.
        DimensionMismatch: feature width differs from config.input_dim.
    """
    train_X = np.asarray(train_X, dtype=float)
    val_X = np.asarray(val_X, dtype=float)
    train_y = np.asarray(train_y, dtype=int)
    val_y = np.asarray(val_y, dtype=int)
    if train_X.shape[0] == 0 or val_X.shape[0] == 0:
        raise EmptyPartition("training and validation partitions must be non-empty")
    if train_X.shape[1] != config.input_dim or val_X.shape[1] != config.input_dim:
        raise DimensionMismatch(
            f"feature width {train_X.shape[1]} != input_dim {config.input_dim}")
    if train_y.min() < 0 or train_y.max() >= config.output_dim:
        raise DimensionMismatch("labels outside [0, output_dim)")

    rng = np.random.default_rng(config.seed)
    net = _init_with_rng(config, rng)
    params = _pack(net)
    state = init_adam(params)

    report = TrainReport([], [], [], [], best_epoch=0, epochs_run=0,
                         stopping_reason="max_epochs")
    best_val = np.inf
    best_params = [p.copy() for p in params]
    since_best = 0
    n = train_X.shape[0]
    for epoch in range(1, config.max_epochs + 1):
        order = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            batch = order[start:start + config.batch_size]
            net = _unpack(params)
            _, w_grads, b_grads = loss_and_grad(net, train_X[batch], train_y[batch])
            grads = []
            for wg, bg in zip(w_grads, b_grads):
                grads.append(wg)
                grads.append(bg)
            params, state = adam_step(params, grads, state, config)
        net = _unpack(params)
        tr_loss, tr_acc = _eval(net, train_X, train_y)
        va_loss, va_acc = _eval(net, val_X, val_y)
        report.train_loss.append(tr_loss)
        report.val_loss.append(va_loss)
        report.train_acc.append(tr_acc)
        report.val_acc.append(va_acc)
        report.epochs_run = epoch
        if va_loss < best_val:
            best_val = va_loss
            best_params = [p.copy() for p in params]
            report.best_epoch = epoch
            since_best = 0
        else:
            since_best += 1
            if since_best >= config.patience:
                report.stopping_reason = "patience"
                break
    return _unpack(best_params), report


@dataclass
class ModelBundle:
    """Everything needed to score raw feature rows later.

    transform is the fitted feature pipeline (imputation means, one-hot
    domains, normalization stats, fused column order) as a plain dict.
    """

    task: str
    class_names: tuple[str, ...]
    network: Network
    config: NetworkConfig
    transform: dict
    seed: int

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "class_names": list(self.class_names),
            "layer_dims": list(self.network.layer_dims),
            "weights": [w.tolist() for w in self.network.weights],
            "biases": [b.tolist() for b in self.network.biases],
            "config": asdict(self.config) | {"hidden_dims": list(self.config.hidden_dims)},
            "transform": self.transform,
            "seed": self.seed,
        }


def save_bundle(bundle: ModelBundle, path) -> None:
    Path(path).write_text(json.dumps(bundle.to_dict(), indent=2, sort_keys=True) + "\n")


def load_bundle(path) -> ModelBundle:
    raw = json.loads(Path(path).read_text())
    cfg = dict(raw["config"])
    cfg["hidden_dims"] = tuple(cfg["hidden_dims"])
    config = NetworkConfig(**cfg)
    network = Network([np.asarray(w, dtype=float) for w in raw["weights"]],
                      [np.asarray(b, dtype=float) for b in raw["biases"]])
    if list(network.layer_dims) != raw["layer_dims"]:
        raise SchemaMismatch(f"{path}: layer_dims do not match stored weights")
    return ModelBundle(
        task=raw["task"],
        class_names=tuple(raw["class_names"]),
        network=network,
        config=config,
        transform=raw["transform"],
        seed=int(raw["seed"]),
    )
