"""Small dense classifiers with exact gradients, momentum SGD, and LR scaling.

Architectures are logistic regression (no hidden layer) or an MLP with one or
two tanh hidden layers. All parameters live in one flat float64 vector;
weight matrices and bias vectors are reshaped views into it, flattened layer
by layer, weights before biases, row-major.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ModelParams:
    """Parameters of a feed-forward classifier backed by a flat vector."""

    def __init__(self, layer_sizes: tuple[int, ...], flat: np.ndarray | None = None):
        if len(layer_sizes) < 2:
            raise ValueError("need at least input and output sizes")
        if any(s < 1 for s in layer_sizes):
            raise ValueError("layer sizes must be positive")
        self.layer_sizes = tuple(int(s) for s in layer_sizes)
        n = n_params(self.layer_sizes)
        if flat is None:
            flat = np.zeros(n)
        if flat.shape != (n,):
            raise ValueError(f"expected {n} parameters, got {flat.shape}")
        self.flat = np.asarray(flat, dtype=np.float64)
        self.weights: list[np.ndarray] = []
        self.biases: list[np.ndarray] = []
        off = 0
        for din, dout in zip(self.layer_sizes, self.layer_sizes[1:]):
            self.weights.append(self.flat[off:off + din * dout].reshape(din, dout))
            off += din * dout
            self.biases.append(self.flat[off:off + dout])
            off += dout

    @property
    def feature_dim(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_classes(self) -> int:
        return self.layer_sizes[-1]

    def flatten(self) -> np.ndarray:
        return self.flat.copy()

    def load_flat(self, vec: np.ndarray) -> None:
        self.flat[:] = vec

    def copy(self) -> "ModelParams":
        return ModelParams(self.layer_sizes, self.flat.copy())


def n_params(layer_sizes: tuple[int, ...]) -> int:
    return sum(din * dout + dout for din, dout in zip(layer_sizes, layer_sizes[1:]))


def init_model(layer_sizes: tuple[int, ...], seed: int) -> ModelParams:
    """Gaussian init scaled by 1/sqrt(fan_in); biases zero."""
    model = ModelParams(layer_sizes)
    rng = np.random.default_rng(seed)
    for w in model.weights:
        w[:] = rng.normal(0.0, 1.0 / np.sqrt(w.shape[0]), w.shape)
    return model


def _forward(model: ModelParams, x: np.ndarray):
    """Returns (pre-activations per layer, activations per layer, logits)."""
    if x.ndim != 2 or x.shape[1] != model.feature_dim:
        raise ValueError(f"expected batch of {model.feature_dim}-dim features, got {x.shape}")
    acts = [x]
    pre = []
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = z if i == last else np.tanh(z)
        acts.append(a)
    return pre, acts, a


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def forward_loss(model: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Mean cross-entropy of softmax outputs over the batch."""
    if len(x) == 0:
        raise ValueError("batch must be non-empty")
    _, _, logits = _forward(model, x)
    logp = _log_softmax(logits)
    return float(-logp[np.arange(len(y)), y].mean())


def loss_and_grad(model: ModelParams, x: np.ndarray, y: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean loss and the exact mean gradient, flattened in canonical order."""
    if len(x) == 0:
        raise ValueError("batch must be non-empty")
    pre, acts, logits = _forward(model, x)
    logp = _log_softmax(logits)
    loss = float(-logp[np.arange(len(y)), y].mean())

    m = len(y)
    delta = np.exp(logp)
    delta[np.arange(m), y] -= 1.0
    delta /= m

    grads_w = [None] * len(model.weights)
    grads_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (1.0 - np.tanh(pre[i - 1]) ** 2)

    flat = np.concatenate(
        [np.concatenate([w.ravel(), b]) for w, b in zip(grads_w, grads_b)]
    )
    return loss, flat


def backward(model: ModelParams, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return loss_and_grad(model, x, y)[1]


def predict(model: ModelParams, x: np.ndarray) -> np.ndarray:
    _, _, logits = _forward(model, x)
    return logits.argmax(axis=1)  # argmax breaks ties toward the lowest index


def evaluate(model: ModelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Top-1 accuracy on a labeled set."""
    if len(x) == 0:
        raise ValueError("test set must be non-empty")
    return float((predict(model, x) == y).mean())


@dataclass
class OptimizerState:
    """Momentum SGD state; weight decay is folded into the momentum buffer."""

    momentum: float = 0.9
    weight_decay: float = 0.0
    base_lr: float = 0.1
    schedule: list[tuple[int, float]] = field(default_factory=list)
    momentum_buffer: np.ndarray | None = None

    def __post_init__(self):
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.base_lr <= 0:
            raise ValueError("base_lr must be positive")


def sgd_momentum_step(
    state: OptimizerState, params: np.ndarray, grad: np.ndarray, lr: float
) -> np.ndarray:
    """buffer <- momentum*buffer + (grad + wd*params); params <- params - lr*buffer."""
    if params.shape != grad.shape:
        raise ValueError("parameter and gradient shapes differ")
    if state.momentum_buffer is None:
        state.momentum_buffer = np.zeros_like(params)
    state.momentum_buffer *= state.momentum
    state.momentum_buffer += grad + state.weight_decay * params
    params -= lr * state.momentum_buffer
    return params


def lr_at_epoch(base_lr: float, schedule: list[tuple[int, float]], epoch: int) -> float:
    """Step decay: multiply by every milestone factor whose epoch has passed."""
    lr = base_lr
    for milestone, factor in schedule:
        if epoch >= milestone:
            lr *= factor
    return lr


def scale_lr(base_lr: float, sum_rates: float, base_global_batch: int) -> float:
    """Linear scaling: lr grows with the global batch relative to the base batch."""
    if base_global_batch < 1:
        raise ValueError("base global batch must be >= 1")
    if sum_rates < 1:
        raise ValueError("sum of rates must be >= 1")
    return base_lr * sum_rates / base_global_batch


def save_checkpoint(path, model: ModelParams) -> None:
    """Flat parameter vector plus a small architecture header."""
    np.savez(
        path,
        layer_sizes=np.asarray(model.layer_sizes, dtype=np.int64),
        n_params=np.asarray(model.flat.size, dtype=np.int64),
        params=model.flat,
    )


def load_checkpoint(path) -> ModelParams:
    with np.load(path) as data:
        sizes = tuple(int(s) for s in data["layer_sizes"])
        params = data["params"]
        if int(data["n_params"]) != params.size:
            raise ValueError("checkpoint header disagrees with parameter count")
    return ModelParams(sizes, params)
