"""Fully-connected rectifier network with manual backprop and Adam."""

from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ShapeError, StateError

CHECKPOINT_SCHEMA = 1


@dataclass
class TrainConfig:
    """Optimization settings.

    Full-scale values for the MNIST MLP are ``epochs=200``, ``lr=1e-4`` and a
    decay of ``0.97`` every ``2`` epochs; the defaults here are desk scale.
    """

    epochs: int = 200
    batch_size: int = 100
    lr: float = 1e-3
    lr_decay: float = 0.97
    lr_decay_every: int = 2
    seed: int = 0

    def __post_init__(self):
        problems = []
        if not (isinstance(self.epochs, int) and self.epochs >= 1):
            problems.append(f"train.epochs must be an integer >= 1 (got {self.epochs!r})")
        if not (isinstance(self.batch_size, int) and self.batch_size >= 1):
            problems.append(f"train.batch_size must be an integer >= 1 (got {self.batch_size!r})")
        if not (isinstance(self.lr, (int, float)) and self.lr > 0):
            problems.append(f"train.lr must be positive (got {self.lr!r})")
        if not (isinstance(self.lr_decay, (int, float)) and 0 < self.lr_decay <= 1):
            problems.append(f"train.lr_decay must lie in (0, 1] (got {self.lr_decay!r})")
        if not (isinstance(self.lr_decay_every, int) and self.lr_decay_every >= 1):
            problems.append(
                f"train.lr_decay_every must be an integer >= 1 (got {self.lr_decay_every!r})")
        if not isinstance(self.seed, int):
            problems.append(f"train.seed must be an integer (got {self.seed!r})")
        if problems:
            raise ConfigError(problems)

    def lr_at(self, epoch):
        return self.lr * self.lr_decay ** (epoch // self.lr_decay_every)

    def to_dict(self):
        return asdict(self)


class DenseNet:
    """``Linear -> ReLU -> ... -> Linear`` with weights stored as ``(fan_in, fan_out)``.

    Hidden layers use a rectifier, the output layer is linear. Weights are
    drawn uniformly in ``+-sqrt(6 / fan_in)`` from a seeded generator, biases
    start at zero.
    """

    def __init__(self, layer_dims, seed=0):
        self.layer_dims = [int(n) for n in layer_dims]
        if len(self.layer_dims) < 2 or min(self.layer_dims) < 1:
            raise ShapeError(f"invalid layer dims {layer_dims!r}")
        self.seed = int(seed)
        rng = np.random.default_rng(self.seed)
        self.weights = []
        self.biases = []
        for fan_in, fan_out in zip(self.layer_dims[:-1], self.layer_dims[1:]):
            limit = np.sqrt(6.0 / fan_in)
            self.weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
            self.biases.append(np.zeros(fan_out))
        self._tape = None

    @property
    def input_dim(self):
        return self.layer_dims[0]

    @property
    def output_dim(self):
        return self.layer_dims[-1]

    @property
    def n_params(self):
        return sum((a + 1) * b for a, b in zip(self.layer_dims[:-1], self.layer_dims[1:]))

    def params(self):
        """Parameter arrays in ``[W0, b0, W1, b1, ...]`` order (live references)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def forward(self, x, record=True):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        h = x[None] if single else x
        if h.ndim != 2 or h.shape[1] != self.input_dim:
            raise ShapeError(f"input shape {x.shape} does not match input dim {self.input_dim}")
        acts = [h]
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
            acts.append(h)
        self._tape = (acts, single) if record else None
        return h[0] if single else h

    def __call__(self, x):
        return self.forward(x, record=False)

    def backward(self, grad_out):
        """Gradients of ``sum(grad_out * output)`` for the last recorded forward pass."""
        if self._tape is None:
            raise StateError("backward called without a recorded forward pass")
        acts, single = self._tape
        g = np.asarray(grad_out, dtype=np.float64)
        if single:
            g = g[None]
        if g.shape != acts[-1].shape:
            raise ShapeError(f"output gradient shape {g.shape} != output shape {acts[-1].shape}")
        grads = [None] * (2 * len(self.weights))
        for i in range(len(self.weights) - 1, -1, -1):
            if i < len(self.weights) - 1:
                g = g * (acts[i + 1] > 0)
            grads[2 * i] = acts[i].T @ g
            grads[2 * i + 1] = g.sum(axis=0)
            if i:
                g = g @ self.weights[i].T
        return grads

    def copy(self):
        other = DenseNet.__new__(DenseNet)
        other.layer_dims = list(self.layer_dims)
        other.seed = self.seed
        other.weights = [w.copy() for w in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other._tape = None
        return other

    def to_dict(self):
        return {
            "layer_dims": list(self.layer_dims),
            "seed": self.seed,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data):
        net = cls.__new__(cls)
        net.layer_dims = [int(n) for n in data["layer_dims"]]
        net.seed = int(data["seed"])
        net.weights = [np.array(w, dtype=np.float64).reshape(a, b) for w, a, b in
                       zip(data["weights"], net.layer_dims[:-1], net.layer_dims[1:])]
        net.biases = [np.array(b, dtype=np.float64) for b in data["biases"]]
        net._tape = None
        return net


@dataclass
class AdamState:
    lr: float
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_params(cls, params, lr):
        return cls(lr, [np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params])


def adam_step(params, grads, state):
    """Bias-corrected Adam update applied in place to ``params``."""
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError("parameter, gradient and moment lists differ in length")
    state.step += 1
    c1 = 1.0 - state.beta1**state.step
    c2 = 1.0 - state.beta2**state.step
    for p, g, m, v in zip(params, grads, state.m, state.v):
        if p.shape != g.shape:
            raise ShapeError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        p -= state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
    return state


def minibatches(n, batch_size, rng):
    """Shuffled index batches covering ``range(n)``; the last one may be short."""
    order = rng.permutation(n)
    return [order[i:i + batch_size] for i in range(0, n, batch_size)]


def fit(params, loss_and_grads, n, config, on_epoch=None):
    """Minimize ``loss_and_grads(batch_indices, rng) -> (loss, grads)`` with Adam.

    ``rng`` drives both the per-epoch shuffle and any sampling inside the
    loss, so a fixed ``config.seed`` fixes the whole trajectory.
    ``on_epoch(epoch)`` runs after every epoch.
    """
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_params(params, config.lr)
    for epoch in range(config.epochs):
        state.lr = config.lr_at(epoch)
        for idx in minibatches(n, config.batch_size, rng):
            _, grads = loss_and_grads(idx, rng)
            adam_step(params, grads, state)
        if on_epoch is not None:
            on_epoch(epoch)
    return state
