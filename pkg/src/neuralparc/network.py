"""Fully connected ReLU networks: exact evaluation, training, serialization.

The network is ``x -> W_d h_{d-1} + w_d`` with ``h_i = max(W_i h_{i-1} + w_i, 0)``
on the hidden layers and an affine output layer.  A preactivation of
exactly zero counts as *active*; region enumeration relies on the same
closure convention, so it must never be changed in one place only.

Training is a from-scratch full-batch Adam on mean-squared error, with
feature/label standardization folded back into the first and last layers
afterwards so the returned network maps raw inputs to raw outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

WEIGHTS_FORMAT_VERSION = 1


class ReluNetwork:
    """Weights/biases of a ReLU MLP; the final layer is affine."""

    def __init__(self, weights, biases):
        if len(weights) != len(biases) or len(weights) < 1:
            raise ValueError("need matching, nonempty weight/bias lists")
        ws, bs = [], []
        prev = None
        for W, w in zip(weights, biases):
            W = np.ascontiguousarray(np.asarray(W, dtype=float))
            w = np.ascontiguousarray(np.asarray(w, dtype=float).ravel())
            if W.ndim != 2 or W.shape[0] != w.size:
                raise ValueError("layer shape mismatch")
            if prev is not None and W.shape[1] != prev:
                raise ValueError("consecutive layer widths do not chain")
            prev = W.shape[0]
            W.setflags(write=False)
            w.setflags(write=False)
            ws.append(W)
            bs.append(w)
        self.weights = tuple(ws)
        self.biases = tuple(bs)
        self.loss_history: list[float] | None = None

    @property
    def depth(self) -> int:
        return len(self.weights)

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(W.shape[0] for W in self.weights)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def output_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def n_hidden_neurons(self) -> int:
        return sum(W.shape[0] for W in self.weights[:-1])

    def forward(self, x) -> np.ndarray:
        """Evaluate one input vector or a batch of row vectors."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        h = x[None, :] if single else x
        if h.shape[1] != self.input_dim:
            raise ValueError(f"input dim {h.shape[1]} != {self.input_dim}")
        for W, w in zip(self.weights[:-1], self.biases[:-1]):
            h = np.maximum(h @ W.T + w, 0.0)
        out = h @ self.weights[-1].T + self.biases[-1]
        return out[0] if single else out

    def activation_pattern(self, x) -> tuple[tuple[bool, ...], ...]:
        """Hidden-neuron signs at ``x``: preactivation >= 0 counts active."""
        h = np.asarray(x, dtype=float)
        if h.shape != (self.input_dim,):
            raise ValueError(f"expected input of shape ({self.input_dim},)")
        pattern = []
        for W, w in zip(self.weights[:-1], self.biases[:-1]):
            pre = W @ h + w
            pattern.append(tuple(bool(v) for v in (pre >= 0.0)))
            h = np.maximum(pre, 0.0)
        return tuple(pattern)

    def batch_patterns_packed(self, X: np.ndarray) -> np.ndarray:
        """Activation patterns of a batch packed into uint64 keys.

        Requires at most 64 hidden neurons; bit ``k`` corresponds to the
        k-th hidden neuron in layer-major order.
        """
        if self.n_hidden_neurons > 64:
            raise ValueError("packed patterns support at most 64 hidden neurons")
        keys = np.zeros(X.shape[0], dtype=np.uint64)
        h = np.asarray(X, dtype=float)
        bit = 0
        for W, w in zip(self.weights[:-1], self.biases[:-1]):
            pre = h @ W.T + w
            active = pre >= 0.0
            weightv = (np.uint64(1) << (np.uint64(bit) + np.arange(W.shape[0], dtype=np.uint64)))
            keys |= active.astype(np.uint64) @ weightv
            bit += W.shape[0]
            h = np.maximum(pre, 0.0)
        return keys

    def to_dict(self) -> dict:
        return {
            "version": WEIGHTS_FORMAT_VERSION,
            "widths": list(self.widths),
            "layers": [
                {"W": W.tolist(), "w": w.tolist()}
                for W, w in zip(self.weights, self.biases)
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReluNetwork":
        if d.get("version") != WEIGHTS_FORMAT_VERSION:
            raise ValueError(f"unsupported weight file version: {d.get('version')!r}")
        net = cls(
            [np.array(layer["W"], dtype=float) for layer in d["layers"]],
            [np.array(layer["w"], dtype=float) for layer in d["layers"]],
        )
        if list(net.widths) != list(d["widths"]):
            raise ValueError("widths field disagrees with layer shapes")
        return net

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.to_dict(), f)

    @classmethod
    def load(cls, path) -> "ReluNetwork":
        with open(path) as f:
            return cls.from_dict(json.load(f))


@dataclass
class TrainingSet:
    """Feature rows (trajectory parameters) and stacked-label rows.

    Labels are ``(p(dt), ..., p(t_f), q)`` flattened, collected with the
    initial workspace state at the origin.
    """

    features: np.ndarray
    labels: np.ndarray
    t_f: float
    dt: float
    n_p: int
    n_q: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.atleast_2d(np.asarray(self.features, dtype=float))
        self.labels = np.atleast_2d(np.asarray(self.labels, dtype=float))
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature/label row mismatch")
        if self.features.shape[0] == 0:
            raise ValueError("training set has no rows")
        steps = self.t_f / self.dt
        if abs(steps - round(steps)) > 1e-9 * max(1.0, steps):
            raise ValueError("t_f must be an integer multiple of dt")
        expected = round(steps) * self.n_p + self.n_q
        if self.labels.shape[1] != expected:
            raise ValueError(
                f"label dim {self.labels.shape[1]} != (t_f/dt)*n_p + n_q = {expected}"
            )

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]


def _standardize(X: np.ndarray):
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma < 1e-9, 1.0, sigma)
    return (X - mu) / sigma, mu, sigma


def init_network(input_dim: int, widths, output_dim: int, seed: int) -> ReluNetwork:
    """He-initialized network with zero biases, deterministic per seed."""
    rng = np.random.default_rng(seed)
    dims = [input_dim] + list(widths) + [output_dim]
    weights, biases = [], []
    for i in range(len(dims) - 1):
        scale = np.sqrt(2.0 / dims[i]) if i < len(dims) - 2 else np.sqrt(1.0 / dims[i])
        weights.append(scale * rng.standard_normal((dims[i + 1], dims[i])))
        biases.append(np.zeros(dims[i + 1]))
    return ReluNetwork(weights, biases)


def _fold_standardization(weights, biases, mu_x, sigma_x, mu_y, sigma_y):
    """Compose input/output standardization into the first/last layers."""
    W0 = weights[0] / sigma_x[None, :]
    b0 = biases[0] - W0 @ mu_x
    Wl = weights[-1] * sigma_y[:, None]
    bl = biases[-1] * sigma_y + mu_y
    new_w = [W0] + [w.copy() for w in weights[1:-1]] + [Wl]
    new_b = [b0] + [b.copy() for b in biases[1:-1]] + [bl]
    if len(weights) == 1:
        # Single affine layer: both foldings apply to the same matrices.
        W = (weights[0] * sigma_y[:, None]) / sigma_x[None, :]
        b = sigma_y * (biases[0] - (weights[0] / sigma_x[None, :]) @ mu_x) + mu_y
        new_w, new_b = [W], [b]
    return new_w, new_b


def train(
    data: TrainingSet,
    widths,
    epochs: int,
    seed: int,
    learning_rate: float = 1e-3,
    full_batch_limit: int = 10_000,
    batch_size: int = 2048,
) -> ReluNetwork:
    """Fit a ReLU network to the training set with Adam on MSE.

    Deterministic per seed.  Runs full-batch when the set has at most
    ``full_batch_limit`` rows, otherwise seeded shuffled minibatches.  The
    returned network operates on raw features/labels (standardization is
    folded into the weights) and carries ``loss_history``: raw-unit MSE
    after each epoch, with the initial loss first.
    """
    if data.n_rows < 1:
        raise ValueError("empty training set")
    X, mu_x, sigma_x = _standardize(data.features)
    Y, mu_y, sigma_y = _standardize(data.labels)
    n, m = Y.shape

    proto = init_network(X.shape[1], widths, m, seed)
    weights = [W.copy() for W in proto.weights]
    biases = [w.copy() for w in proto.biases]
    n_layers = len(weights)

    adam_m = [np.zeros_like(W) for W in weights] + [np.zeros_like(b) for b in biases]
    adam_v = [np.zeros_like(W) for W in weights] + [np.zeros_like(b) for b in biases]
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    raw_scale = sigma_y**2

    def raw_mse(pred_norm):
        err = (pred_norm - Y) ** 2 * raw_scale
        return float(err.mean())

    def forward_all(Xb):
        hs = [Xb]
        h = Xb
        for i in range(n_layers - 1):
            h = np.maximum(h @ weights[i].T + biases[i], 0.0)
            hs.append(h)
        out = h @ weights[-1].T + biases[-1]
        return hs, out

    full_batch = n <= full_batch_limit
    shuffle_rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5AFE]))

    _, out = forward_all(X)
    losses = [raw_mse(out)]
    if np.isnan(losses[0]):
        raise FloatingPointError("NaN loss at initialization")

    for _ in range(epochs):
        if full_batch:
            batches = [np.arange(n)]
        else:
            order = shuffle_rng.permutation(n)
            batches = [order[i : i + batch_size] for i in range(0, n, batch_size)]
        for idx in batches:
            Xb, Yb = X[idx], Y[idx]
            hs, out = forward_all(Xb)
            delta = 2.0 * (out - Yb) / (idx.size * m)
            grads_W = [None] * n_layers
            grads_b = [None] * n_layers
            g = delta
            for i in range(n_layers - 1, -1, -1):
                grads_W[i] = g.T @ hs[i]
                grads_b[i] = g.sum(axis=0)
                if i > 0:
                    g = (g @ weights[i]) * (hs[i] > 0.0)
            step += 1
            params = weights + biases
            grads = grads_W + grads_b
            lr_t = learning_rate * np.sqrt(1 - beta2**step) / (1 - beta1**step)
            for j, (p, gr) in enumerate(zip(params, grads)):
                adam_m[j] = beta1 * adam_m[j] + (1 - beta1) * gr
                adam_v[j] = beta2 * adam_v[j] + (1 - beta2) * gr**2
                p -= lr_t * adam_m[j] / (np.sqrt(adam_v[j]) + eps)
        _, out = forward_all(X)
        loss = raw_mse(out)
        if np.isnan(loss):
            raise FloatingPointError("NaN loss during training")
        losses.append(loss)

    folded_w, folded_b = _fold_standardization(weights, biases, mu_x, sigma_x, mu_y, sigma_y)
    net = ReluNetwork(folded_w, folded_b)
    net.loss_history = losses
    return net
