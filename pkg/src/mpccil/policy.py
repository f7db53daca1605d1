"""Feed-forward control policy: softplus MLP trained with Adam on MSE."""
from __future__ import annotations

import copy
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, PolicyOutputError, TrainingDivergedError
from .world import OBS_DIM

CHECKPOINT_VERSION = 1
INIT_STD = 0.01


def softplus(x):
    return np.logaddexp(0.0, x)


def softplus_grad(x):
    # d/dx log(1 + e^x) = sigmoid(x)
    return 0.5 * (1.0 + np.tanh(0.5 * x))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    batch_size: int = 64
    epochs: int = 200
    seed: int = 0
    renormalize: bool = True

    def __post_init__(self):
        if self.learning_rate < 0:
            raise InvalidInputError("learning rate must be non-negative")
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise InvalidInputError("Adam decay rates must lie in (0, 1)")
        if self.batch_size < 1 or self.epochs < 0:
            raise InvalidInputError("batch_size must be positive and epochs non-negative")


class MlpPolicy:
    """``in -> 30 -> 30 -> out`` network with per-feature input standardization."""

    def __init__(self, weights, biases, mean=None, scale=None, seed=0, fitted=False):
        self.weights = [np.asarray(w, dtype=float) for w in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        n_in = self.weights[0].shape[0]
        self.mean = np.zeros(n_in) if mean is None else np.asarray(mean, dtype=float)
        self.scale = np.ones(n_in) if scale is None else np.asarray(scale, dtype=float)
        self.seed = seed
        self.fitted = fitted
        self._check()

    def _check(self):
        for a, b in zip(self.weights[:-1], self.weights[1:]):
            if a.shape[1] != b.shape[0]:
                raise InvalidInputError("layer shapes do not chain")
        for w, b in zip(self.weights, self.biases):
            if b.shape != (w.shape[1],):
                raise InvalidInputError("bias shape mismatch")
        if np.any(self.scale <= 0):
            raise InvalidInputError("normalization scales must be positive")

    @property
    def n_inputs(self):
        return self.weights[0].shape[0]

    @property
    def n_outputs(self):
        return self.weights[-1].shape[1]

    @property
    def params(self):
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend([w, b])
        return out

    def copy(self):
        return copy.deepcopy(self)

    def fit_normalization(self, X):
        X = np.asarray(X, dtype=float)
        self.mean = X.mean(axis=0)
        sd = X.std(axis=0)
        self.scale = np.where(sd > 1e-6, sd, 1.0)
        self.fitted = True

    def renormalize(self, X):
        """Refit input statistics on ``X`` without changing the network function.

        The first layer absorbs the change: with old ``(m0, s0)`` and new
        ``(m1, s1)``, ``W' = diag(s1 / s0) W`` and ``b' = b + ((m1 - m0) / s0) W``.
        """
        m0, s0 = self.mean, self.scale
        self.fit_normalization(X)
        m1, s1 = self.mean, self.scale
        W = self.weights[0]
        self.biases[0] = self.biases[0] + ((m1 - m0) / s0) @ W
        self.weights[0] = (s1 / s0)[:, None] * W

    def _forward(self, X):
        h = (X - self.mean) / self.scale
        cache = [h]
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            if i < len(self.weights) - 1:
                cache.append(z)
                h = softplus(z)
                cache.append(h)
            else:
                h = z
        return h, cache

    def predict(self, X):
        """Batch forward pass; outputs are unclipped."""
        return self._forward(np.atleast_2d(np.asarray(X, dtype=float)))[0]

    def act(self, o):
        """Single observation to ``[vz, roll_d, pitch_d]``.

        Longer observation vectors are truncated to the leading
        ``n_inputs`` features, so a position/velocity-only policy can be
        driven by the full observation.
        """
        o = np.asarray(o, dtype=float)[:self.n_inputs]
        y = self._forward(o[None, :])[0][0]
        if not np.all(np.isfinite(y)):
            raise PolicyOutputError("policy output is not finite")
        return y

    def loss_and_grads(self, X, T):
        """MSE loss and gradients w.r.t. ``self.params`` (same order)."""
        Y, cache = self._forward(X)
        diff = Y - T
        n = X.shape[0]
        loss = float(np.sum(diff * diff) / n)
        delta = 2.0 * diff / n
        grads = [None] * (2 * len(self.weights))
        L = len(self.weights)
        for i in reversed(range(L)):
            h_in = cache[2 * i] if i > 0 else cache[0]
            grads[2 * i] = h_in.T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i > 0:
                z = cache[2 * i - 1]
                delta = (delta @ self.weights[i].T) * softplus_grad(z)
        return loss, grads


def init_policy(seed=0, n_in=OBS_DIM, hidden=(30, 30), n_out=3, std=INIT_STD) -> MlpPolicy:
    rng = np.random.default_rng(seed)
    sizes = [n_in, *hidden, n_out]
    weights = [rng.normal(0.0, std, size=(a, b)) for a, b in zip(sizes[:-1], sizes[1:])]
    biases = [np.zeros(b) for b in sizes[1:]]
    return MlpPolicy(weights, biases, seed=seed)


def forward(policy: MlpPolicy, o):
    return policy.act(o.vector if hasattr(o, "vector") else o)


def mse_loss(policy: MlpPolicy, X, T):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    T = np.atleast_2d(np.asarray(T, dtype=float))
    if len(X) == 0:
        raise InvalidInputError("empty batch")
    Y = policy.predict(X)
    return float(np.mean(np.sum((Y - T) ** 2, axis=1)))


def train(policy: MlpPolicy, X, T, config: TrainConfig = TrainConfig(), max_loss=1e6):
    """Adam on the MSE, warm-started from the current weights.

    Returns ``(new_policy, final_loss, epoch_losses)``.  Input
    normalization is fitted on the first call; later calls refit it in a
    function-preserving way when ``config.renormalize`` is set.
    """
    X = np.asarray(X, dtype=float)
    T = np.asarray(T, dtype=float)
    if len(X) == 0:
        raise InvalidInputError("cannot train on an empty dataset")
    pol = policy.copy()
    if not pol.fitted:
        pol.fit_normalization(X)
    elif config.renormalize:
        pol.renormalize(X)
    rng = np.random.default_rng(config.seed)
    params = pol.params
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    b1, b2, lr, eps = config.beta1, config.beta2, config.learning_rate, config.eps
    n = len(X)
    bs = min(config.batch_size, n)
    t = 0
    epoch_losses = []
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, bs):
            idx = order[start:start + bs]
            loss, grads = pol.loss_and_grads(X[idx], T[idx])
            if not np.isfinite(loss) or loss > max_loss:
                raise TrainingDivergedError(f"training diverged at epoch {epoch}", loss=loss, step=t)
            total += loss * len(idx)
            t += 1
            if lr == 0.0:
                continue
            c1 = 1.0 - b1 ** t
            c2 = 1.0 - b2 ** t
            for p, g, mi, vi in zip(params, grads, m, v):
                mi *= b1
                mi += (1.0 - b1) * g
                vi *= b2
                vi += (1.0 - b2) * g * g
                p -= lr * (mi / c1) / (np.sqrt(vi / c2) + eps)
        epoch_losses.append(total / n)
    final = mse_loss(pol, X, T)
    if not np.isfinite(final) or final > max_loss:
        raise TrainingDivergedError("training diverged", loss=final, step=t)
    return pol, final, epoch_losses


def save_policy(policy: MlpPolicy, path):
    """Write a checkpoint; ``.txt`` gives a plain-text dump, anything else npz."""
    path = str(path)
    if path.endswith(".txt"):
        with open(path, "w") as fh:
            fh.write(f"mpccil-policy {CHECKPOINT_VERSION}\n")
            fh.write(f"seed {policy.seed} fitted {int(policy.fitted)}\n")
            arrays = [("mean", policy.mean), ("scale", policy.scale)]
            for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
                arrays += [(f"W{i}", w), (f"b{i}", b)]
            fh.write(f"arrays {len(arrays)}\n")
            for name, a in arrays:
                shape = " ".join(str(s) for s in a.shape)
                fh.write(f"{name} {a.ndim} {shape}\n")
                fh.write(" ".join(repr(float(x)) for x in a.ravel()) + "\n")
        return
    data = {"version": CHECKPOINT_VERSION, "seed": policy.seed, "fitted": policy.fitted,
            "mean": policy.mean, "scale": policy.scale, "n_layers": len(policy.weights)}
    for i, (w, b) in enumerate(zip(policy.weights, policy.biases)):
        data[f"W{i}"] = w
        data[f"b{i}"] = b
    with open(path, "wb") as fh:
        np.savez(fh, **data)


def load_policy(path) -> MlpPolicy:
    path = str(path)
    if path.endswith(".txt"):
        with open(path) as fh:
            lines = fh.read().splitlines()
        head = lines[0].split()
        if head[0] != "mpccil-policy" or int(head[1]) != CHECKPOINT_VERSION:
            raise InvalidInputError(f"unsupported checkpoint header {lines[0]!r}")
        meta = lines[1].split()
        seed, fitted = int(meta[1]), bool(int(meta[3]))
        count = int(lines[2].split()[1])
        arrays = {}
        for i in range(count):
            spec = lines[3 + 2 * i].split()
            ndim = int(spec[1])
            shape = tuple(int(s) for s in spec[2:2 + ndim])
            vals = np.array([float(x) for x in lines[4 + 2 * i].split()])
            arrays[spec[0]] = vals.reshape(shape)
        n_layers = (count - 2) // 2
    else:
        with np.load(path) as z:
            if int(z["version"]) != CHECKPOINT_VERSION:
                raise InvalidInputError("unsupported checkpoint version")
            arrays = {k: z[k] for k in z.files}
        seed, fitted = int(arrays["seed"]), bool(arrays["fitted"])
        n_layers = int(arrays["n_layers"])
    weights = [arrays[f"W{i}"] for i in range(n_layers)]
    biases = [arrays[f"b{i}"] for i in range(n_layers)]
    return MlpPolicy(weights, biases, arrays["mean"], arrays["scale"], seed=seed, fitted=fitted)
