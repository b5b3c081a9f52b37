"""Small feed-forward networks trained with Adam, written on numpy.

The objective matches the usual toolkit convention: mean cross-entropy plus
l2/(2n) times the squared weight norm (biases unregularized), so the l2
coefficient is comparable to common MLP implementations.  Training is
deterministic for a fixed seed; "until convergence" is realized as early
stopping on a seeded validation slice with a patience counter.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .errors import InputError, NumericError


@dataclass
class MlpConfig:
    hidden: tuple[int, ...] = (256,)
    lr: float = 0.001
    l2: float = 2.0
    max_epochs: int = 500
    patience: int = 10
    seed: int = 0
    batch_size: Optional[int] = None  # None: full batch under 10k rows, else 32
    val_fraction: float = 0.1


def _relu(x):
    return np.maximum(0.0, x)


def _softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class DenseStack:
    """Dense layers with ReLU between; final activation is relu or softmax."""

    def __init__(self, sizes, final: str, rng: np.random.Generator):
        self.sizes = list(sizes)
        self.final = final
        self.W = []
        self.b = []
        for fan_in, fan_out in zip(sizes, sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            self.W.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
            self.b.append(np.zeros(fan_out))

    def forward(self, X):
        """Returns the list of layer activations, input included."""
        acts = [X]
        last = len(self.W) - 1
        for i, (W, b) in enumerate(zip(self.W, self.b)):
            z = acts[-1] @ W + b
            if i < last:
                acts.append(_relu(z))
            elif self.final == "relu":
                acts.append(_relu(z))
            else:
                acts.append(_softmax(z))
        return acts

    def backward(self, acts, delta):
        """delta is dLoss/dZ for the final layer; returns (dW, db, dX)."""
        dW = [None] * len(self.W)
        db = [None] * len(self.b)
        for i in range(len(self.W) - 1, -1, -1):
            dW[i] = acts[i].T @ delta
            db[i] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ self.W[i].T) * (acts[i] > 0)
        dX = delta @ self.W[0].T
        return dW, db, dX

    def params(self):
        return self.W + self.b

    def weight_sq_norm(self):
        return sum(float((W * W).sum()) for W in self.W)


def _one_hot(y: np.ndarray) -> np.ndarray:
    Y = np.zeros((len(y), 2))
    Y[np.arange(len(y)), y.astype(int)] = 1.0
    return Y


def _cross_entropy(probs: np.ndarray, Y: np.ndarray) -> float:
    eps = 1e-12
    return float(-(Y * np.log(probs + eps)).sum() / len(Y))


class MlpNet:
    """Softmax classifier net; exposes loss/grads for training and checking."""

    def __init__(self, sizes, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self.stack = DenseStack(sizes, final="softmax", rng=self.rng)
        self.sizes = list(sizes)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.sizes[0]:
            raise InputError(
                f"input has {X.shape[1] if X.ndim == 2 else '?'} columns, "
                f"model expects {self.sizes[0]}")
        return self.stack.forward(X)[-1]

    def loss(self, X, y, l2: float) -> float:
        probs = self.stack.forward(np.asarray(X, dtype=float))[-1]
        ce = _cross_entropy(probs, _one_hot(np.asarray(y)))
        return ce + l2 / (2.0 * len(X)) * self.stack.weight_sq_norm()

    def loss_and_grads(self, X, y, l2: float):
        X = np.asarray(X, dtype=float)
        Y = _one_hot(np.asarray(y))
        acts = self.stack.forward(X)
        probs = acts[-1]
        n = len(X)
        loss = _cross_entropy(probs, Y) + l2 / (2.0 * n) * self.stack.weight_sq_norm()
        delta = (probs - Y) / n
        dW, db, _ = self.stack.backward(acts, delta)
        dW = [g + (l2 / n) * W for g, W in zip(dW, self.stack.W)]
        return loss, dW + db

    def params(self):
        return self.stack.params()

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for p in self.params():
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size


class FusionNet:
    """Feature branch (two ReLU layers) concatenated with a fixed external
    embedding, then a softmax head with one hidden layer."""

    def __init__(self, n_features: int, embed_dim: int, seed: int = 0,
                 branch_hidden: int = 512, branch_out: int = 512, head_hidden: int = 1024):
        self.rng = np.random.default_rng(seed)
        self.branch = DenseStack([n_features, branch_hidden, branch_out],
                                 final="relu", rng=self.rng)
        self.head = DenseStack([branch_out + embed_dim, head_hidden, 2],
                               final="softmax", rng=self.rng)
        self.n_features = n_features
        self.embed_dim = embed_dim
        self.branch_out = branch_out

    def predict_proba(self, X: np.ndarray, E: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        E = np.asarray(E, dtype=float)
        if X.shape[1] != self.n_features:
            raise InputError(f"feature width {X.shape[1]} != {self.n_features}")
        if E.shape[1] != self.embed_dim:
            raise InputError(f"embedding width {E.shape[1]} != {self.embed_dim}")
        B = self.branch.forward(X)[-1]
        return self.head.forward(np.hstack([B, E]))[-1]

    def _weight_sq_norm(self):
        return self.branch.weight_sq_norm() + self.head.weight_sq_norm()

    def loss(self, X, E, y, l2: float) -> float:
        probs = self.predict_proba(X, E)
        return (_cross_entropy(probs, _one_hot(np.asarray(y)))
                + l2 / (2.0 * len(X)) * self._weight_sq_norm())

    def loss_and_grads(self, X, E, y, l2: float):
        X = np.asarray(X, dtype=float)
        E = np.asarray(E, dtype=float)
        Y = _one_hot(np.asarray(y))
        n = len(X)
        branch_acts = self.branch.forward(X)
        C = np.hstack([branch_acts[-1], E])
        head_acts = self.head.forward(C)
        probs = head_acts[-1]
        loss = _cross_entropy(probs, Y) + l2 / (2.0 * n) * self._weight_sq_norm()

        delta_head = (probs - Y) / n
        dW_h, db_h, dC = self.head.backward(head_acts, delta_head)
        # dC w.r.t. the concatenated input; the branch slice still needs the
        # final ReLU mask before flowing back through the branch stack.
        dB = dC[:, :self.branch_out] * (branch_acts[-1] > 0)
        dW_b, db_b, _ = self.branch.backward(branch_acts, dB)
        dW_b = [g + (l2 / n) * W for g, W in zip(dW_b, self.branch.W)]
        dW_h = [g + (l2 / n) * W for g, W in zip(dW_h, self.head.W)]
        return loss, dW_b + db_b + dW_h + db_h

    def params(self):
        return self.branch.params() + self.head.params()

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.params()])

    def set_flat(self, vec: np.ndarray) -> None:
        pos = 0
        for p in self.params():
            p[...] = vec[pos:pos + p.size].reshape(p.shape)
            pos += p.size


@dataclass
class TrainHistory:
    train_loss: list[float] = dc_field(default_factory=list)
    val_loss: list[float] = dc_field(default_factory=list)
    epochs_run: int = 0
    stopped_early: bool = False


class _Adam:
    def __init__(self, params, lr):
        self.lr = lr
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params, grads):
        self.t += 1
        b1, b2, eps = 0.9, 0.999, 1e-8
        scale = np.sqrt(1 - b2**self.t) / (1 - b1**self.t)
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * g * g
            p -= self.lr * scale * m / (np.sqrt(v) + eps)


def _validate_xy(X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y)
    if X.ndim != 2:
        raise InputError("X must be a 2-D matrix")
    if len(X) != len(y):
        raise InputError(f"{len(X)} rows but {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise NumericError("non-finite values in training matrix")
    classes = set(np.unique(y).tolist())
    if not classes <= {0, 1} or len(classes) < 2:
        raise InputError("labels must contain both classes 0 and 1")
    return X, y.astype(int)


def _val_split(n: int, y: np.ndarray, fraction: float, rng: np.random.Generator):
    """Seeded stratified holdout; empty when the data is too small to spare."""
    n_val = int(n * fraction)
    if n_val < 2:
        return np.arange(n), np.array([], dtype=int)
    val_idx = []
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        rng.shuffle(members)
        take = int(round(len(members) * fraction))
        val_idx.extend(members[:take].tolist())
    val_idx = np.array(sorted(val_idx), dtype=int)
    train_idx = np.setdiff1d(np.arange(n), val_idx)
    if len(val_idx) == 0 or len(set(y[train_idx].tolist())) < 2:
        return np.arange(n), np.array([], dtype=int)
    return train_idx, val_idx


def train_loop(model, batch_data, config: MlpConfig, loss_fn, grad_fn) -> TrainHistory:
    """Adam + early stopping shared by the plain and fusion classifiers.

    ``batch_data`` is a tuple of row-aligned arrays (the label array last);
    ``grad_fn(model, *slices)`` returns (loss, grads); ``loss_fn(model, *arrays)``
    evaluates without touching parameters.
    """
    y = batch_data[-1]
    n = len(y)
    rng = np.random.default_rng(config.seed)
    train_idx, val_idx = _val_split(n, y, config.val_fraction, rng)
    train_arrays = [a[train_idx] for a in batch_data]
    val_arrays = [a[val_idx] for a in batch_data] if len(val_idx) else None

    batch = config.batch_size
    if batch is None:
        batch = len(train_idx) if len(train_idx) < 10_000 else 32
    batch = max(1, min(batch, len(train_idx)))

    optimizer = _Adam(model.params(), config.lr)
    history = TrainHistory()
    best = np.inf
    best_params = [p.copy() for p in model.params()]
    patience_left = config.patience

    for epoch in range(config.max_epochs):
        order = rng.permutation(len(train_idx))
        for start in range(0, len(order), batch):
            sel = order[start:start + batch]
            _, grads = grad_fn(model, *[a[sel] for a in train_arrays])
            optimizer.step(model.params(), grads)

        train_loss = loss_fn(model, *train_arrays)
        history.train_loss.append(train_loss)
        monitor = train_loss
        if val_arrays is not None:
            val_loss = loss_fn(model, *val_arrays)
            history.val_loss.append(val_loss)
            monitor = val_loss
        history.epochs_run = epoch + 1

        if monitor < best - 1e-6:
            best = monitor
            best_params = [p.copy() for p in model.params()]
            patience_left = config.patience
        else:
            patience_left -= 1
            if patience_left <= 0:
                history.stopped_early = True
                break

    for p, bp in zip(model.params(), best_params):
        p[...] = bp
    return history
