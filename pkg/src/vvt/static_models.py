"""Static-analysis classifiers: multinomial naive Bayes and a small MLP.

The MLP is trained with plain mini-batch gradient descent on softmax
cross-entropy; ``fine_tune`` retrains only the layers after the first
``frozen_layer_count`` weight layers (transfer learning).
"""

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ContractError, EmptyClass, NonFiniteLoss, ShapeMismatch
from .ngrams import FeatureVector


@dataclass
class NbModel:
    class_log_priors: np.ndarray
    feature_log_likelihoods: np.ndarray
    alpha: float
    vocab_id: str = ""
    class_names: tuple = ()


@dataclass
class MlpModel:
    layer_sizes: tuple
    weights: list
    biases: list
    vocab_id: str = ""
    class_names: tuple = ()
    activation: str = "relu"

    @property
    def n_layers(self):
        return len(self.weights)

    def copy(self):
        return replace(self, weights=[w.copy() for w in self.weights],
                       biases=[b.copy() for b in self.biases])


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.05
    epochs: int = 200
    batch_size: int = 32
    seed: int = 0
    l2_penalty: float = 0.0
    frozen_layer_count: int = 0
    hidden: tuple = field(default=(64, 32))

    def __post_init__(self):
        if self.learning_rate <= 0 or self.batch_size < 1 or self.epochs < 0:
            raise ContractError(f"invalid training config {self}")
        if self.l2_penalty < 0 or self.frozen_layer_count < 0:
            raise ContractError(f"invalid training config {self}")


def _check_classes(data):
    counts = np.bincount(data.y, minlength=len(data.class_names))
    missing = [data.class_names[c] for c in np.flatnonzero(counts == 0)]
    if missing:
        raise EmptyClass(f"no samples for class(es) {missing}")


# -- naive Bayes -------------------------------------------------------------

def train_nb(data, alpha=1.0):
    """Multinomial NB with additive (Laplace) smoothing ``alpha``.

    Expects raw counts; normalized rows shrink every likelihood term until the
    class prior dominates.
    """
    if alpha <= 0:
        raise ContractError("alpha must be > 0")
    if data.norm != "raw":
        warnings.warn(f"naive Bayes on {data.norm!r} features; raw counts are expected")
    _check_classes(data)
    k = len(data.class_names)
    d = data.X.shape[1]
    counts = np.zeros((k, d))
    for c in range(k):
        counts[c] = data.X[data.y == c].sum(axis=0)
    smoothed = counts + alpha
    loglik = np.log(smoothed) - np.log(smoothed.sum(axis=1, keepdims=True))
    priors = np.log(np.bincount(data.y, minlength=k) / len(data.y))
    return NbModel(priors, loglik, float(alpha), data.vocab_id, tuple(data.class_names))


def _softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


# -- MLP ---------------------------------------------------------------------

def init_mlp(layer_sizes, seed=0, vocab_id="", class_names=()):
    rng = np.random.default_rng(seed)
    return _init_mlp(layer_sizes, rng, vocab_id, class_names)


def _init_mlp(layer_sizes, rng, vocab_id, class_names):
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(rng.uniform(-bound, bound, size=fan_out))
    return MlpModel(tuple(layer_sizes), weights, biases, vocab_id, tuple(class_names))


def _forward(model, X):
    acts = [X]
    h = X
    for i, (W, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ W + b
        h = np.maximum(z, 0.0) if i < model.n_layers - 1 else z
        acts.append(h)
    return acts


def mlp_loss(model, X, y, l2=0.0):
    logits = _forward(model, X)[-1]
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(len(y)), y].mean()
    if l2:
        loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in model.weights)
    return float(loss)


def mlp_loss_and_grads(model, X, y, l2=0.0):
    """Mean cross-entropy (+ L2 on weights) and its gradients by backprop."""
    acts = _forward(model, X)
    probs = _softmax(acts[-1])
    n = len(y)
    loss = -np.log(np.maximum(probs[np.arange(n), y], 1e-300)).mean()
    loss += 0.5 * l2 * sum(float(np.sum(W * W)) for W in model.weights)
    delta = probs
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gW = [None] * model.n_layers
    gb = [None] * model.n_layers
    for i in range(model.n_layers - 1, -1, -1):
        gW[i] = acts[i].T @ delta + l2 * model.weights[i]
        gb[i] = delta.sum(axis=0)
        if i:
            delta = (delta @ model.weights[i].T) * (acts[i] > 0)
    return float(loss), gW, gb


def _check_shapes(model, data):
    if data.X.shape[1] != model.layer_sizes[0]:
        raise ShapeMismatch(f"input width {data.X.shape[1]} != {model.layer_sizes[0]}")
    if len(data.y) == 0:
        raise ShapeMismatch("empty dataset")
    if data.y.max() >= model.layer_sizes[-1] or data.y.min() < 0:
        raise ShapeMismatch(f"labels must lie in 0..{model.layer_sizes[-1] - 1}")


def _train(model, data, cfg, rng, first_trainable):
    history = []
    n = len(data.y)
    X, y = data.X, data.y
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, gW, gb = mlp_loss_and_grads(model, X[idx], y[idx], cfg.l2_penalty)
            for i in range(first_trainable, model.n_layers):
                model.weights[i] -= cfg.learning_rate * gW[i]
                model.biases[i] -= cfg.learning_rate * gb[i]
        loss = mlp_loss(model, X, y, cfg.l2_penalty)
        if not np.isfinite(loss):
            raise NonFiniteLoss(epoch, loss)
        history.append(loss)
    return model, history


def train_mlp(data, cfg, init=None):
    """Train from a seeded init (or from a copy of ``init``); returns ``(model, loss_history)``."""
    rng = np.random.default_rng(cfg.seed)
    if init is None:
        sizes = (data.X.shape[1], *cfg.hidden, len(data.class_names))
        model = _init_mlp(sizes, rng, data.vocab_id, data.class_names)
    else:
        model = init.copy()
    _check_shapes(model, data)
    return _train(model, data, cfg, rng, 0)


def fine_tune(base, data, cfg):
    """Copy ``base`` and retrain all but its first ``cfg.frozen_layer_count`` layers."""
    if cfg.frozen_layer_count >= base.n_layers:
        raise ContractError(f"cannot freeze {cfg.frozen_layer_count} of {base.n_layers} layers")
    model = base.copy()
    _check_shapes(model, data)
    rng = np.random.default_rng(cfg.seed)
    return _train(model, data, cfg, rng, cfg.frozen_layer_count)


# -- inference ---------------------------------------------------------------

def predict_proba(model, X):
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if isinstance(model, NbModel):
        if X.shape[1] != model.feature_log_likelihoods.shape[1]:
            raise ShapeMismatch(f"input width {X.shape[1]} != "
                                f"{model.feature_log_likelihoods.shape[1]}")
        return _softmax(X @ model.feature_log_likelihoods.T + model.class_log_priors)
    if isinstance(model, MlpModel):
        if X.shape[1] != model.layer_sizes[0]:
            raise ShapeMismatch(f"input width {X.shape[1]} != {model.layer_sizes[0]}")
        return _softmax(_forward(model, X)[-1])
    raise TypeError(f"not a static model: {type(model).__name__}")


def predict(model, x):
    """``(label_index, probability_of_that_label)``; ties go to the lowest index."""
    if isinstance(x, FeatureVector):
        if model.vocab_id and x.vocab_id and x.vocab_id != model.vocab_id:
            warnings.warn(f"feature vocabulary {x.vocab_id} differs from model's {model.vocab_id}")
        x = x.values
    p = predict_proba(model, np.asarray(x, dtype=float).reshape(1, -1))[0]
    label = int(np.argmax(p))
    return label, float(p[label])


def predict_many(model, X):
    p = predict_proba(model, X)
    labels = np.argmax(p, axis=1)
    return labels, p[np.arange(len(labels)), labels]


def accuracy(model, data):
    labels, _ = predict_many(model, data.X)
    return float(np.mean(labels == data.y))
