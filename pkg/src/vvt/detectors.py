"""Anomaly detectors for windowed counter features.

One-class models are fitted on normal windows only and flag anything whose
score exceeds a percentile of the training scores. AdaBoost (decision stumps),
bagging and a two-stage one-class -> multi-class arrangement cover the
supervised side.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError, EmptyEnsemble, ShapeMismatch, SingleClass, TooFewSamples

VARIANCE_FLOOR = 1e-12
EPS_MIN = 1e-10


def _matrix(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    return X


def _check_percentile(p):
    if not 0 < p <= 100:
        raise ContractError(f"threshold percentile {p} outside (0, 100]")


# -- one-class ---------------------------------------------------------------

@dataclass
class GaussianOneClass:
    mean: np.ndarray
    variances: np.ndarray
    threshold: float
    threshold_percentile: float
    train_scores: np.ndarray = field(repr=False)


@dataclass
class KnnOneClass:
    reference: np.ndarray = field(repr=False)
    k: int
    threshold: float
    threshold_percentile: float
    train_scores: np.ndarray = field(repr=False)


def fit_oneclass_gaussian(X_normal, threshold_percentile=95.0, variance_floor=VARIANCE_FLOOR):
    """Diagonal Gaussian; the score is the squared diagonal Mahalanobis distance."""
    X = _matrix(X_normal)
    if len(X) < 2:
        raise TooFewSamples(f"need >= 2 normal samples, got {len(X)}")
    _check_percentile(threshold_percentile)
    mean = X.mean(axis=0)
    var = np.maximum(X.var(axis=0), variance_floor)
    train = np.sum((X - mean) ** 2 / var, axis=1)
    threshold = float(np.percentile(train, threshold_percentile))
    return GaussianOneClass(mean, var, threshold, float(threshold_percentile), train)


def _knn_mean_dist(dist, k):
    return np.sort(dist, axis=1)[:, :k].mean(axis=1)


def _pairwise(A, B):
    d2 = (A * A).sum(1)[:, None] + (B * B).sum(1)[None, :] - 2.0 * A @ B.T
    return np.sqrt(np.maximum(d2, 0.0))


def fit_knn_oneclass(X_normal, k=5, threshold_percentile=95.0):
    """Mean distance to the ``k`` nearest normal points; leave-one-out threshold."""
    X = _matrix(X_normal)
    if k < 1 or len(X) <= k:
        raise TooFewSamples(f"need more than k={k} normal samples, got {len(X)}")
    _check_percentile(threshold_percentile)
    dist = np.sqrt(((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=2))
    np.fill_diagonal(dist, np.inf)
    train = _knn_mean_dist(dist, k)
    threshold = float(np.percentile(train, threshold_percentile))
    return KnnOneClass(X.copy(), int(k), threshold, float(threshold_percentile), train)


def oneclass_scores(model, X):
    X = _matrix(X)
    if isinstance(model, GaussianOneClass):
        if X.shape[1] != len(model.mean):
            raise ShapeMismatch(f"expected {len(model.mean)} features, got {X.shape[1]}")
        return np.sum((X - model.mean) ** 2 / model.variances, axis=1)
    if isinstance(model, KnnOneClass):
        if X.shape[1] != model.reference.shape[1]:
            raise ShapeMismatch(f"expected {model.reference.shape[1]} features, got {X.shape[1]}")
        return _knn_mean_dist(np.sqrt(((X[:, None, :] - model.reference[None]) ** 2).sum(2)),
                              model.k)
    raise TypeError(f"not a one-class model: {type(model).__name__}")


def detect(model, x):
    """``(score, is_anomalous)`` for one sample."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    score = float(oneclass_scores(model, x)[0])
    return score, score > model.threshold


def detect_many(model, X):
    s = oneclass_scores(model, X)
    return s, s > model.threshold


# -- multi-class Gaussian ----------------------------------------------------

@dataclass
class GaussianClassifier:
    """Per-class diagonal Gaussians (Gaussian naive Bayes)."""

    class_names: tuple
    means: np.ndarray
    variances: np.ndarray
    log_priors: np.ndarray


def fit_gaussian_classifier(X, labels, var_smoothing=1e-9):
    X = _matrix(X)
    labels = list(labels)
    if len(labels) != len(X):
        raise ShapeMismatch(f"{len(X)} rows vs {len(labels)} labels")
    classes = tuple(sorted(set(labels), key=str))
    lab = np.array([classes.index(v) for v in labels])
    eps = var_smoothing * max(float(X.var(axis=0).max()), VARIANCE_FLOOR)
    means, variances, priors = [], [], []
    for c in range(len(classes)):
        Xc = X[lab == c]
        means.append(Xc.mean(axis=0))
        variances.append(Xc.var(axis=0) + eps)
        priors.append(len(Xc) / len(X))
    return GaussianClassifier(classes, np.array(means), np.maximum(np.array(variances),
                              VARIANCE_FLOOR), np.log(priors))


def gaussian_log_posterior(model, X):
    X = _matrix(X)
    if X.shape[1] != model.means.shape[1]:
        raise ShapeMismatch(f"expected {model.means.shape[1]} features, got {X.shape[1]}")
    diff = X[:, None, :] - model.means[None]
    ll = -0.5 * np.sum(diff ** 2 / model.variances + np.log(2 * np.pi * model.variances), axis=2)
    return ll + model.log_priors


def classify(model, x):
    """Most probable class name for one sample (lowest index on ties)."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    return model.class_names[int(np.argmax(gaussian_log_posterior(model, x)[0]))]


def classify_many(model, X):
    return [model.class_names[i] for i in np.argmax(gaussian_log_posterior(model, X), axis=1)]


# -- AdaBoost ----------------------------------------------------------------

@dataclass
class AdaBoostModel:
    features: list
    thresholds: list
    polarities: list
    alphas: list
    classes: tuple
    epsilons: list = field(default_factory=list)

    @property
    def stumps(self):
        return list(zip(self.features, self.thresholds, self.polarities))


def stump_predict(X, feature, threshold, polarity):
    return np.where(X[:, feature] > threshold, polarity, -polarity)


def best_stump(X, ys, D):
    """Lowest weighted-error stump ``(feature, threshold, polarity, error)``.

    Thresholds sit at midpoints between consecutive distinct values. Ties go
    to the lower feature, then the lower threshold, then polarity +1.
    Returns ``None`` when no feature has two distinct values.
    """
    best = None
    total = D.sum()
    for j in range(X.shape[1]):
        order = np.argsort(X[:, j], kind="stable")
        xs = X[order, j]
        w = D[order]
        yo = ys[order]
        last = np.flatnonzero(np.diff(xs) > 0)  # index of last row <= each threshold
        if not len(last):
            continue
        pos_le = np.cumsum(np.where(yo > 0, w, 0.0))[last]
        neg_le = np.cumsum(np.where(yo < 0, w, 0.0))[last]
        neg_total = w[yo < 0].sum()
        err_pos = pos_le + (neg_total - neg_le)
        err_neg = total - err_pos
        errs = np.minimum(err_pos, err_neg)
        i = int(np.argmin(errs))
        if best is None or errs[i] < best[3]:
            thr = (xs[last[i]] + xs[last[i] + 1]) / 2.0
            pol = 1 if err_pos[i] <= err_neg[i] else -1
            best = (j, float(thr), pol, float(errs[i]))
    return best


def _binary(y):
    y = np.asarray(y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClass("AdaBoost needs both classes present")
    if len(classes) > 2:
        raise ContractError(f"AdaBoost is binary; got classes {classes.tolist()}")
    return tuple(classes.tolist()), np.where(y == classes[1], 1, -1)


def adaboost_train(X, y, rounds, on_round=None):
    """Discrete AdaBoost over decision stumps.

    Stops early when a stump is perfect (kept, alpha capped via ``EPS_MIN``)
    or no stump beats chance (discarded). ``on_round(t, D_next, eps, alpha)``
    is called after each kept round with the updated distribution.
    """
    X = _matrix(X)
    classes, ys = _binary(y)
    n = len(ys)
    D = np.full(n, 1.0 / n)
    model = AdaBoostModel([], [], [], [], classes)
    for t in range(rounds):
        stump = best_stump(X, ys, D)
        if stump is None:
            break
        j, thr, pol, _ = stump
        h = stump_predict(X, j, thr, pol)
        wrong = h != ys
        eps = float(D[wrong].sum())
        if eps >= 0.5:
            break
        eff = max(eps, EPS_MIN) if not wrong.any() else eps
        alpha = 0.5 * math.log((1.0 - eff) / eff)
        model.features.append(j)
        model.thresholds.append(thr)
        model.polarities.append(pol)
        model.alphas.append(alpha)
        model.epsilons.append(eps)
        if not wrong.any():
            if on_round:
                on_round(t, D, eps, alpha)
            break
        D = D * np.exp(-alpha * ys * h)
        D /= D.sum()
        if on_round:
            on_round(t, D, eps, alpha)
    return model


def adaboost_decision(model, X):
    X = _matrix(X)
    if not model.alphas:
        raise EmptyEnsemble("AdaBoost model has no stumps")
    F = np.zeros(len(X))
    for a, (j, thr, pol) in zip(model.alphas, model.stumps):
        F += a * stump_predict(X, j, thr, pol)
    return F


def staged_decision(model, X):
    """Cumulative decision values after each round."""
    X = _matrix(X)
    F = np.zeros(len(X))
    for a, (j, thr, pol) in zip(model.alphas, model.stumps):
        F = F + a * stump_predict(X, j, thr, pol)
        yield F


def adaboost_predict(model, X):
    F = adaboost_decision(model, X)
    lo, hi = model.classes
    return np.where(F > 0, hi, lo)


# -- bagging -----------------------------------------------------------------

@dataclass
class BaggingModel:
    models: list
    classes: tuple
    base: str
    seed: int


def _fit_base(base, X, y, params):
    if base == "stump":
        return adaboost_train(X, y, 1)
    if base == "adaboost":
        return adaboost_train(X, y, int(params.get("rounds", 10)))
    if base == "gaussian":
        return fit_gaussian_classifier(X, y)
    raise ValueError(f"unknown base learner {base!r}")


def _predict_base(model, X):
    if isinstance(model, AdaBoostModel):
        return list(adaboost_predict(model, X))
    return classify_many(model, X)


def bootstrap_indices(rng, n):
    return rng.integers(0, n, size=n)


def bagging_train(X, y, bags, base="stump", seed=0, params=None, resample=bootstrap_indices,
                  max_redraws=100):
    """Bootstrap ensemble. ``resample(rng, n)`` draws row indices per bag.

    Binary bases need both classes in a bag; such bags are redrawn from the
    same generator (up to ``max_redraws`` times), which keeps runs
    deterministic for a given seed and row order.
    """
    if bags < 1:
        raise ContractError("bags must be >= 1")
    X = _matrix(X)
    y = np.asarray(y)
    classes = tuple(np.unique(y).tolist())
    params = params or {}
    rng = np.random.default_rng(seed)
    models = []
    for _ in range(bags):
        for _ in range(max_redraws):
            idx = resample(rng, len(y))
            if base == "gaussian" or len(np.unique(y[idx])) == 2:
                break
        else:
            raise SingleClass("could not draw a bootstrap sample with both classes")
        models.append(_fit_base(base, X[idx], y[idx], params))
    return BaggingModel(models, classes, base, seed)


def bagging_predict(model, X):
    """Majority vote; base models without stumps abstain; ties -> lowest label."""
    X = _matrix(X)
    votes = np.zeros((len(X), len(model.classes)), dtype=int)
    index = {c: i for i, c in enumerate(model.classes)}
    voters = 0
    for m in model.models:
        if isinstance(m, AdaBoostModel) and not m.alphas:
            continue
        voters += 1
        for row, lab in enumerate(_predict_base(m, X)):
            votes[row, index[lab]] += 1
    if not voters:
        raise EmptyEnsemble("no base model can vote")
    return np.array([model.classes[i] for i in np.argmax(votes, axis=1)])


# -- two-stage ---------------------------------------------------------------

@dataclass
class TwoStageModel:
    stage1: object
    stage2: GaussianClassifier
    normal_label: str = "normal"

    def __post_init__(self):
        d1 = len(self.stage1.mean) if isinstance(self.stage1, GaussianOneClass) \
            else self.stage1.reference.shape[1]
        if d1 != self.stage2.means.shape[1]:
            raise ShapeMismatch(f"stage feature widths differ: {d1} vs {self.stage2.means.shape[1]}")


def fit_two_stage(X, labels, normal_label="normal", stage1="gauss", threshold_percentile=95.0,
                  k=5):
    X = _matrix(X)
    labels = np.asarray([str(v) for v in labels])
    normal = labels == str(normal_label)
    if normal.sum() < 2 or normal.all():
        raise TooFewSamples("two-stage training needs normal and anomalous rows")
    if stage1 == "gauss":
        s1 = fit_oneclass_gaussian(X[normal], threshold_percentile)
    elif stage1 == "knn":
        s1 = fit_knn_oneclass(X[normal], k, threshold_percentile)
    else:
        raise ValueError(f"unknown stage-1 kind {stage1!r}")
    s2 = fit_gaussian_classifier(X[~normal], labels[~normal].tolist())
    return TwoStageModel(s1, s2, str(normal_label))


def two_stage_detect(model, x):
    """``normal_label`` or the stage-2 anomaly class; stage 2 runs only on anomalies."""
    _, anomalous = detect(model.stage1, x)
    if not anomalous:
        return model.normal_label
    return classify(model.stage2, x)
