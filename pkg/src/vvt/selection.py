"""Feature scoring and dimensionality reduction for counter features.

Population statistics (divisor N) are used throughout. Rankings sort by
descending score and break ties by ascending feature index.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstantInput, ContractError, InvalidK, LengthMismatch, SingleClass, TooFewSamples


@dataclass(frozen=True)
class FeatureScoreReport:
    method: str
    scores: np.ndarray
    ranking: tuple
    names: tuple = field(default=())


def rank_scores(scores):
    scores = np.asarray(scores, dtype=float)
    return tuple(sorted(range(len(scores)), key=lambda j: (-scores[j], j)))


def _report(method, scores, names):
    scores = np.asarray(scores, dtype=float)
    return FeatureScoreReport(method, scores, rank_scores(scores), tuple(names or ()))


def _xy(X, y):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y)
    if X.ndim != 2 or len(X) != len(y):
        raise LengthMismatch(f"X has {len(X)} rows but y has {len(y)} labels")
    return X, y


def fisher_score(X, y, names=None):
    """Between-class over within-class spread per feature.

    ``F_j = sum_c n_c (mu_cj - mu_j)^2 / sum_c n_c var_cj``; a zero denominator
    gives +inf when the numerator is positive and 0 otherwise.
    """
    X, y = _xy(X, y)
    classes = np.unique(y)
    if len(classes) < 2:
        raise SingleClass("Fisher score needs at least two classes")
    mu = X.mean(axis=0)
    num = np.zeros(X.shape[1])
    den = np.zeros(X.shape[1])
    for c in classes:
        Xc = X[y == c]
        if len(Xc) < 2:
            raise TooFewSamples(f"class {c!r} has {len(Xc)} sample(s); need 2")
        num += len(Xc) * (Xc.mean(axis=0) - mu) ** 2
        den += len(Xc) * Xc.var(axis=0)
    # sums below the rounding floor of the column's magnitude are exact zeros,
    # so a constant feature never turns its mean's roundoff into +inf
    floor = len(X) * (64 * np.finfo(float).eps * np.abs(X).max(axis=0)) ** 2
    num = np.where(num > floor, num, 0.0)
    den = np.where(den > floor, den, 0.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        scores = np.where(den > 0, num / np.where(den > 0, den, 1.0),
                          np.where(num > 0, np.inf, 0.0))
    return _report("fisher", scores, names)


def pearson_corr(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"series shapes differ: {x.shape} vs {y.shape}")
    if len(x) < 2:
        raise LengthMismatch("need at least two points")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = dx @ dx
    syy = dy @ dy
    if sxx == 0 or syy == 0:
        raise ConstantInput("correlation with a constant series is undefined")
    return float(np.clip((dx @ dy) / np.sqrt(sxx * syy), -1.0, 1.0))


def pearson_scores(X, y, names=None):
    """|r| between each feature and the (numeric) label; dead features score 0."""
    X, y = _xy(X, y)
    if len(np.unique(y)) < 2:
        raise SingleClass("labels are constant")
    _, codes = np.unique(y, return_inverse=True)
    scores = []
    for j in range(X.shape[1]):
        try:
            scores.append(abs(pearson_corr(X[:, j], codes)))
        except ConstantInput:
            scores.append(0.0)
    return _report("pearson", scores, names)


def correlation_filter(X, threshold=0.95, order=None):
    """Greedy redundancy filter: keep a feature unless |r| with a kept one exceeds ``threshold``.

    Features are visited in ``order`` (default: index order); constant
    features are dropped.
    """
    X = np.asarray(X, dtype=float)
    order = range(X.shape[1]) if order is None else order
    kept = []
    for j in order:
        if np.ptp(X[:, j]) == 0:
            continue
        if all(abs(pearson_corr(X[:, j], X[:, k])) <= threshold for k in kept):
            kept.append(j)
    return kept


def _bin(col, bins):
    lo, hi = col.min(), col.max()
    if hi == lo:
        return np.zeros(len(col), dtype=int)
    idx = np.floor((col - lo) / (hi - lo) * bins).astype(int)
    return np.clip(idx, 0, bins - 1)


def mutual_information(X, y, bins=10, names=None):
    """Equal-width-binned mutual information (nats) between each feature and ``y``."""
    if bins < 2:
        raise ContractError("bins must be >= 2")
    X, y = _xy(X, y)
    _, codes = np.unique(y, return_inverse=True)
    n_cls = codes.max() + 1 if len(codes) else 0
    n = len(y)
    scores = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        b = _bin(X[:, j], bins)
        joint = np.zeros((bins, n_cls))
        np.add.at(joint, (b, codes), 1.0)
        joint /= n
        pb = joint.sum(axis=1, keepdims=True)
        pc = joint.sum(axis=0, keepdims=True)
        nz = joint > 0
        mi = np.sum(joint[nz] * np.log(joint[nz] / (pb @ pc)[nz]))
        scores[j] = max(mi, 0.0)
    return _report("mutual_info", scores, names)


def select_events(report, budget, include=()):
    """Indices of at most ``budget`` features: ``include`` first, then by rank."""
    if budget < 1:
        raise ContractError("counter budget must be >= 1")
    chosen = []
    for j in list(include) + list(report.ranking):
        if j not in chosen:
            chosen.append(j)
        if len(chosen) == budget:
            break
    return chosen


def write_score_report(report, path):
    names = report.names or tuple(str(j) for j in range(len(report.scores)))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature", "score"])
        for rank, j in enumerate(report.ranking, start=1):
            w.writerow([rank, names[j], f"{report.scores[j]:.17g}"])


# -- PCA ---------------------------------------------------------------------

def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
    """Eigen-decomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns ``(eigenvalues, eigenvectors)`` with eigenvectors as columns, in
    diagonal order (unsorted). Stops when the off-diagonal Frobenius norm
    drops below ``tol`` times the matrix norm.
    """
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = np.linalg.norm(A)
    if scale == 0:
        return np.zeros(n), V
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) <= 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp, cq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * cp - s * cq
                A[:, q] = s * cp + c * cq
                rp, rq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray
    eigenvalues: np.ndarray

    @property
    def k(self):
        return len(self.eigenvalues)

    def truncate(self, k):
        if not 1 <= k <= self.k:
            raise InvalidK(f"k={k} outside 1..{self.k}")
        return PcaModel(self.mean, self.components[:k], self.eigenvalues[:k])


def pca_fit(X, k):
    X = np.asarray(X, dtype=float)
    n, d = X.shape
    if not 1 <= k <= min(n, d):
        raise InvalidK(f"k={k} outside 1..{min(n, d)}")
    mean = X.mean(axis=0)
    Xc = X - mean
    cov = Xc.T @ Xc / n
    vals, vecs = jacobi_eigh(cov)
    order = sorted(range(d), key=lambda i: (-vals[i], i))
    vals = np.clip(vals[order], 0.0, None)
    comps = vecs[:, order].T.copy()
    for row in comps:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    return PcaModel(mean, comps[:k], vals[:k])


def pca_transform(model, X):
    return (np.asarray(X, dtype=float) - model.mean) @ model.components.T


def pca_reconstruct(model, scores):
    return np.asarray(scores, dtype=float) @ model.components + model.mean
