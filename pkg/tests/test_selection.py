import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from vvt.errors import ConstantInput, ContractError, InvalidK, LengthMismatch, SingleClass
from vvt.selection import (correlation_filter, fisher_score, jacobi_eigh, mutual_information,
                           pca_fit, pca_reconstruct, pca_transform, pearson_corr,
                           pearson_scores, select_events, write_score_report)


def test_fisher_examples():
    assert fisher_score([0, 1, 2, 3], [0, 0, 1, 1]).scores[0] == pytest.approx(4.0, abs=1e-9)
    assert fisher_score([0, 0, 1, 1], [0, 0, 1, 1]).scores[0] == math.inf
    assert fisher_score([5, 5, 5, 5], [0, 0, 1, 1]).scores[0] == 0.0


def test_fisher_ranking_and_budget():
    X = np.array([[0, 0, 5], [1, 0, 5], [2, 1, 5], [3, 1, 5]], float)
    rep = fisher_score(X, [0, 0, 1, 1])
    assert rep.ranking == (1, 0, 2)
    assert select_events(rep, 1) == [1]
    assert select_events(rep, 10) == [1, 0, 2]


def test_fisher_contracts():
    with pytest.raises(SingleClass):
        fisher_score([1, 2, 3], [0, 0, 0])


def test_pearson_examples():
    x = [1.0, 2.0, 4.0]
    assert pearson_corr(x, x) == pytest.approx(1.0)
    assert pearson_corr(x, [-v for v in x]) == pytest.approx(-1.0)
    assert pearson_corr([1, 2, 3], [1, 3, 2]) == pytest.approx(0.5, abs=1e-9)
    with pytest.raises(ConstantInput):
        pearson_corr([1, 1, 1], [1, 2, 3])
    with pytest.raises(LengthMismatch):
        pearson_corr([1, 2], [1, 2, 3])


def test_pearson_scores_dead_counter_scores_zero():
    X = np.array([[1, 7], [2, 7], [3, 7], [4, 7]], float)
    rep = pearson_scores(X, [0, 0, 1, 1])
    assert rep.scores[1] == 0.0 and rep.scores[0] > 0.8


def test_mi_examples():
    assert mutual_information([0, 0, 1, 1], [0, 0, 1, 1], bins=2).scores[0] == \
        pytest.approx(math.log(2), abs=1e-9)
    assert mutual_information([0, 1, 0, 1], [0, 0, 1, 1], bins=2).scores[0] == \
        pytest.approx(0.0, abs=1e-9)
    assert mutual_information([3, 3, 3, 3], [0, 1, 0, 1]).scores[0] == 0.0
    with pytest.raises(ContractError):
        mutual_information([1, 2], [0, 1], bins=1)


def test_select_events_ties_and_include():
    rep = fisher_score(np.array([[0, 0], [1, 1], [2, 2], [3, 3]], float), [0, 0, 1, 1])
    assert rep.ranking == (0, 1)
    assert select_events(rep, 1, include=[1]) == [1]
    assert select_events(rep, 2, include=[1]) == [1, 0]
    with pytest.raises(ContractError):
        select_events(rep, 0)


def test_score_report_csv(tmp_path):
    rep = fisher_score([0, 1, 2, 3], [0, 0, 1, 1], names=["L3_MISS"])
    write_score_report(rep, tmp_path / "r.csv")
    assert (tmp_path / "r.csv").read_text() == "rank,feature,score\n1,L3_MISS,4\n"


def test_correlation_filter():
    x = np.arange(10.0)
    X = np.column_stack([x, 2 * x + 1, np.sin(x), np.ones(10)])
    assert correlation_filter(X) == [0, 2]


labeled = st.integers(4, 30).flatmap(lambda n: st.tuples(
    arrays(float, (n, 3), elements=st.floats(-100, 100)),
    arrays(np.int64, n, elements=st.integers(0, 2))))


@settings(max_examples=60)
@given(labeled)
def test_scores_invariant_under_duplication(data):
    X, y = data
    X2, y2 = np.vstack([X, X]), np.concatenate([y, y])
    mi = mutual_information(X, y).scores
    assert np.all(mi >= 0)
    assert np.allclose(mutual_information(X2, y2).scores, mi, atol=1e-12)
    if len(np.unique(y)) >= 2:
        assert np.allclose(pearson_scores(X2, y2).scores, pearson_scores(X, y).scores)
        counts = np.bincount(y)
        if counts[counts > 0].min() >= 2:
            a, b = fisher_score(X, y).scores, fisher_score(X2, y2).scores
            assert np.allclose(a, b, rtol=1e-9, equal_nan=False)


@settings(max_examples=40)
@given(st.integers(2, 5).flatmap(lambda k: st.tuples(
    arrays(np.int64, 40, elements=st.integers(0, k - 1)),
    arrays(np.int64, 40, elements=st.integers(0, 1)))))
def test_mi_matches_contingency_enumeration(data):
    x, y = data
    got = mutual_information(x.astype(float), y, bins=int(max(x.max() - x.min(), 1)) + 1)
    n = len(x)
    ref = 0.0
    for a in np.unique(x):
        for b in np.unique(y):
            pab = np.sum((x == a) & (y == b)) / n
            if pab:
                ref += pab * math.log(pab / (np.mean(x == a) * np.mean(y == b)))
    assert got.scores[0] == pytest.approx(ref, abs=1e-12)


# -- PCA ---------------------------------------------------------------------

def test_jacobi_matches_numpy_eigh():
    rng = np.random.default_rng(0)
    A = rng.normal(size=(8, 8))
    A = A + A.T
    vals, vecs = jacobi_eigh(A)
    ref = np.linalg.eigh(A)[0]
    assert np.allclose(np.sort(vals), ref, atol=1e-10)
    assert np.allclose(A @ vecs, vecs * vals, atol=1e-9)


def test_pca_line():
    t = np.linspace(-3, 3, 11)
    X = np.column_stack([t, t])
    model = pca_fit(X, 2)
    v = t.var()
    assert model.eigenvalues == pytest.approx([2 * v, 0.0], abs=1e-9)
    one = pca_fit(X, 1)
    assert np.allclose(pca_reconstruct(one, pca_transform(one, X)), X, atol=1e-9)
    assert np.allclose(one.components[0], [1 / math.sqrt(2)] * 2)


def test_pca_full_basis_and_mean_row():
    X = np.random.default_rng(1).normal(size=(30, 5))
    model = pca_fit(X, 5)
    assert np.allclose(pca_reconstruct(model, pca_transform(model, X)), X, atol=1e-9)
    assert np.allclose(pca_transform(model, X.mean(axis=0, keepdims=True)), 0.0, atol=1e-12)


def test_pca_sign_convention_and_contracts():
    X = np.random.default_rng(2).normal(size=(20, 4))
    model = pca_fit(X, 3)
    for c in model.components:
        assert c[np.argmax(np.abs(c))] > 0
    with pytest.raises(InvalidK):
        pca_fit(X, 0)
    with pytest.raises(InvalidK):
        pca_fit(X, 5)
    assert model.truncate(1).k == 1


@settings(max_examples=30)
@given(st.integers(0, 2**32 - 1), st.integers(2, 8), st.integers(3, 25))
def test_pca_numeric_properties(seed, d, n):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, d)) @ rng.normal(size=(d, d))
    k = min(n, d)
    model = pca_fit(X, k)
    C = model.components
    assert np.max(np.abs(C @ C.T - np.eye(k))) < 1e-8
    assert np.all(np.diff(model.eigenvalues) <= 1e-12)
    assert np.all(model.eigenvalues >= -1e-12)
    total = X.var(axis=0).sum()
    if k == d:
        assert model.eigenvalues.sum() == pytest.approx(total, rel=1e-6, abs=1e-12)
    errs = []
    for j in range(1, k + 1):
        m = model.truncate(j)
        errs.append(np.sum((X - pca_reconstruct(m, pca_transform(m, X))) ** 2))
    assert all(b <= a + 1e-9 * max(1.0, errs[0]) for a, b in zip(errs, errs[1:]))
