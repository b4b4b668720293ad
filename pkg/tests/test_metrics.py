import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vvt.errors import LengthMismatch, UnknownPositiveClass
from vvt.metrics import eval_metrics, roc_auc


def test_perfect_predictions():
    r = eval_metrics([0, 1, 1, 0], [0, 1, 1, 0], scores=[0.1, 0.9, 0.8, 0.2])
    assert r.accuracy == r.precision == r.recall == r.f1 == 1.0
    assert r.false_positive_rate == 0.0 and r.auc == 1.0


def test_all_wrong():
    r = eval_metrics([1, 0, 1, 0], [0, 1, 0, 1])
    assert r.accuracy == 0.0 and r.false_positive_rate == 1.0 and r.recall == 0.0
    assert r.auc is None


def test_positive_defaults_to_last_sorted_label():
    r = eval_metrics(["benign", "malicious"], ["benign", "malicious"])
    assert r.positive == "malicious"


def test_contracts():
    with pytest.raises(LengthMismatch):
        eval_metrics([0, 1], [0])
    with pytest.raises(UnknownPositiveClass):
        eval_metrics([0, 1], [0, 1], positive=2)


def test_auc_ties_and_single_class():
    assert roc_auc([True, False], [0.5, 0.5]) == pytest.approx(0.5)
    assert roc_auc([True, True], [0.1, 0.2]) is None
    assert roc_auc([False, True, False, True], [0.1, 0.4, 0.5, 0.8]) == pytest.approx(0.75)


def test_random_scores_give_chance_auc():
    rng = np.random.default_rng(0)
    truth = np.repeat([0, 1], 500)
    assert abs(roc_auc(truth == 1, rng.random(1000)) - 0.5) <= 0.05


def pairwise_auc(t, s):
    pos = [x for x, y in zip(s, t) if y]
    neg = [x for x, y in zip(s, t) if not y]
    wins = sum((p > n) + 0.5 * (p == n) for p in pos for n in neg)
    return wins / (len(pos) * len(neg))


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 5)), min_size=2, max_size=40))
def test_auc_matches_pairwise_oracle(pairs):
    t = [p[0] for p in pairs]
    s = [float(p[1]) for p in pairs]
    if all(t) or not any(t):
        assert roc_auc(t, s) is None
    else:
        assert roc_auc(t, s) == pytest.approx(pairwise_auc(t, s), abs=1e-12)


@given(st.lists(st.tuples(st.integers(0, 2), st.integers(0, 2)), min_size=1, max_size=50))
def test_metric_identities(pairs):
    pred = [p for p, _ in pairs]
    truth = [t for _, t in pairs]
    r = eval_metrics(pred, truth)
    assert r.confusion.sum() == len(pairs)
    for v in (r.accuracy, r.precision, r.recall, r.f1, r.false_positive_rate):
        assert 0.0 <= v <= 1.0
    if r.precision + r.recall:
        assert r.f1 == pytest.approx(2 * r.precision * r.recall / (r.precision + r.recall))
    assert r.accuracy == pytest.approx(np.trace(r.confusion) / len(pairs))
