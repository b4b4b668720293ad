"""Independent reference computations shared by the unit and acceptance tests."""

import numpy as np

from vvt.static_models import mlp_loss


def finite_difference_check(model, X, y, l2=0.0, h=1e-5):
    """Max relative error between backprop and central differences over all parameters.

    Relative error is ``|a - n| / max(|a|, |n|, 1e-6)`` so near-zero
    gradients do not blow up the ratio.
    """
    from vvt.static_models import mlp_loss_and_grads

    _, gW, gb = mlp_loss_and_grads(model, X, y, l2)
    worst = 0.0
    for params, grads in ((model.weights, gW), (model.biases, gb)):
        for P, G in zip(params, grads):
            it = np.nditer(P, flags=["multi_index"])
            for _ in it:
                i = it.multi_index
                old = P[i]
                P[i] = old + h
                up = mlp_loss(model, X, y, l2)
                P[i] = old - h
                down = mlp_loss(model, X, y, l2)
                P[i] = old
                num = (up - down) / (2 * h)
                err = abs(G[i] - num) / max(abs(G[i]), abs(num), 1e-6)
                worst = max(worst, err)
    return worst


def brute_force_ngrams(seq, n):
    out = {}
    for i in range(len(seq) - n + 1):
        g = tuple(seq[i:i + n])
        out[g] = out.get(g, 0) + 1
    return out


def brute_force_knn_score(reference, x, k):
    d = sorted(float(np.sqrt(np.sum((r - x) ** 2))) for r in reference)
    return sum(d[:k]) / k
