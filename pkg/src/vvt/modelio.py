"""Versioned JSON model files shared by every model kind.

Document layout::

    {"format_version": 1, "kind": "...", "vocab_id": "...", "params": {...}, "meta": {...}}

Arrays are stored as ``{"shape": [...], "data": [...]}`` in row-major order.
Python's float repr is the shortest exact round-trip form, so loaded models
predict bit-identically.
"""

import json

import numpy as np

from . import detectors as det
from .errors import ModelFormatError
from .selection import PcaModel
from .static_models import MlpModel, NbModel

FORMAT_VERSION = 1


def _arr(a):
    a = np.asarray(a)
    return {"shape": list(a.shape), "data": a.ravel().tolist()}


def _unarr(d, dtype=float):
    return np.array(d["data"], dtype=dtype).reshape(d["shape"])


def _labels(values):
    return [v.item() if isinstance(v, np.generic) else v for v in values]


def _encode(model):
    if isinstance(model, NbModel):
        return "nb", model.vocab_id, {
            "class_log_priors": _arr(model.class_log_priors),
            "feature_log_likelihoods": _arr(model.feature_log_likelihoods),
            "alpha": model.alpha,
            "class_names": list(model.class_names),
        }
    if isinstance(model, MlpModel):
        return "mlp", model.vocab_id, {
            "layer_sizes": list(model.layer_sizes),
            "activation": model.activation,
            "weights": [_arr(w) for w in model.weights],
            "biases": [_arr(b) for b in model.biases],
            "class_names": list(model.class_names),
        }
    if isinstance(model, det.GaussianOneClass):
        return "gauss", "", {
            "mean": _arr(model.mean), "variances": _arr(model.variances),
            "threshold": model.threshold, "threshold_percentile": model.threshold_percentile,
            "train_scores": _arr(model.train_scores),
        }
    if isinstance(model, det.KnnOneClass):
        return "knn", "", {
            "reference": _arr(model.reference), "k": model.k,
            "threshold": model.threshold, "threshold_percentile": model.threshold_percentile,
            "train_scores": _arr(model.train_scores),
        }
    if isinstance(model, det.GaussianClassifier):
        return "gauss_classifier", "", {
            "class_names": list(model.class_names), "means": _arr(model.means),
            "variances": _arr(model.variances), "log_priors": _arr(model.log_priors),
        }
    if isinstance(model, det.AdaBoostModel):
        return "adaboost", "", {
            "features": list(model.features), "thresholds": list(model.thresholds),
            "polarities": list(model.polarities), "alphas": list(model.alphas),
            "epsilons": list(model.epsilons), "classes": _labels(model.classes),
        }
    if isinstance(model, det.BaggingModel):
        return "bagging", "", {
            "models": [to_dict(m) for m in model.models], "classes": _labels(model.classes),
            "base": model.base, "seed": model.seed,
        }
    if isinstance(model, det.TwoStageModel):
        return "two_stage", "", {
            "stage1": to_dict(model.stage1), "stage2": to_dict(model.stage2),
            "normal_label": model.normal_label,
        }
    if isinstance(model, PcaModel):
        return "pca", "", {
            "mean": _arr(model.mean), "components": _arr(model.components),
            "eigenvalues": _arr(model.eigenvalues),
        }
    raise TypeError(f"cannot serialize {type(model).__name__}")


def to_dict(model, meta=None):
    kind, vocab_id, params = _encode(model)
    doc = {"format_version": FORMAT_VERSION, "kind": kind, "vocab_id": vocab_id, "params": params}
    if meta:
        doc["meta"] = meta
    return doc


def from_dict(doc):
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {doc.get('format_version')!r}"
                               if isinstance(doc, dict) else "model document must be an object")
    kind = doc.get("kind")
    p = doc.get("params", {})
    try:
        if kind == "nb":
            return NbModel(_unarr(p["class_log_priors"]), _unarr(p["feature_log_likelihoods"]),
                           p["alpha"], doc.get("vocab_id", ""), tuple(p["class_names"]))
        if kind == "mlp":
            return MlpModel(tuple(p["layer_sizes"]), [_unarr(w) for w in p["weights"]],
                            [_unarr(b) for b in p["biases"]], doc.get("vocab_id", ""),
                            tuple(p["class_names"]), p.get("activation", "relu"))
        if kind == "gauss":
            return det.GaussianOneClass(_unarr(p["mean"]), _unarr(p["variances"]),
                                        p["threshold"], p["threshold_percentile"],
                                        _unarr(p["train_scores"]))
        if kind == "knn":
            return det.KnnOneClass(_unarr(p["reference"]), p["k"], p["threshold"],
                                   p["threshold_percentile"], _unarr(p["train_scores"]))
        if kind == "gauss_classifier":
            return det.GaussianClassifier(tuple(p["class_names"]), _unarr(p["means"]),
                                          _unarr(p["variances"]), _unarr(p["log_priors"]))
        if kind == "adaboost":
            return det.AdaBoostModel(list(p["features"]), list(p["thresholds"]),
                                     list(p["polarities"]), list(p["alphas"]),
                                     tuple(p["classes"]), list(p.get("epsilons", [])))
        if kind == "bagging":
            return det.BaggingModel([from_dict(m) for m in p["models"]], tuple(p["classes"]),
                                    p["base"], p["seed"])
        if kind == "two_stage":
            return det.TwoStageModel(from_dict(p["stage1"]), from_dict(p["stage2"]),
                                     p["normal_label"])
        if kind == "pca":
            return PcaModel(_unarr(p["mean"]), _unarr(p["components"]), _unarr(p["eigenvalues"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ModelFormatError(f"malformed {kind} model: {exc}") from None
    raise ModelFormatError(f"unknown model kind {kind!r}")


def save_model(model, path, meta=None):
    with open(path, "w") as fh:
        json.dump(to_dict(model, meta), fh)
        fh.write("\n")


def load_model(path, with_meta=False):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not JSON ({exc})") from None
    model = from_dict(doc)
    return (model, doc.get("meta", {})) if with_meta else model
