"""Opcode n-gram counting, vocabulary building and vectorization."""

import csv
import hashlib
import math
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyVocabulary, InputError, InvalidN, LengthMismatch
from .selection import mutual_information

NORMS = ("relfreq", "tfidf", "raw")
GRAM_SEP = "|"


def extract_ngrams(seq, n):
    """Sliding-window (stride 1) gram counts; ``len(seq) - n + 1`` grams total."""
    if n < 1:
        raise InvalidN(f"n must be >= 1, got {n}")
    toks = tuple(seq)
    return Counter(toks[i:i + n] for i in range(len(toks) - n + 1))


def gram_to_str(gram):
    return GRAM_SEP.join(gram)


def str_to_gram(text):
    return tuple(text.split(GRAM_SEP))


def vocab_id_for(grams):
    grams = list(grams)
    n = len(grams[0]) if grams else 0
    text = f"{n}\n" + "\n".join(gram_to_str(g) for g in grams)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NgramVocab:
    n: int
    grams: tuple
    idf: np.ndarray
    selection: str = "frequency"

    def __len__(self):
        return len(self.grams)

    @property
    def entries(self):
        return {g: i for i, g in enumerate(self.grams)}

    @property
    def vocab_id(self):
        return vocab_id_for(self.grams)


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    vocab_id: str
    norm: str = "relfreq"


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    class_names: tuple
    vocab_id: str = ""
    norm: str = "relfreq"
    ids: tuple = field(default=())

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=int)
        if self.X.ndim != 2 or len(self.X) != len(self.y):
            raise LengthMismatch(f"{len(self.X)} rows vs {len(self.y)} labels")

    def __len__(self):
        return len(self.y)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=int)
        ids = tuple(self.ids[i] for i in idx) if self.ids else ()
        return LabeledDataset(self.X[idx], self.y[idx], self.class_names, self.vocab_id,
                              self.norm, ids)


def build_vocab(docs, labels=None, n=2, max_size=None, min_doc_freq=1,
                selection="frequency", mi_bins=2):
    """Learn an n-gram vocabulary from per-document gram counts.

    Grams seen in fewer than ``min_doc_freq`` documents are dropped. The rest
    are ranked by total count (``frequency``) or by mutual information between
    gram presence and ``labels`` (``info_gain``); ties fall back to
    lexicographic gram order. idf weights are frozen here.
    """
    docs = list(docs)
    if not docs:
        raise EmptyVocabulary("empty corpus")
    df = Counter()
    total = Counter()
    for counts in docs:
        for g, c in counts.items():
            if len(g) != n:
                raise InvalidN(f"gram {g!r} does not have length {n}")
            df[g] += 1
            total[g] += c
    kept = sorted(g for g in df if df[g] >= min_doc_freq)
    if not kept:
        raise EmptyVocabulary(f"no {n}-gram reaches document frequency {min_doc_freq}")
    if selection == "frequency":
        ranked = sorted(kept, key=lambda g: (-total[g], g))
    elif selection == "info_gain":
        if labels is None or len(labels) != len(docs):
            raise LengthMismatch("info_gain needs one label per document")
        presence = np.array([[1.0 if g in counts else 0.0 for g in kept] for counts in docs])
        mi = mutual_information(presence, labels, bins=mi_bins).scores
        ranked = [kept[j] for j in sorted(range(len(kept)), key=lambda j: (-mi[j], kept[j]))]
    else:
        raise ValueError(f"unknown selection {selection!r}")
    if max_size is not None:
        ranked = ranked[:max_size]
    D = len(docs)
    idf = np.array([math.log((1 + D) / (1 + df[g])) + 1.0 for g in ranked])
    return NgramVocab(n, tuple(ranked), idf, selection)


def vectorize(seq, vocab, norm="relfreq"):
    if norm not in NORMS:
        raise ValueError(f"unknown norm {norm!r}")
    if len(vocab) == 0:
        raise EmptyVocabulary("vocabulary is empty")
    counts = extract_ngrams(seq, vocab.n)
    index = vocab.entries
    values = np.zeros(len(vocab))
    for g, c in counts.items():
        j = index.get(g)
        if j is not None:
            values[j] = c
    if norm != "raw":
        total = sum(counts.values())
        if total:
            values /= total
        if norm == "tfidf":
            values *= vocab.idf
    return FeatureVector(values, vocab.vocab_id, norm)


def vectorize_corpus(seqs, labels, vocab, norm="relfreq", class_names=None, ids=None):
    if class_names is None:
        class_names = tuple(sorted(set(labels), key=str))
    code = {c: i for i, c in enumerate(class_names)}
    X = np.array([vectorize(s, vocab, norm).values for s in seqs]).reshape(len(seqs), len(vocab))
    y = np.array([code[lab] for lab in labels], dtype=int)
    return LabeledDataset(X, y, tuple(class_names), vocab.vocab_id, norm, tuple(ids or ()))


# -- files -------------------------------------------------------------------

def write_vocab(vocab, path):
    with open(path, "w") as fh:
        for i, (g, w) in enumerate(zip(vocab.grams, vocab.idf)):
            fh.write(f"{i}\t{gram_to_str(g)}\t{w:.17g}\n")


def read_vocab(path, selection="frequency"):
    grams, idf = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3 or int(parts[0]) != len(grams):
                raise InputError(f"{path}:{lineno}: bad vocabulary line")
            grams.append(str_to_gram(parts[1]))
            idf.append(float(parts[2]))
    if not grams:
        raise EmptyVocabulary(f"{path}: no entries")
    n = len(grams[0])
    if any(len(g) != n for g in grams):
        raise InputError(f"{path}: mixed gram lengths")
    return NgramVocab(n, tuple(grams), np.array(idf), selection)


def write_feature_csv(dataset, grams, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["label"] + [gram_to_str(g) for g in grams])
        for row, label in zip(dataset.X, dataset.y):
            w.writerow([dataset.class_names[label]] + [f"{v:.17g}" for v in row])


def read_feature_csv(path, class_names=None, norm="raw"):
    """Returns ``(dataset, grams)``; class names default to the sorted labels."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["label"]:
        raise InputError(f"{path}:1: header must start with 'label'")
    grams = tuple(str_to_gram(h) for h in rows[0][1:])
    labels, X = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(rows[0]):
            raise InputError(f"{path}:{lineno}: expected {len(rows[0])} fields, got {len(row)}")
        labels.append(row[0])
        try:
            X.append([float(v) for v in row[1:]])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
    if class_names is None:
        class_names = tuple(sorted(set(labels)))
    code = {c: i for i, c in enumerate(class_names)}
    unknown = set(labels) - set(code)
    if unknown:
        raise InputError(f"{path}: labels {sorted(unknown)} not in {list(class_names)}")
    X = np.array(X, dtype=float).reshape(len(labels), len(grams))
    ds = LabeledDataset(X, [code[x] for x in labels], tuple(class_names), vocab_id_for(grams), norm)
    return ds, grams
