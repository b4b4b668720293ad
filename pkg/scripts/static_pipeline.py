"""Opcode n-gram classification on synthetic Markov families, with an n sweep.

For each n, builds a vocabulary on the training split, trains naive Bayes and
an MLP on raw counts, and prints held-out accuracy. ``--null`` uses two
identical families, where accuracy should sit near chance.

    python3 scripts/static_pipeline.py --n 1,2,3,4
"""

import argparse

import numpy as np

from vvt import synth
from vvt.ngrams import build_vocab, extract_ngrams, vectorize_corpus
from vvt.static_models import TrainConfig, accuracy, train_mlp, train_nb


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", default="1,2,3,4")
    ap.add_argument("--count", type=int, default=200)
    ap.add_argument("--max-size", type=int, default=None)
    ap.add_argument("--selection", choices=("frequency", "info_gain"), default="frequency")
    ap.add_argument("--null", action="store_true", help="use two identical families")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    a = synth.random_family("benign", 1)
    b = (synth.Family("malicious", a.tokens, a.start, a.transitions) if args.null
         else synth.random_family("malicious", 2))
    corpus = synth.gen_opcode_corpus([a, b], args.count, seed=args.seed)
    seqs = [s for s, _ in corpus]
    labels = [lab for _, lab in corpus]
    perm = np.random.default_rng(args.seed).permutation(len(corpus))
    k = int(round(0.3 * len(corpus)))
    test, train = np.sort(perm[:k]), np.sort(perm[k:])

    for n in (int(v) for v in args.n.split(",")):
        vocab = build_vocab([extract_ngrams(seqs[i], n) for i in train],
                            [labels[i] for i in train], n, max_size=args.max_size,
                            selection=args.selection)

        def data(idx):
            return vectorize_corpus([seqs[i] for i in idx], [labels[i] for i in idx], vocab,
                                    "raw", ("benign", "malicious"))

        nb = train_nb(data(train))
        mlp, _ = train_mlp(data(train), TrainConfig(seed=args.seed))
        print(f"n={n}  vocab {len(vocab.grams):5d}  nb {accuracy(nb, data(test)):.3f}  "
              f"mlp {accuracy(mlp, data(test)):.3f}")


if __name__ == "__main__":
    main()
