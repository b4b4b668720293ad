"""``vvt`` command-line interface.

Exit codes: 0 success, 2 input error (unreadable or malformed files, bad
flags), 3 contract violation (well-formed input that an operation rejects).
"""

import argparse
import csv
import json
import sys
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import detectors as det
from . import hpc, modelio, ngrams, selection, static_models, synth
from .elf import code_bytes, parse_elf
from .errors import ContractError, InputError
from .metrics import eval_metrics
from .rvdecode import decode_stream, dump_tokens, load_tokens


@contextmanager
def _output(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            yield fh


def _emit_json(obj, path):
    with _output(path) as fh:
        fh.write(json.dumps(obj, indent=2) + "\n")


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()] if text else []


def _require_out(args, what):
    if args.out in (None, "-"):
        raise InputError(f"--out is required for {what}")
    return args.out


def _load_sequence(path, strict=True):
    data = Path(path).read_bytes()
    if data[:4] == b"\x7fELF":
        return decode_stream(code_bytes(parse_elf(data, strict=strict)), Path(path).stem)
    return load_tokens(data.decode(), Path(path).stem)


# -- static pipeline ---------------------------------------------------------

def cmd_inspect_elf(args):
    image = parse_elf(Path(args.path).read_bytes(), strict=not args.no_strict)
    chunks = code_bytes(image)
    _emit_json({
        "machine": image.machine,
        "machine_ok": image.machine_ok,
        "entry": image.entry,
        "sections": [{"name": s.name, "addr": s.addr, "size": s.size, "flags": s.flags,
                      "exec": s.is_exec} for s in image.sections],
        "exec_bytes": sum(len(b) for _, b in chunks),
    }, args.out)


def cmd_decode(args):
    data = Path(args.path).read_bytes()
    if args.raw:
        seq = decode_stream([(0, data)], Path(args.path).stem)
    else:
        seq = decode_stream(code_bytes(parse_elf(data)), Path(args.path).stem)
    with _output(args.out) as fh:
        fh.write(dump_tokens(seq))


def _split(n, fraction, seed):
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    n_test = int(round(n * fraction))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _with_suffix(path, n, sweep):
    if path is None:
        return path
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    return str(p.with_name(f"{p.stem}_n{n}{p.suffix}")) if sweep else str(p)


def cmd_features(args):
    corpus = synth.read_corpus(args.corpus)
    seqs = [s for s, _ in corpus]
    labels = [lab for _, lab in corpus]
    class_names = tuple(sorted(set(labels)))
    train_idx = np.arange(len(corpus))
    test_idx = np.array([], dtype=int)
    if args.test_out:
        train_idx, test_idx = _split(len(corpus), args.test_fraction, args.seed)
    ns = [int(v) for v in _csv_list(args.n)]
    if not ns:
        raise InputError("--n needs at least one gram length")
    if args.vocab and len(ns) > 1:
        raise InputError("--vocab fixes n; it cannot be combined with an n sweep")
    sweep = len(ns) > 1
    out = _require_out(args, "features")
    for n in ns:
        if args.vocab:
            vocab = ngrams.read_vocab(args.vocab)
        else:
            docs = [ngrams.extract_ngrams(seqs[i], n) for i in train_idx]
            vocab = ngrams.build_vocab(docs, [labels[i] for i in train_idx], n, args.max_size,
                                       args.min_df, args.selection)
        if args.vocab_out:
            ngrams.write_vocab(vocab, _with_suffix(args.vocab_out, n, sweep))
        for idx, path in ((train_idx, out), (test_idx, args.test_out)):
            if path is None:
                continue
            ds = ngrams.vectorize_corpus([seqs[i] for i in idx], [labels[i] for i in idx], vocab,
                                         args.norm, class_names)
            ngrams.write_feature_csv(ds, vocab.grams, _with_suffix(path, n, sweep))


def _train_config(args, hidden=None):
    return static_models.TrainConfig(
        learning_rate=args.lr, epochs=args.epochs, batch_size=args.batch_size, seed=args.seed,
        l2_penalty=args.l2, frozen_layer_count=getattr(args, "frozen", 0),
        hidden=tuple(int(h) for h in _csv_list(args.hidden)) if hidden is None else hidden)


def cmd_train_static(args):
    ds, _ = ngrams.read_feature_csv(args.features, norm=args.norm)
    if args.model == "nb":
        model = static_models.train_nb(ds, args.alpha)
    else:
        model, history = static_models.train_mlp(ds, _train_config(args))
        if history:
            print(f"final loss {history[-1]:.6g}", file=sys.stderr)
    modelio.save_model(model, _require_out(args, "train-static"), meta={"norm": args.norm})


def cmd_fine_tune(args):
    base, meta = modelio.load_model(args.base, with_meta=True)
    if not isinstance(base, static_models.MlpModel):
        raise ContractError("fine-tune needs an MLP base model")
    ds, _ = ngrams.read_feature_csv(args.features, class_names=base.class_names,
                                    norm=meta.get("norm", "raw"))
    model, _ = static_models.fine_tune(base, ds, _train_config(args, hidden=()))
    modelio.save_model(model, _require_out(args, "fine-tune"), meta=meta)


def cmd_classify(args):
    model, meta = modelio.load_model(args.model, with_meta=True)
    if not isinstance(model, (static_models.NbModel, static_models.MlpModel)):
        raise ContractError("classify needs a static (nb/mlp) model")
    norm = args.norm or meta.get("norm", "raw")
    ids, X = [], None
    first = Path(args.inputs[0])
    if len(args.inputs) == 1 and first.is_file() and first.read_bytes()[:6] == b"label,":
        ds, grams = ngrams.read_feature_csv(first, norm=norm)
        if model.vocab_id and ds.vocab_id != model.vocab_id:
            raise ContractError(f"feature schema {ds.vocab_id} != model vocab {model.vocab_id}")
        X = ds.X
        ids = [str(i) for i in range(len(X))]
    else:
        if not args.vocab:
            raise InputError("--vocab is required when classifying binaries or token files")
        vocab = ngrams.read_vocab(args.vocab)
        if model.vocab_id and vocab.vocab_id != model.vocab_id:
            raise ContractError(f"vocabulary {vocab.vocab_id} != model vocab {model.vocab_id}")
        seqs = []
        for item in args.inputs:
            p = Path(item)
            if p.is_dir():
                seqs.extend(s for s, _ in synth.read_corpus(p))
            else:
                seqs.append(_load_sequence(p))
        ids = [s.source_id for s in seqs]
        X = np.array([ngrams.vectorize(s, vocab, norm).values for s in seqs])
    labels, scores = static_models.predict_many(model, X)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["id", "label", "score"])
        for i, lab, sc in zip(ids, labels, scores):
            w.writerow([i, model.class_names[lab], f"{sc:.17g}"])


# -- dynamic pipeline --------------------------------------------------------

def cmd_trace_info(args):
    tr = hpc.load_trace_csv(args.trace)
    _emit_json({
        "rows": tr.n_rows,
        "events": list(tr.events),
        "sampling_period_ns": tr.sampling_period_ns,
        "duration_ns": tr.n_rows * tr.sampling_period_ns,
        "anomaly_rows": int(tr.mask.sum()) if tr.mask is not None else None,
        "mean_counts": {e: float(v) for e, v in zip(tr.events, tr.samples.mean(axis=0))},
    }, args.out)


def cmd_windowize(args):
    tr = hpc.load_trace_csv(args.trace)
    events = tr.events if args.events is None else _csv_list(args.events)
    ratios = []
    for r in args.ratio or []:
        num, _, den = r.partition("/")
        if not den:
            raise InputError(f"--ratio expects NUM/DEN, got {r!r}")
        ratios.append((num, den))
    series, names = hpc.feature_series(tr, events, ratios, args.policy)
    cfg = hpc.WindowConfig(args.window, args.stride, tuple(_csv_list(args.stats)))
    win = hpc.windowize(series, cfg, names)
    labels = None
    if tr.mask is not None:
        flags = hpc.window_labels(tr.mask, win.spans, args.min_fraction)
        labels = [args.label_name if f else args.normal_name for f in flags]
    hpc.write_windowed_csv(win, _require_out(args, "windowize"), labels)


def _read_labeled_windows(path):
    X, starts, names, labels = hpc.read_windowed_csv(path)
    return X, starts, names, labels


def cmd_select_features(args):
    X, starts, names, labels = _read_labeled_windows(args.windows)
    if args.method == "pca":
        model = selection.pca_fit(X, args.k or min(args.budget, X.shape[1]))
        modelio.save_model(model, _require_out(args, "select-features --method pca"),
                           meta={"feature_names": list(names)})
        return
    if labels is None:
        raise InputError(f"{args.windows}: supervised scoring needs a label column")
    if args.method == "fisher":
        report = selection.fisher_score(X, labels, names)
    elif args.method == "pearson":
        report = selection.pearson_scores(X, labels, names)
    else:
        report = selection.mutual_information(X, labels, args.bins, names)
    include = []
    for name in _csv_list(args.include):
        if name not in names:
            raise InputError(f"--include: unknown feature {name!r}")
        include.append(names.index(name))
    chosen = selection.select_events(report, args.budget, include)
    selection.write_score_report(report, _require_out(args, "select-features"))
    print(",".join(names[j] for j in chosen))
    if args.selected_out:
        spans = tuple((int(s), int(s)) for s in starts)
        hpc.write_windowed_csv(hpc.Windows(X[:, chosen], spans, tuple(names[j] for j in chosen)),
                               args.selected_out, labels)


def _is_normal(label, normal_label):
    return str(label) == str(normal_label)


def cmd_train_detector(args):
    X, _, names, labels = _read_labeled_windows(args.windows)
    meta = {"feature_names": list(names), "normal_label": args.normal_label,
            "anomaly_label": args.anomaly_label}
    if args.kind in ("gauss", "knn"):
        rows = X if labels is None else X[[_is_normal(v, args.normal_label) for v in labels]]
        if args.kind == "gauss":
            model = det.fit_oneclass_gaussian(rows, args.percentile)
        else:
            model = det.fit_knn_oneclass(rows, args.k, args.percentile)
    else:
        if labels is None:
            raise InputError(f"{args.windows}: {args.kind} needs a label column")
        if args.kind == "adaboost":
            model = det.adaboost_train(X, labels, args.rounds)
        elif args.kind == "bagging":
            model = det.bagging_train(X, labels, args.bags, args.base, args.seed,
                                      {"rounds": args.rounds})
        else:
            model = det.fit_two_stage(X, labels, args.normal_label, args.stage1, args.percentile,
                                      args.k)
    modelio.save_model(model, _require_out(args, "train-detector"), meta=meta)


def detection_rows(model, X, meta):
    """``(scores, verdicts)`` for any detector kind."""
    normal = str(meta.get("normal_label", "0"))
    anomaly = str(meta.get("anomaly_label", "1"))
    if isinstance(model, (det.GaussianOneClass, det.KnnOneClass)):
        scores, flags = det.detect_many(model, X)
        return scores, [anomaly if f else normal for f in flags]
    if isinstance(model, det.AdaBoostModel):
        scores = det.adaboost_decision(model, X)
        return scores, [str(v) for v in det.adaboost_predict(model, X)]
    if isinstance(model, det.BaggingModel):
        verdicts = [str(v) for v in det.bagging_predict(model, X)]
        positive = str(model.classes[-1])
        return np.array([float(v == positive) for v in verdicts]), verdicts
    if isinstance(model, det.TwoStageModel):
        scores = det.oneclass_scores(model.stage1, X)
        return scores, [det.two_stage_detect(model, x) for x in X]
    raise ContractError(f"{type(model).__name__} is not a detector")


def cmd_detect(args):
    model, meta = modelio.load_model(args.model, with_meta=True)
    X, starts, names, _ = _read_labeled_windows(args.windows)
    expected = meta.get("feature_names")
    if expected is not None and list(names) != list(expected):
        raise ContractError(f"window features {list(names)} do not match model {expected}")
    scores, verdicts = detection_rows(model, X, meta)
    with _output(args.out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["window_start_row", "score", "verdict"])
        for s, sc, v in zip(starts, scores, verdicts):
            w.writerow([int(s), f"{sc:.17g}", v])


# -- synthetic data ----------------------------------------------------------

def cmd_synth_trace(args):
    phases = synth.default_phases(args.rows_per_phase, args.jitter)[:args.phases]
    tr = synth.gen_phase_trace(phases, period_ns=args.period_ns, seed=args.seed)
    if args.anomalies:
        kw = {"event": args.event}
        if args.kind == "phase_swap":
            kw["alt_phase"] = synth.PhaseSpec(
                {e: r * args.magnitude for e, r in phases[0].rates.items()}, args.jitter, 1)
        tr, _ = synth.inject_many(tr, args.kind, args.magnitude, args.anomalies,
                                  args.anomaly_len, seed=args.seed, **kw)
    hpc.write_trace_csv(tr, _require_out(args, "synth-trace"))


def cmd_synth_corpus(args):
    lo, _, hi = args.length.partition("-")
    length = (int(lo), int(hi or lo))
    names = ["benign", "malicious"] if args.families == 2 else \
        [f"family{i}" for i in range(args.families)]
    if args.disjoint:
        fams = synth.disjoint_families(names, seed=args.seed, support=args.support)
    elif args.identical:
        base = synth.random_family(names[0], args.seed, support=args.support)
        fams = [synth.Family(n, base.tokens, base.start, base.transitions) for n in names]
    else:
        fams = [synth.random_family(n, args.seed + i, support=args.support)
                for i, n in enumerate(names)]
    if args.shift:
        fams = [synth.shift_family(f, args.shift, args.seed + 1000 + i, support=args.support)
                for i, f in enumerate(fams)]
    corpus = synth.gen_opcode_corpus(fams, args.count, length, args.seed)
    synth.write_corpus(corpus, _require_out(args, "synth-corpus"), elf=args.elf)


# -- evaluation --------------------------------------------------------------

def _column(path, name):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or name not in reader.fieldnames:
            raise InputError(f"{path}: no column {name!r}")
        return [row[name] for row in reader]


def cmd_eval(args):
    pred = _column(args.pred, args.pred_col)
    truth = _column(args.truth, args.truth_col)
    scores = None
    if args.score_col:
        scores = [float(v) for v in _column(args.pred, args.score_col)]
    report = eval_metrics(pred, truth, scores, args.positive)
    _emit_json(report.as_dict(), args.out)


# -- parser ------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="vvt", description="RISC-V static and HPC-based "
                                     "dynamic malware/anomaly detection toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out", default="-")
        p.set_defaults(func=func)
        return p

    p = add("inspect-elf", cmd_inspect_elf, "summarize an ELF64 RISC-V binary")
    p.add_argument("path")
    p.add_argument("--no-strict", action="store_true", help="accept non-RISC-V machine ids")

    p = add("decode", cmd_decode, "dump opcode tokens, one per line")
    p.add_argument("path")
    p.add_argument("--raw", action="store_true", help="treat the file as bare code bytes")

    p = add("features", cmd_features, "n-gram feature matrix from a corpus directory")
    p.add_argument("corpus", help="directory with labels.csv and token/ELF files")
    p.add_argument("--n", default="2", help="gram length, or a comma list to sweep (1,2,3,4)")
    p.add_argument("--max-size", type=int, default=None)
    p.add_argument("--min-df", type=int, default=1)
    p.add_argument("--selection", choices=("frequency", "info_gain"), default="frequency")
    p.add_argument("--norm", choices=ngrams.NORMS, default="raw")
    p.add_argument("--vocab", help="reuse an existing vocabulary file")
    p.add_argument("--vocab-out")
    p.add_argument("--test-out", help="also write a held-out split here")
    p.add_argument("--test-fraction", type=float, default=0.3)

    def add_train_flags(p):
        p.add_argument("--epochs", type=int, default=200)
        p.add_argument("--lr", type=float, default=0.05)
        p.add_argument("--batch-size", type=int, default=32)
        p.add_argument("--l2", type=float, default=0.0)

    p = add("train-static", cmd_train_static, "train a naive Bayes or MLP classifier")
    p.add_argument("features")
    p.add_argument("--model", choices=("nb", "mlp"), default="nb")
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--hidden", default="64,32")
    p.add_argument("--norm", choices=ngrams.NORMS, default="raw",
                   help="normalization the features were built with")
    add_train_flags(p)

    p = add("fine-tune", cmd_fine_tune, "retrain the head of an MLP on new data")
    p.add_argument("features")
    p.add_argument("--base", required=True)
    p.add_argument("--frozen", type=int, default=1, help="number of leading layers to freeze")
    add_train_flags(p)

    p = add("classify", cmd_classify, "label binaries, token files or a feature CSV")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--model", required=True)
    p.add_argument("--vocab")
    p.add_argument("--norm", choices=ngrams.NORMS)

    p = add("trace-info", cmd_trace_info, "summarize a counter trace CSV")
    p.add_argument("trace")

    p = add("windowize", cmd_windowize, "windowed statistics of raw and ratio series")
    p.add_argument("trace")
    p.add_argument("--window", type=int, default=100)
    p.add_argument("--stride", type=int, default=50)
    p.add_argument("--stats", default="mean,std,min,max,slope")
    p.add_argument("--events", help="comma list of raw events to keep ('' for none)")
    p.add_argument("--ratio", action="append", help="NUM/DEN derived ratio (repeatable)")
    p.add_argument("--policy", choices=("zero", "epsilon"), default="zero")
    p.add_argument("--min-fraction", type=float, default=0.0,
                   help="label a window anomalous when its masked fraction exceeds this")
    p.add_argument("--label-name", default="1")
    p.add_argument("--normal-name", default="0")

    p = add("select-features", cmd_select_features, "rank features or fit PCA")
    p.add_argument("windows")
    p.add_argument("--method", choices=("fisher", "pearson", "mi", "pca"), default="fisher")
    p.add_argument("--budget", type=int, default=4, help="counter budget")
    p.add_argument("--include", help="features always kept (manual selection)")
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--k", type=int, help="PCA components (default: budget)")
    p.add_argument("--selected-out", help="write the windows restricted to the selection")

    p = add("train-detector", cmd_train_detector, "fit an anomaly detector on windows")
    p.add_argument("windows")
    p.add_argument("--kind", choices=("gauss", "knn", "adaboost", "bagging", "two-stage"),
                   default="gauss")
    p.add_argument("--percentile", type=float, default=95.0)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--rounds", type=int, default=50)
    p.add_argument("--bags", type=int, default=25)
    p.add_argument("--base", choices=("stump", "adaboost", "gaussian"), default="stump")
    p.add_argument("--stage1", choices=("gauss", "knn"), default="gauss")
    p.add_argument("--normal-label", default="0")
    p.add_argument("--anomaly-label", default="1")

    p = add("detect", cmd_detect, "score windows with a detector")
    p.add_argument("windows")
    p.add_argument("--model", required=True)

    p = add("synth-trace", cmd_synth_trace, "generate a phase trace with injected anomalies")
    p.add_argument("--rows-per-phase", type=int, default=2500)
    p.add_argument("--phases", type=int, choices=(1, 2), default=2)
    p.add_argument("--jitter", type=float, default=0.05)
    p.add_argument("--period-ns", type=int, default=1_000_000)
    p.add_argument("--anomalies", type=int, default=0)
    p.add_argument("--kind", choices=synth.ANOMALY_KINDS, default="ratio_shift")
    p.add_argument("--magnitude", type=float, default=20.0)
    p.add_argument("--anomaly-len", type=int, default=50)
    p.add_argument("--event", default="L3_MISS")

    p = add("synth-corpus", cmd_synth_corpus, "generate a labeled Markov opcode corpus")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--length", default="100-300")
    p.add_argument("--families", type=int, default=2)
    p.add_argument("--support", type=int, default=8)
    p.add_argument("--shift", type=float, default=0.0, help="blend families toward new chains")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--identical", action="store_true", help="all families share one chain")
    g.add_argument("--disjoint", action="store_true", help="families use disjoint tokens")
    p.add_argument("--elf", action="store_true", help="emit RISC-V ELF files, not token files")

    p = add("eval", cmd_eval, "accuracy/precision/recall/F1/FPR/AUC")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.add_argument("--pred-col", default="verdict")
    p.add_argument("--truth-col", default="label")
    p.add_argument("--score-col")
    p.add_argument("--positive")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except InputError as exc:
        print(f"vvt {args.command}: input error: {exc}", file=sys.stderr)
        return 2
    except (OSError, UnicodeDecodeError) as exc:
        print(f"vvt {args.command}: {exc}", file=sys.stderr)
        return 2
    except ContractError as exc:
        print(f"vvt {args.command}: contract violation: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
