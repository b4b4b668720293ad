import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from vvt.cli import main
from vvt.modelio import load_model
from vvt.ngrams import read_feature_csv
from vvt.static_models import predict_many


def run(*argv):
    return main([str(a) for a in argv])


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture(scope="module")
def static_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("static")
    assert run("synth-corpus", "--count", 40, "--length", "60-90", "--seed", 3,
               "--out", d / "corpus") == 0
    assert run("features", d / "corpus", "--norm", "raw", "--vocab-out", d / "v.tsv",
               "--out", d / "train.csv", "--test-out", d / "test.csv", "--seed", 1) == 0
    assert run("train-static", d / "train.csv", "--model", "nb", "--out", d / "nb.json") == 0
    return d


@pytest.fixture(scope="module")
def dynamic_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("dynamic")
    assert run("synth-trace", "--rows-per-phase", 600, "--anomalies", 4, "--anomaly-len", 40,
               "--seed", 2, "--out", d / "trace.csv") == 0
    assert run("windowize", d / "trace.csv", "--events", "", "--ratio", "L3_MISS/L1D_MISS",
               "--window", 40, "--stride", 20, "--stats", "mean,std,max",
               "--out", d / "win.csv") == 0
    return d


def test_eval_perfect(tmp_path):
    (tmp_path / "p.csv").write_text("verdict,score\n1,0.9\n0,0.1\n1,0.7\n")
    (tmp_path / "t.csv").write_text("label\n1\n0\n1\n")
    assert run("eval", "--pred", tmp_path / "p.csv", "--truth", tmp_path / "t.csv",
               "--score-col", "score", "--out", tmp_path / "e.json") == 0
    rep = json.loads((tmp_path / "e.json").read_text())
    assert rep["accuracy"] == rep["precision"] == rep["recall"] == 1.0 and rep["auc"] == 1.0


def test_classify_matches_in_memory_model(static_run):
    d = static_run
    assert run("classify", d / "test.csv", "--model", d / "nb.json", "--out", d / "pred.csv") == 0
    model = load_model(d / "nb.json")
    ds, _ = read_feature_csv(d / "test.csv", norm="raw")
    labels, scores = predict_many(model, ds.X)
    got = rows(d / "pred.csv")
    assert [r["label"] for r in got] == [model.class_names[i] for i in labels]
    assert [float(r["score"]) for r in got] == scores.tolist()


def test_classify_token_files_with_vocab(static_run):
    d = static_run
    out = d / "pred_files.csv"
    assert run("classify", d / "corpus", "--model", d / "nb.json", "--vocab", d / "v.tsv",
               "--out", out) == 0
    got = rows(out)
    truth = {r["file"].split(".")[0]: r["label"] for r in rows(d / "corpus" / "labels.csv")}
    assert len(got) == 40
    assert np.mean([truth[r["id"]] == r["label"] for r in got]) > 0.9


def test_mlp_and_fine_tune(static_run):
    d = static_run
    assert run("train-static", d / "train.csv", "--model", "mlp", "--norm", "raw",
               "--hidden", "8", "--epochs", 5, "--out", d / "mlp.json") == 0
    assert run("fine-tune", d / "test.csv", "--base", d / "mlp.json", "--frozen", 1,
               "--epochs", 3, "--out", d / "ft.json") == 0
    base, tuned = load_model(d / "mlp.json"), load_model(d / "ft.json")
    assert np.array_equal(base.weights[0], tuned.weights[0])
    assert not np.array_equal(base.weights[1], tuned.weights[1])


def test_features_n_sweep(static_run, tmp_path):
    assert run("features", static_run / "corpus", "--n", "1,2,3,4",
               "--out", tmp_path / "f.csv", "--vocab-out", tmp_path / "v.tsv") == 0
    for n in range(1, 5):
        _, grams = read_feature_csv(tmp_path / f"f_n{n}.csv")
        assert all(len(g) == n for g in grams)


def test_decode_and_inspect(static_run, tmp_path):
    corpus = tmp_path / "elf"
    assert run("synth-corpus", "--count", 4, "--length", "10-20", "--elf", "--out", corpus) == 0
    assert run("decode", corpus / "seq_00000.elf", "--out", tmp_path / "tok.txt") == 0
    tokens = (tmp_path / "tok.txt").read_text().split()
    assert 10 <= len(tokens) <= 20
    assert run("inspect-elf", corpus / "seq_00000.elf", "--out", tmp_path / "i.json") == 0
    info = json.loads((tmp_path / "i.json").read_text())
    assert info["machine"] == 243 and info["exec_bytes"] > 0


@pytest.mark.parametrize("kind", ["gauss", "knn", "adaboost", "bagging", "two-stage"])
def test_detectors_end_to_end(dynamic_run, kind):
    d = dynamic_run
    model = d / f"{kind}.json"
    report = d / f"{kind}.csv"
    assert run("train-detector", d / "win.csv", "--kind", kind, "--bags", 5, "--rounds", 5,
               "--out", model) == 0
    assert run("detect", d / "win.csv", "--model", model, "--out", report) == 0
    text = report.read_text()
    assert text.startswith("window_start_row,score,verdict\n") and text.endswith("\n")
    assert {r["verdict"] for r in rows(report)} <= {"0", "1"}
    assert run("eval", "--pred", report, "--truth", d / "win.csv", "--positive", "1",
               "--out", d / f"{kind}.json.eval") == 0
    assert json.loads((d / f"{kind}.json.eval").read_text())["recall"] >= 0.9


def test_select_features(dynamic_run, tmp_path):
    d = dynamic_run
    for method in ("fisher", "pearson", "mi"):
        out = tmp_path / f"{method}.csv"
        assert run("select-features", d / "win.csv", "--method", method, "--budget", 2,
                   "--out", out, "--selected-out", tmp_path / f"{method}_sel.csv") == 0
        assert len(rows(out)) == 3
        header = (tmp_path / f"{method}_sel.csv").read_text().splitlines()[0].split(",")
        assert len(header) == 4 and header[-1] == "label"
    assert run("select-features", d / "win.csv", "--method", "pca", "--budget", 2,
               "--out", tmp_path / "pca.json") == 0
    assert load_model(tmp_path / "pca.json").k == 2
    assert run("select-features", d / "win.csv", "--include", "nope",
               "--out", tmp_path / "x.csv") == 2


def test_trace_info(dynamic_run, tmp_path):
    assert run("trace-info", dynamic_run / "trace.csv", "--out", tmp_path / "i.json") == 0
    info = json.loads((tmp_path / "i.json").read_text())
    assert info["rows"] == 1200 and info["anomaly_rows"] == 160


def test_reruns_are_bit_identical(tmp_path):
    for tag in ("a", "b"):
        assert run("synth-trace", "--rows-per-phase", 300, "--anomalies", 2,
                   "--anomaly-len", 30, "--seed", 7, "--out", tmp_path / f"{tag}.csv") == 0
        assert run("windowize", tmp_path / f"{tag}.csv", "--window", 30, "--stride", 15,
                   "--out", tmp_path / f"{tag}_w.csv") == 0
        assert run("train-detector", tmp_path / f"{tag}_w.csv", "--kind", "bagging",
                   "--bags", 3, "--seed", 5, "--out", tmp_path / f"{tag}.json") == 0
    for suffix in (".csv", "_w.csv", ".json"):
        assert (tmp_path / f"a{suffix}").read_bytes() == (tmp_path / f"b{suffix}").read_bytes()


def test_exit_codes(tmp_path, capsys):
    assert run("decode", tmp_path / "missing.elf") == 2
    (tmp_path / "bad.csv").write_text("t_ns,A\n0,1\n0,2\n")
    assert run("trace-info", tmp_path / "bad.csv") == 2
    assert "bad.csv:3:" in capsys.readouterr().err
    (tmp_path / "short.csv").write_text("t_ns,A\n0,1\n10,2\n")
    assert run("windowize", tmp_path / "short.csv", "--window", 5,
               "--out", tmp_path / "w.csv") == 3
    (tmp_path / "notelf").write_bytes(b"\0\0\0\0")
    assert run("inspect-elf", tmp_path / "notelf") == 2
    with pytest.raises(SystemExit) as info:
        run("train-detector")
    assert info.value.code == 2


def test_console_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "vvt", "synth-trace", "--rows-per-phase", "20",
                          "--out", str(tmp_path / "t.csv")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "t.csv").read_text().startswith("t_ns,CYCLES")
