import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vvt.errors import ContractError, SpanOutOfRange
from vvt.hpc import derive_ratio
from vvt.ngrams import build_vocab, extract_ngrams, vectorize_corpus
from vvt.rvdecode import VOCABULARY
from vvt.static_models import accuracy, train_nb
from vvt.synth import (AnomalySpec, PhaseSpec, default_phases, disjoint_families,
                       gen_opcode_corpus, gen_phase_trace, inject_anomaly, random_family,
                       read_corpus, spread_spans, write_corpus)

RATES = {"CYCLES": 1000, "L1D_MISS": 100, "L3_MISS": 10}
EVENTS = ("CYCLES", "L1D_MISS", "L3_MISS")


def test_zero_jitter_is_exact():
    tr = gen_phase_trace([PhaseSpec(RATES, 0.0, 20)], EVENTS)
    assert np.all(tr.samples == [1000, 100, 10])


def test_same_seed_same_trace():
    a = gen_phase_trace(default_phases(300), seed=4)
    b = gen_phase_trace(default_phases(300), seed=4)
    assert np.array_equal(a.samples, b.samples)
    assert not np.array_equal(a.samples, gen_phase_trace(default_phases(300), seed=5).samples)


def test_phase_means_track_rates():
    tr = gen_phase_trace([PhaseSpec({"E": 100}, 0.1, 600), PhaseSpec({"E": 200}, 0.1, 600)],
                         ("E",), seed=0)
    assert tr.samples[:600].mean() == pytest.approx(100, rel=0.05)
    assert tr.samples[600:].mean() == pytest.approx(200, rel=0.05)


def test_trace_invariants_hold():
    tr = gen_phase_trace([PhaseSpec({"E": 1}, 3.0, 200)], ("E",), seed=1)
    assert tr.samples.min() >= 0 and tr.samples.shape == (200, 1)


def test_identity_ratio_shift_sets_mask_only():
    tr = gen_phase_trace(default_phases(200), seed=0)
    out, mask = inject_anomaly(tr, AnomalySpec("ratio_shift", 1.0, 50, 30))
    assert np.array_equal(out.samples, tr.samples)
    assert np.flatnonzero(mask).tolist() == list(range(50, 80))


@settings(max_examples=30)
@given(st.sampled_from(["ratio_shift", "spike", "phase_swap"]), st.integers(0, 350),
       st.integers(1, 50))
def test_injection_is_local(kind, start, length):
    tr = gen_phase_trace(default_phases(200), seed=0)
    spec = AnomalySpec(kind, 5.0, start, length, alt_phase=default_phases(1)[1])
    out, mask = inject_anomaly(tr, spec, seed=2)
    inside = np.zeros(tr.n_rows, bool)
    inside[start:start + length] = True
    assert np.array_equal(mask, inside)
    assert np.array_equal(out.samples[~inside], tr.samples[~inside])
    assert out.samples.min() >= 0


def test_ratio_shift_reaches_two():
    tr = gen_phase_trace(default_phases(500), seed=0)
    base = derive_ratio(tr, "L3_MISS", "L1D_MISS")
    out, mask = inject_anomaly(tr, AnomalySpec("ratio_shift", 20.0, 100, 200))
    shifted = derive_ratio(out, "L3_MISS", "L1D_MISS")
    assert base.mean() == pytest.approx(0.1, rel=0.05)
    assert shifted[mask].mean() == pytest.approx(2.0, rel=0.05)


def test_spike_adds_sigma():
    tr = gen_phase_trace([PhaseSpec(RATES, 0.0, 10)], EVENTS)
    out, _ = inject_anomaly(tr, AnomalySpec("spike", 3.0, 0, 2), sigma=[10, 1, 1])
    assert out.samples[0].tolist() == [1030, 103, 13]


def test_injection_contracts():
    tr = gen_phase_trace(default_phases(10), seed=0)
    with pytest.raises(SpanOutOfRange):
        inject_anomaly(tr, AnomalySpec("spike", 1.0, 15, 10))
    with pytest.raises(ContractError):
        AnomalySpec("spike", 0.0, 0, 1)
    with pytest.raises(ContractError):
        AnomalySpec("melt", 1.0, 0, 1)
    with pytest.raises(ContractError):
        inject_anomaly(tr, AnomalySpec("phase_swap", 1.0, 0, 2))


def test_spread_spans_do_not_overlap():
    starts = spread_spans(5000, 10, 50, seed=0)
    assert len(starts) == 10
    assert all(b - a >= 50 for a, b in zip(starts, starts[1:]))
    with pytest.raises(SpanOutOfRange):
        spread_spans(100, 10, 50)


def test_corpus_balance_and_vocabulary():
    fams = [random_family("benign", 1), random_family("malicious", 2)]
    corpus = gen_opcode_corpus(fams, 10, (20, 40), seed=0)
    labels = [lab for _, lab in corpus]
    assert labels.count("benign") == labels.count("malicious") == 5
    assert all(20 <= len(s) <= 40 for s, _ in corpus)
    assert all(t in VOCABULARY for s, _ in corpus for t in s.tokens)
    assert corpus == gen_opcode_corpus(fams, 10, (20, 40), seed=0)


def test_family_rows_are_distributions():
    fam = random_family("x", 0)
    assert np.allclose(fam.transitions.sum(axis=1), 1.0)
    assert np.isclose(fam.start.sum(), 1.0)


def test_disjoint_families_are_perfectly_separable():
    fams = disjoint_families(seed=0)
    assert not set(np.array(fams[0].tokens)) & set(np.array(fams[1].tokens))
    corpus = gen_opcode_corpus(fams, 100, (50, 80), seed=1)
    seqs, labels = [s for s, _ in corpus], [lab for _, lab in corpus]
    train = list(range(0, 100, 2))
    test = list(range(1, 100, 2))
    vocab = build_vocab([extract_ngrams(seqs[i], 2) for i in train], n=2)
    ds = vectorize_corpus([seqs[i] for i in train], [labels[i] for i in train], vocab, "raw")
    dt = vectorize_corpus([seqs[i] for i in test], [labels[i] for i in test], vocab, "raw")
    assert accuracy(train_nb(ds), dt) == 1.0


def test_corpus_contracts():
    with pytest.raises(ContractError):
        gen_opcode_corpus([random_family("a", 0)], 4)
    with pytest.raises(ContractError):
        gen_opcode_corpus([random_family("a", 0), random_family("b", 1)], 4, (5, 2))


@pytest.mark.parametrize("elf", [False, True])
def test_corpus_directory_round_trip(tmp_path, elf):
    fams = [random_family("benign", 1), random_family("malicious", 2)]
    corpus = gen_opcode_corpus(fams, 6, (10, 30), seed=0)
    write_corpus(corpus, tmp_path, elf=elf)
    back = read_corpus(tmp_path)
    assert [(s.tokens, lab) for s, lab in back] == [(s.tokens, lab) for s, lab in corpus]
    assert (tmp_path / "labels.csv").read_text().startswith("file,label\n")
