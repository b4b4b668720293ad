"""Seeded generators standing in for hardware traces and malware corpora.

Counter traces are phase-structured truncated-Gaussian draws; opcode corpora
come from per-family first-order Markov chains. Everything is a pure function
of its arguments and seed.

The anomaly magnitudes used in the examples and acceptance runs (for
instance a x20 L3-miss shift over a ~0.1 L3/L1 baseline) are our own
calibration, not measured hardware values.
"""

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, SpanOutOfRange
from .hpc import DEFAULT_EVENTS, HpcTrace, event_index
from .rvdecode import MNEMONICS, OpcodeSequence, dump_tokens, load_tokens

ANOMALY_KINDS = ("ratio_shift", "spike", "phase_swap")


@dataclass(frozen=True)
class PhaseSpec:
    rates: dict
    jitter: float = 0.05
    duration: int = 100

    def __post_init__(self):
        if self.duration < 1 or self.jitter < 0 or any(r < 0 for r in self.rates.values()):
            raise ContractError(f"invalid phase {self}")


@dataclass(frozen=True)
class AnomalySpec:
    kind: str
    magnitude: float
    start: int
    length: int
    event: str = "L3_MISS"
    alt_phase: PhaseSpec = None

    def __post_init__(self):
        if self.kind not in ANOMALY_KINDS:
            raise ContractError(f"unknown anomaly kind {self.kind!r}")
        if self.magnitude <= 0 or self.length < 1 or self.start < 0:
            raise ContractError(f"invalid anomaly {self}")


def default_phases(duration=2500, jitter=0.05):
    """Two phases with different intensity but the same ~0.1 L3/L1 miss ratio."""
    a = {"CYCLES": 1_000_000, "RETIRED_INSTR": 800_000, "L1D_MISS": 2_000,
         "L3_MISS": 200, "BRANCH_MISS": 1_500}
    b = {"CYCLES": 1_000_000, "RETIRED_INSTR": 450_000, "L1D_MISS": 6_000,
         "L3_MISS": 600, "BRANCH_MISS": 4_000}
    return [PhaseSpec(a, jitter, duration), PhaseSpec(b, jitter, duration)]


def _draw(rng, phase, events, rows):
    rates = np.array([float(phase.rates.get(e, 0.0)) for e in events])
    noise = rng.normal(rates, phase.jitter * rates, size=(rows, len(events)))
    return np.rint(np.maximum(noise, 0.0)).astype(np.int64)


def gen_phase_trace(phases, events=DEFAULT_EVENTS, period_ns=1_000_000, seed=0, label=None):
    """Concatenate phases; each count is ``round(max(0, N(rate, jitter*rate)))``."""
    if not phases:
        raise ContractError("need at least one phase")
    rng = np.random.default_rng(seed)
    samples = np.concatenate([_draw(rng, p, events, p.duration) for p in phases])
    return HpcTrace(period_ns, tuple(events), samples, label, np.zeros(len(samples), bool))


def inject_anomaly(trace, spec, seed=0, sigma=None):
    """Return ``(new_trace, mask)``; rows outside the span are left untouched.

    ``ratio_shift`` scales ``spec.event`` by ``magnitude``; ``spike`` adds
    ``magnitude`` standard deviations (per event, from ``sigma`` or the input
    trace) to every event; ``phase_swap`` redraws the span from
    ``spec.alt_phase``. The returned trace's mask is the union of its old mask
    and the span; the returned ``mask`` covers exactly the span.
    """
    s, e = spec.start, spec.start + spec.length
    if e > trace.n_rows:
        raise SpanOutOfRange(f"span [{s}, {e}) exceeds {trace.n_rows} rows")
    out = trace.samples.copy()
    if spec.kind == "ratio_shift":
        j = event_index(trace, spec.event)
        out[s:e, j] = np.rint(out[s:e, j] * spec.magnitude).astype(np.int64)
    elif spec.kind == "spike":
        sd = trace.samples.std(axis=0) if sigma is None else np.asarray(sigma, dtype=float)
        out[s:e] = np.rint(out[s:e] + spec.magnitude * sd).astype(np.int64)
    else:
        if spec.alt_phase is None:
            raise ContractError("phase_swap needs alt_phase")
        rng = np.random.default_rng(seed)
        out[s:e] = _draw(rng, spec.alt_phase, trace.events, spec.length)
    mask = np.zeros(trace.n_rows, dtype=bool)
    mask[s:e] = True
    old = trace.mask if trace.mask is not None else np.zeros(trace.n_rows, dtype=bool)
    return replace(trace, samples=out, mask=old | mask), mask


def spread_spans(n_rows, count, length, seed=0, margin=None):
    """``count`` non-overlapping spans of ``length`` rows, one per equal segment.

    Each span sits at a seeded random offset inside its segment, at least
    ``margin`` rows (default ``length``) from the segment edges.
    """
    seg = n_rows // count
    margin = length if margin is None else margin
    if seg < length + 2 * margin:
        raise SpanOutOfRange(f"cannot fit {count} spans of {length} rows in {n_rows}")
    rng = np.random.default_rng(seed)
    return [int(i * seg + margin + rng.integers(0, seg - length - 2 * margin + 1))
            for i in range(count)]


def inject_many(trace, kind, magnitude, count, length, seed=0, **kw):
    """Inject ``count`` anomalies of one kind at :func:`spread_spans` positions."""
    starts = spread_spans(trace.n_rows, count, length, seed)
    for i, start in enumerate(starts):
        trace, _ = inject_anomaly(trace, AnomalySpec(kind, magnitude, start, length, **kw),
                                  seed=seed + i + 1)
    return trace, [(s, s + length) for s in starts]


# -- opcode corpora ----------------------------------------------------------

@dataclass(frozen=True)
class Family:
    """First-order Markov chain over ``tokens``."""

    name: str
    tokens: tuple
    start: np.ndarray
    transitions: np.ndarray


def random_family(name, seed, tokens=MNEMONICS, support=8, concentration=1.0):
    """Each token moves to ``support`` random successors with Dirichlet weights."""
    rng = np.random.default_rng(seed)
    k = len(tokens)
    T = np.zeros((k, k))
    for i in range(k):
        succ = rng.choice(k, size=min(support, k), replace=False)
        T[i, succ] = rng.dirichlet(np.full(len(succ), concentration))
    start = rng.dirichlet(np.ones(k))
    return Family(name, tuple(tokens), start, T)


def disjoint_families(names=("benign", "malicious"), tokens=MNEMONICS, seed=0, support=4):
    """Families over disjoint token subsets, so their bigram supports never meet."""
    rng = np.random.default_rng(seed)
    perm = rng.permutation(len(tokens))
    parts = np.array_split(perm, len(names))
    fams = []
    for i, (name, part) in enumerate(zip(names, parts)):
        sub = tuple(tokens[j] for j in sorted(part))
        fams.append(random_family(name, seed + 1 + i, sub, support))
    return fams


def shift_family(family, amount, seed, name=None, support=8):
    """Blend ``family``'s chain with a fresh random one: ``(1-amount)*T + amount*T'``."""
    other = random_family(name or family.name, seed, family.tokens, support)
    T = (1 - amount) * family.transitions + amount * other.transitions
    start = (1 - amount) * family.start + amount * other.start
    return Family(name or family.name, family.tokens, start, T)


def _sample_chain(rng, family, length):
    k = len(family.tokens)
    cum_T = np.cumsum(family.transitions, axis=1)
    state = int(min(np.searchsorted(np.cumsum(family.start), rng.random() * family.start.sum()),
                    k - 1))
    out = [state]
    draws = rng.random(length - 1)
    for u in draws:
        row = cum_T[state]
        state = int(min(np.searchsorted(row, u * row[-1], side="right"), k - 1))
        out.append(state)
    return tuple(family.tokens[s] for s in out)


def gen_opcode_corpus(families, count, length_range=(100, 300), seed=0):
    """``count`` labeled sequences, assigned to families round-robin (balanced)."""
    if len(families) < 2:
        raise ContractError("need at least two families")
    lo, hi = length_range
    if lo < 1 or hi < lo:
        raise ContractError(f"invalid length range {length_range}")
    rng = np.random.default_rng(seed)
    corpus = []
    for i in range(count):
        fam = families[i % len(families)]
        length = int(rng.integers(lo, hi + 1))
        corpus.append((OpcodeSequence(_sample_chain(rng, fam, length), f"seq_{i:05d}"), fam.name))
    return corpus


def write_corpus(corpus, directory, elf=False):
    """Token-per-line files (or RISC-V ELF binaries) plus ``labels.csv``."""
    from .elf import SHF_ALLOC, SHF_EXECINSTR, build_elf64
    from .rvdecode import encode_tokens

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    rows = []
    for seq, label in corpus:
        if elf:
            fname = f"{seq.source_id}.elf"
            code = encode_tokens(seq.tokens)
            (directory / fname).write_bytes(
                build_elf64([(".text", 0x10000, SHF_ALLOC | SHF_EXECINSTR, code)]))
        else:
            fname = f"{seq.source_id}.txt"
            (directory / fname).write_text(dump_tokens(seq))
        rows.append((fname, label))
    with open(directory / "labels.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["file", "label"])
        w.writerows(rows)


def read_corpus(directory):
    """Inverse of :func:`write_corpus`; ELF entries are decoded on the fly."""
    from .elf import code_bytes, parse_elf
    from .rvdecode import decode_stream

    directory = Path(directory)
    with open(directory / "labels.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    corpus = []
    for row in rows:
        path = directory / row["file"]
        sid = Path(row["file"]).stem
        data = path.read_bytes()
        if data[:4] == b"\x7fELF":
            seq = decode_stream(code_bytes(parse_elf(data)), sid)
        else:
            seq = load_tokens(data.decode(), sid)
        corpus.append((seq, row["label"]))
    return corpus
