"""Hardware-performance-counter traces: CSV ingestion, derived ratios, windowing.

Samples are per-period deltas (not cumulative counter values), so no
wraparound handling is needed; adapters must difference raw counters first.
"""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import (ContractError, InputError, NegativeCount, NonMonotonicTime,
                     NonUniformPeriod, RaggedRow, TraceFormatError, UnknownEvent,
                     WindowTooLong)

DEFAULT_EVENTS = ("CYCLES", "RETIRED_INSTR", "L1D_MISS", "L3_MISS", "BRANCH_MISS")
STATS = ("mean", "std", "min", "max", "slope")
MASK_COLUMN = "anomaly"


@dataclass
class HpcTrace:
    sampling_period_ns: int
    events: tuple
    samples: np.ndarray
    label: object = None
    mask: np.ndarray = None

    def __post_init__(self):
        self.events = tuple(self.events)
        self.samples = np.asarray(self.samples, dtype=np.int64)
        if self.samples.ndim != 2 or self.samples.shape[1] != len(self.events):
            raise ContractError(f"samples shape {self.samples.shape} does not match "
                                f"{len(self.events)} events")
        if len(set(self.events)) != len(self.events):
            raise ContractError("duplicate event names")
        if self.sampling_period_ns <= 0:
            raise ContractError("sampling period must be positive")
        if (self.samples < 0).any():
            raise NegativeCount("negative counter delta")
        if self.mask is not None:
            self.mask = np.asarray(self.mask, dtype=bool)
            if self.mask.shape != (len(self.samples),):
                raise ContractError("mask length must equal row count")

    @property
    def n_rows(self):
        return len(self.samples)

    def column(self, event):
        return self.samples[:, event_index(self, event)]


def event_index(trace, name):
    try:
        return trace.events.index(name)
    except ValueError:
        raise UnknownEvent(f"event {name!r} not in trace ({', '.join(trace.events)})") from None


def _parse_int(text, what, lineno, source):
    try:
        return int(text)
    except ValueError:
        raise TraceFormatError(f"{what} {text!r} is not an integer", lineno, source) from None


def load_trace_csv(source, label=None, period_ns=None):
    """Read a ``t_ns,<EVENT>...[,anomaly]`` trace.

    ``source`` is a path, an open text file or a CSV string containing a
    newline. The period is inferred from the timestamps, which must be
    strictly increasing and spaced within 1% of the first interval; ``period_ns`` is only
    needed for single-row traces.
    """
    name = None
    if hasattr(source, "read"):
        text = source.read()
    elif isinstance(source, str) and "\n" in source:
        text = source
    else:
        name = str(source)
        with open(source, newline="") as fh:
            text = fh.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or not rows[0] or rows[0][0].strip() != "t_ns":
        raise TraceFormatError("header must start with t_ns", 1, name)
    header = [h.strip() for h in rows[0]]
    has_mask = header[-1] == MASK_COLUMN
    events = header[1:-1] if has_mask else header[1:]
    if not events:
        raise TraceFormatError("no event columns", 1, name)
    times, counts, mask = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise RaggedRow(f"expected {len(header)} fields, got {len(row)}", lineno, name)
        t = _parse_int(row[0].strip(), "timestamp", lineno, name)
        if times and t <= times[-1]:
            raise NonMonotonicTime(f"t_ns {t} does not follow {times[-1]}", lineno, name)
        vals = [_parse_int(c.strip(), "count", lineno, name) for c in row[1:len(events) + 1]]
        if any(v < 0 for v in vals):
            raise NegativeCount(f"negative count in {vals}", lineno, name)
        if has_mask:
            flag = row[-1].strip()
            if flag not in ("0", "1"):
                raise TraceFormatError(f"anomaly flag {flag!r} must be 0 or 1", lineno, name)
            mask.append(flag == "1")
        times.append(t)
        counts.append(vals)
    if not times:
        raise TraceFormatError("trace has no rows", None, name)
    if len(times) == 1:
        if period_ns is None:
            raise NonUniformPeriod("cannot infer the period from a single row", 2, name)
        period = int(period_ns)
    else:
        # the first spacing is the reference; later rows are checked against it
        deltas = np.diff(times)
        period = int(deltas[0])
        bad = np.flatnonzero(np.abs(deltas - period) > 0.01 * period)
        if len(bad):
            raise NonUniformPeriod(f"spacing {deltas[bad[0]]} deviates from period {period}",
                                   int(bad[0]) + 3, name)
    return HpcTrace(period, tuple(events), np.array(counts, dtype=np.int64), label,
                    np.array(mask, dtype=bool) if has_mask else None)


def write_trace_csv(trace, path, t0=0):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["t_ns", *trace.events]
        if trace.mask is not None:
            header.append(MASK_COLUMN)
        w.writerow(header)
        for i, row in enumerate(trace.samples):
            out = [t0 + i * trace.sampling_period_ns, *row.tolist()]
            if trace.mask is not None:
                out.append(int(trace.mask[i]))
            w.writerow(out)


def derive_ratio(trace, numerator, denominator, epsilon_policy="zero"):
    """Row-wise ``numerator / denominator``.

    Where the denominator is zero, policy ``zero`` yields 0.0 and policy
    ``epsilon`` yields ``num / (den + 1)``.
    """
    num = trace.column(numerator).astype(float)
    den = trace.column(denominator).astype(float)
    out = np.zeros(len(num))
    nz = den != 0
    out[nz] = num[nz] / den[nz]
    if epsilon_policy == "epsilon":
        out[~nz] = num[~nz] / (den[~nz] + 1.0)
    elif epsilon_policy != "zero":
        raise ValueError(f"unknown epsilon policy {epsilon_policy!r}")
    return out


def ratio_name(numerator, denominator):
    return f"{numerator}/{denominator}"


def feature_series(trace, events=None, ratios=(), epsilon_policy="zero"):
    """Stack raw event columns and derived ratios into ``(matrix, names)``."""
    events = trace.events if events is None else tuple(events)
    cols = [trace.column(e).astype(float) for e in events]
    names = list(events)
    for num, den in ratios:
        cols.append(derive_ratio(trace, num, den, epsilon_policy))
        names.append(ratio_name(num, den))
    if not cols:
        raise ContractError("no feature columns selected")
    return np.column_stack(cols), tuple(names)


@dataclass(frozen=True)
class WindowConfig:
    window_len: int = 100
    stride: int = 50
    stats: tuple = field(default=STATS)

    def __post_init__(self):
        if self.window_len < 1 or self.stride < 1:
            raise ContractError("window_len and stride must be >= 1")
        unknown = set(self.stats) - set(STATS)
        if unknown or not self.stats:
            raise ContractError(f"stats must be a non-empty subset of {STATS}")
        # canonical order keeps the output layout independent of how stats were listed
        object.__setattr__(self, "stats", tuple(s for s in STATS if s in self.stats))


@dataclass(frozen=True)
class Windows:
    X: np.ndarray
    spans: tuple
    names: tuple

    @property
    def starts(self):
        return np.array([s for s, _ in self.spans], dtype=int)


def windowize(series, cfg, names=None):
    """Per-window statistics, laid out stat-major then column.

    Windows start at 0, stride, 2*stride, ...; a trailing partial window is
    dropped. ``std`` is the population standard deviation and ``slope`` the
    least-squares slope against the in-window row index.
    """
    series = np.asarray(series, dtype=float)
    if series.ndim == 1:
        series = series[:, None]
    rows, cols = series.shape
    if cfg.window_len > rows:
        raise WindowTooLong(f"window of {cfg.window_len} rows exceeds {rows}-row series")
    if names is None:
        names = tuple(f"c{j}" for j in range(cols))
    n_win = (rows - cfg.window_len) // cfg.stride + 1
    starts = np.arange(n_win) * cfg.stride
    win = np.lib.stride_tricks.sliding_window_view(series, cfg.window_len, axis=0)[starts]
    # win: (n_win, cols, window_len)
    blocks, out_names = [], []
    for stat in cfg.stats:
        if stat == "mean":
            v = win.mean(axis=2)
        elif stat == "std":
            v = win.std(axis=2)
        elif stat == "min":
            v = win.min(axis=2)
        elif stat == "max":
            v = win.max(axis=2)
        else:
            t = np.arange(cfg.window_len, dtype=float)
            t -= t.mean()
            denom = t @ t
            v = (win - win.mean(axis=2, keepdims=True)) @ t / denom if denom else \
                np.zeros(win.shape[:2])
        blocks.append(v)
        out_names.extend(f"{stat}.{nm}" for nm in names)
    X = np.concatenate(blocks, axis=1)
    spans = tuple((int(s), int(s) + cfg.window_len) for s in starts)
    return Windows(X, spans, tuple(out_names))


def window_labels(mask, spans, min_fraction=0.0):
    """1 for windows whose masked-row fraction exceeds ``min_fraction`` (default: any overlap)."""
    mask = np.asarray(mask, dtype=bool)
    return np.array([int(mask[s:e].mean() > min_fraction) for s, e in spans], dtype=int)


def write_windowed_csv(windows, path, labels=None):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        header = ["window_start_row", *windows.names]
        if labels is not None:
            header.append("label")
        w.writerow(header)
        for i, (start, _) in enumerate(windows.spans):
            row = [start, *(f"{v:.17g}" for v in windows.X[i])]
            if labels is not None:
                row.append(labels[i])
            w.writerow(row)


def read_windowed_csv(path):
    """Returns ``(X, starts, names, labels)``; labels are strings or ``None``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or rows[0][:1] != ["window_start_row"]:
        raise InputError(f"{path}:1: header must start with window_start_row")
    header = rows[0]
    has_label = header[-1] == "label"
    names = tuple(header[1:-1] if has_label else header[1:])
    X, starts, labels = [], [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            starts.append(int(row[0]))
            X.append([float(v) for v in row[1:len(names) + 1]])
        except ValueError as exc:
            raise InputError(f"{path}:{lineno}: {exc}") from None
        if has_label:
            labels.append(row[-1])
    X = np.array(X, dtype=float).reshape(len(starts), len(names))
    return X, np.array(starts, dtype=int), names, (labels if has_label else None)
