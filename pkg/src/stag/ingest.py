"""Stream persistence and dataset plumbing.

CSV layout for sensor streams (UTF-8, LF):

    timestamp_ns,sensor,x,y,z
    0,acc,0.1029,,

``sensor`` is one of ``acc``, ``gyro``, ``mag``; a k-axis stream fills the
first k value columns and leaves the rest empty.  Values are written with
``repr`` so a write/read round trip is bit-exact.  The nominal rate is not
part of the schema and is re-inferred from the median timestamp spacing.

Transcript files are TSV lines ``id<TAB>reference<TAB>hypothesis``; entity
files are ``id<TAB>type<TAB>filler``.  Text is normalized on read:
lowercased, punctuation replaced by spaces, whitespace collapsed.
"""

from __future__ import annotations

import csv
import math
import string
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import EntityRecord, TranscriptPair
from .sensorsim import SensorStream

_KIND_TO_TOKEN = {"accel": "acc", "gyro": "gyro", "mag": "mag"}
_TOKEN_TO_KIND = {v: k for k, v in _KIND_TO_TOKEN.items()}
_HEADER = ["timestamp_ns", "sensor", "x", "y", "z"]

_PUNCT_TABLE = str.maketrans({c: " " for c in string.punctuation})


class ParseError(ValueError):
    """Malformed input file; carries the path and 1-based line number."""

    def __init__(self, path: str | Path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line


@dataclass
class BifurcatedSet:
    """A capture split for training: odd/even accelerometer halves plus the
    misaligned gyroscope stream, all at the halved rate."""

    odd_accel: SensorStream
    even_accel: SensorStream
    gyro: SensorStream

    def __post_init__(self) -> None:
        if not (0 <= self.odd_accel.n_samples - self.even_accel.n_samples <= 1):
            raise ValueError(
                "odd half must hold the same number of samples as the even "
                "half or one more"
            )
        if self.odd_accel.nominal_rate != self.even_accel.nominal_rate:
            raise ValueError("odd and even halves must share a nominal rate")


@dataclass
class DatasetSplit:
    """Train/validation/test partition of a recording list."""

    train: list
    validation: list
    test: list
    seed: int

    def sizes(self) -> tuple[int, int, int]:
        return len(self.train), len(self.validation), len(self.test)


def _infer_rate(timestamps: np.ndarray) -> float:
    if timestamps.shape[0] < 2:
        return 0.0
    median_delta = float(np.median(np.diff(timestamps)))
    if median_delta <= 0:
        return 0.0
    return float(round(1e9 / median_delta))


def write_csv(stream: SensorStream, path: str | Path) -> None:
    """Write a stream to CSV; values use ``repr`` for exact round trips."""
    token = _KIND_TO_TOKEN[stream.sensor_kind]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_HEADER)
        for i in range(stream.n_samples):
            cells = [repr(float(stream.values[ax, i]))
                     for ax in range(stream.n_axes)]
            cells += [""] * (3 - stream.n_axes)
            writer.writerow([int(stream.timestamps[i]), token, *cells])


def read_csv(path: str | Path) -> SensorStream:
    """Read a stream written by :func:`write_csv`.

    Raises :class:`ParseError` (with the offending line number) on a bad
    header, malformed rows, non-increasing timestamps, unknown sensor
    tokens, or a sensor kind that changes mid-file.  A header-only file
    yields an empty accelerometer stream with rate 0.
    """
    timestamps: list[int] = []
    rows: list[list[float]] = []
    kind: str | None = None
    n_axes: int | None = None
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _HEADER:
            raise ParseError(path, 1, f"expected header {','.join(_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 5:
                raise ParseError(path, lineno,
                                 f"expected 5 columns, got {len(row)}")
            try:
                ts = int(row[0])
            except ValueError:
                raise ParseError(path, lineno,
                                 f"bad timestamp {row[0]!r}") from None
            token = row[1]
            if token not in _TOKEN_TO_KIND:
                raise ParseError(path, lineno, f"unknown sensor {token!r}")
            row_kind = _TOKEN_TO_KIND[token]
            if kind is None:
                kind = row_kind
            elif row_kind != kind:
                raise ParseError(path, lineno,
                                 "sensor kind changes mid-file")
            filled = [cell for cell in row[2:] if cell != ""]
            if row[2:2 + len(filled)] != filled:
                raise ParseError(path, lineno,
                                 "value columns must fill x,y,z left to right")
            if not filled:
                raise ParseError(path, lineno, "row has no values")
            try:
                values = [float(cell) for cell in filled]
            except ValueError:
                raise ParseError(path, lineno, "bad value cell") from None
            if not all(math.isfinite(v) for v in values):
                raise ParseError(path, lineno, "non-finite value")
            if n_axes is None:
                n_axes = len(values)
            elif len(values) != n_axes:
                raise ParseError(path, lineno,
                                 "axis count changes mid-file")
            if timestamps and ts <= timestamps[-1]:
                raise ParseError(path, lineno,
                                 f"timestamp {ts} not increasing")
            timestamps.append(ts)
            rows.append(values)
    if not timestamps:
        return SensorStream("accel", np.empty(0, dtype=np.int64),
                            np.empty((1, 0)), 0.0)
    ts_arr = np.asarray(timestamps, dtype=np.int64)
    values_arr = np.asarray(rows, dtype=float).T
    return SensorStream(kind, ts_arr, values_arr, _infer_rate(ts_arr))


def downsample(stream: SensorStream, target_rate: float) -> SensorStream:
    """Keep, for each ideal tick of ``target_rate``, the nearest sample.

    Ticks start at the first timestamp.  Ties pick the earlier sample and
    the result never repeats a sample.  Raises ``ValueError`` when the
    target exceeds the stream's nominal rate.
    """
    if target_rate <= 0:
        raise ValueError("target_rate must be positive")
    if stream.nominal_rate and target_rate > stream.nominal_rate:
        raise ValueError(
            f"cannot downsample a {stream.nominal_rate} Hz stream "
            f"to {target_rate} Hz"
        )
    if stream.n_samples < 2 or target_rate == stream.nominal_rate:
        out = stream.take(np.arange(stream.n_samples))
        out.nominal_rate = float(target_rate)
        return out
    ts = stream.timestamps
    t0 = int(ts[0])
    span_ns = int(ts[-1]) - t0
    n_out = int(math.floor(span_ns * target_rate / 1e9)) + 1
    ticks = t0 + np.round(np.arange(n_out) * (1e9 / target_rate)).astype(np.int64)
    right = np.searchsorted(ts, ticks, side="left")
    right = np.clip(right, 1, ts.shape[0] - 1)
    left = right - 1
    # Nearest sample, earlier one on ties.
    pick_right = (ts[right] - ticks) < (ticks - ts[left])
    chosen = np.where(pick_right, right, left)
    chosen = np.unique(chosen)
    out = stream.take(chosen)
    out.nominal_rate = float(target_rate)
    return out


def bifurcate(accel: SensorStream, gyro: SensorStream) -> BifurcatedSet:
    """Split a full-rate accelerometer into odd/even halves and pair it with
    the misaligned gyroscope view.

    Accelerometer samples at positions 0, 2, 4, ... become the odd half
    (the rate-capped stream the pipeline later sees); positions 1, 3, 5, ...
    become the even half (the reconstruction targets).  A gyroscope at the
    accelerometer's rate is reduced to positions 1, 3, 5, ... so it sits
    midway between odd samples; one already at the halved rate passes
    through unchanged.
    """
    if accel.n_samples < 4:
        raise ValueError("need at least 4 accelerometer samples to bifurcate")
    half_rate = accel.nominal_rate / 2.0
    odd = accel.take(np.arange(0, accel.n_samples, 2))
    even = accel.take(np.arange(1, accel.n_samples, 2))
    odd.nominal_rate = half_rate
    even.nominal_rate = half_rate
    if gyro.nominal_rate == accel.nominal_rate:
        gyro_half = gyro.take(np.arange(1, gyro.n_samples, 2))
        gyro_half.nominal_rate = half_rate
    elif gyro.nominal_rate == half_rate:
        gyro_half = gyro
    else:
        raise ValueError(
            f"gyro rate {gyro.nominal_rate} Hz matches neither the "
            f"accelerometer rate {accel.nominal_rate} Hz nor its half"
        )
    return BifurcatedSet(odd_accel=odd, even_accel=even, gyro=gyro_half)


def interleave(odd: SensorStream, even: SensorStream) -> SensorStream:
    """Inverse of the accelerometer split: merge halves back positionally.

    ``odd`` supplies positions 0, 2, 4, ... and ``even`` positions
    1, 3, 5, ...; the merged timestamps must be strictly increasing.
    """
    if not 0 <= odd.n_samples - even.n_samples <= 1:
        raise ValueError("halves differ by more than one sample")
    if odd.sensor_kind != even.sensor_kind:
        raise ValueError("halves must share a sensor kind")
    if odd.n_axes != even.n_axes:
        raise ValueError("halves must share an axis count")
    n = odd.n_samples + even.n_samples
    ts = np.empty(n, dtype=np.int64)
    values = np.empty((odd.n_axes, n))
    ts[0::2] = odd.timestamps
    ts[1::2] = even.timestamps
    values[:, 0::2] = odd.values
    values[:, 1::2] = even.values
    return SensorStream(odd.sensor_kind, ts, values, odd.nominal_rate * 2.0)


def split_dataset(
    recordings: list,
    ratios: tuple[float, float, float] = (0.7, 0.15, 0.15),
    seed: int = 0,
) -> DatasetSplit:
    """Shuffle recordings and partition them train/validation/test.

    Partition sizes follow the largest-remainder rule on ``ratios`` (ties
    go to the earlier partition), so each size is within one recording of
    its exact target.  The shuffle is seeded and reproducible.
    """
    n = len(recordings)
    if n < 3:
        raise ValueError("need at least 3 recordings to split")
    if len(ratios) != 3:
        raise ValueError("ratios must have exactly 3 entries")
    if any(r < 0 for r in ratios) or not math.isclose(sum(ratios), 1.0,
                                                      abs_tol=1e-9):
        raise ValueError("ratios must be nonnegative and sum to 1")
    quotas = [n * r for r in ratios]
    counts = [int(math.floor(q)) for q in quotas]
    remainders = [q - c for q, c in zip(quotas, counts)]
    leftover = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-remainders[i], i))
    for i in order[:leftover]:
        counts[i] += 1
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    shuffled = [recordings[i] for i in perm]
    a, b = counts[0], counts[0] + counts[1]
    return DatasetSplit(train=shuffled[:a], validation=shuffled[a:b],
                        test=shuffled[b:], seed=seed)


def normalize_text(text: str) -> str:
    """Lowercase, replace punctuation with spaces, collapse whitespace."""
    return " ".join(text.lower().translate(_PUNCT_TABLE).split())


def _read_tsv3(path: str | Path) -> list[tuple[int, list[str]]]:
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, lineno,
                                 f"expected 3 tab-separated fields, "
                                 f"got {len(fields)}")
            out.append((lineno, fields))
    return out


def read_transcripts(path: str | Path) -> list[TranscriptPair]:
    """Read ``id<TAB>reference<TAB>hypothesis`` lines into token pairs."""
    pairs = []
    for lineno, (sid, ref, hyp) in ((ln, f) for ln, f in _read_tsv3(path)):
        sid = sid.strip()
        if not sid:
            raise ParseError(path, lineno, "empty sentence id")
        pairs.append(TranscriptPair(
            sentence_id=sid,
            reference=tuple(normalize_text(ref).split()),
            hypothesis=tuple(normalize_text(hyp).split()),
        ))
    return pairs


def read_entities(path: str | Path) -> list[EntityRecord]:
    """Read ``id<TAB>type<TAB>filler`` lines into entity records."""
    records = []
    for lineno, (sid, etype, filler) in ((ln, f) for ln, f in _read_tsv3(path)):
        sid = sid.strip()
        etype_n = normalize_text(etype)
        filler_n = normalize_text(filler)
        if not sid:
            raise ParseError(path, lineno, "empty sentence id")
        if not etype_n or not filler_n:
            raise ParseError(path, lineno,
                             "entity type and filler must be nonempty "
                             "after normalization")
        records.append(EntityRecord(sentence_id=sid, entity_type=etype_n,
                                    filler=filler_n))
    return records
