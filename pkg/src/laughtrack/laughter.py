"""Turn a laughter-probability series into laughter segments."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .subtitles import TimeSpan

DEFAULT_THRESHOLD = 0.8
DEFAULT_MIN_LENGTH_S = 0.2
DEFAULT_HOP_S = 0.01

# Laughter-duration bins; the first is closed on both sides, the rest are (lo, hi].
DURATION_BINS: tuple[tuple[float, float], ...] = (
    (0.2, 0.5),
    (0.5, 1.5),
    (1.5, 2.5),
    (2.5, 3.5),
    (3.5, 4.5),
    (4.5, 5.5),
    (5.5, 15.5),
)

# absorbs float noise when frame counts are converted to seconds
_EPS = 1e-9


class SegmentFileError(ValueError):
    pass


@dataclass(frozen=True)
class ProbabilitySeries:
    hop_s: float
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1:
            raise ValueError("probability series must be one-dimensional")
        if not self.hop_s > 0:
            raise ValueError(f"hop must be positive, got {self.hop_s}")
        if values.size and (np.isnan(values).any() or values.min() < 0 or values.max() > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class LaughterSegment:
    span: TimeSpan
    mean_confidence: float

    @property
    def start_s(self) -> float:
        return self.span.start_s

    @property
    def end_s(self) -> float:
        return self.span.end_s

    def duration(self) -> float:
        return self.span.duration()


def segment(
    series: ProbabilitySeries,
    threshold: float = DEFAULT_THRESHOLD,
    min_length_s: float = DEFAULT_MIN_LENGTH_S,
) -> list[LaughterSegment]:
    """Maximal runs of frames at or above ``threshold`` lasting at least ``min_length_s``."""
    if not 0 < threshold <= 1:
        raise ValueError(f"threshold must be in (0, 1], got {threshold}")
    if not min_length_s > 0:
        raise ValueError(f"min_length_s must be positive, got {min_length_s}")
    v = series.values
    if v.size == 0:
        return []

    above = np.concatenate(([False], v >= threshold, [False]))
    edges = np.flatnonzero(np.diff(above.astype(np.int8)))
    starts, stops = edges[0::2], edges[1::2]
    min_frames = math.ceil(min_length_s / series.hop_s - _EPS)

    out = []
    for a, b in zip(starts.tolist(), stops.tolist()):
        if b - a < min_frames:
            continue
        span = TimeSpan(round(a * series.hop_s, 9), round(b * series.hop_s, 9))
        out.append(LaughterSegment(span, float(v[a:b].mean())))
    return out


def _fmt(x: float) -> str:
    s = f"{x:.3f}"
    return s if float(s) == x else repr(float(x))


def serialize_segments(segments: Iterable[LaughterSegment]) -> bytes:
    lines = [f"{_fmt(s.start_s)}\t{_fmt(s.end_s)}\t{_fmt(s.mean_confidence)}\n" for s in segments]
    return "".join(lines).encode("utf-8")


def load_segments(data: bytes) -> list[LaughterSegment]:
    """Read ``start<TAB>end<TAB>confidence`` records and validate them."""
    rows = []
    for lineno, line in enumerate(data.decode("utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise SegmentFileError(f"line {lineno}: expected 3 tab-separated fields, got {len(parts)}")
        try:
            start, end, conf = (float(p) for p in parts)
        except ValueError as exc:
            raise SegmentFileError(f"line {lineno}: {exc}") from None
        if not (start >= 0 and end > start):
            raise SegmentFileError(f"line {lineno}: inverted or negative span ({start}, {end})")
        if not 0 <= conf <= 1:
            raise SegmentFileError(f"line {lineno}: confidence {conf} outside [0, 1]")
        rows.append((start, end, conf, lineno))

    rows.sort(key=lambda r: r[0])
    for prev, cur in zip(rows, rows[1:]):
        if cur[0] < prev[1]:
            raise SegmentFileError(
                f"line {cur[3]}: segment ({cur[0]}, {cur[1]}) overlaps line {prev[3]} ({prev[0]}, {prev[1]})"
            )
    return [LaughterSegment(TimeSpan(s, e), c) for s, e, c, _ in rows]


@dataclass(frozen=True)
class DurationHistogram:
    bins: tuple[tuple[float, float], ...]
    counts: tuple[int, ...]
    outside: int = 0

    @property
    def total(self) -> int:
        return sum(self.counts) + self.outside


def duration_histogram(durations: Iterable[float]) -> DurationHistogram:
    counts = [0] * len(DURATION_BINS)
    outside = 0
    for d in durations:
        d = round(float(d), 6)
        for k, (lo, hi) in enumerate(DURATION_BINS):
            if (lo <= d if k == 0 else lo < d) and d <= hi:
                counts[k] += 1
                break
        else:
            outside += 1
    return DurationHistogram(DURATION_BINS, tuple(counts), outside)


def total_laughter_stats(segments: Sequence[LaughterSegment]) -> DurationHistogram:
    """Histogram of segment durations over the standard laughter-length bins."""
    return duration_histogram(s.duration() for s in segments)
