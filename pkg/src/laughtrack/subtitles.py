"""SubRip parsing, subtitle cleaning and temporal lookup."""

from __future__ import annotations

import bisect
import logging
import re
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

log = logging.getLogger(__name__)

TIMECODE_RE = re.compile(
    r"^(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*-->\s*(\d{2,}):(\d{2}):(\d{2}),(\d{3})\s*$"
)
_ITALIC_RE = re.compile(r"</?i>", re.IGNORECASE)
_LEADING_DASH_RE = re.compile(r"^(?:\s*-)+\s*")
_SPACES_RE = re.compile(r" {2,}")
_LINE_RE = re.compile(r"[^\n]*\n|[^\n]+$")


class SubtitleError(ValueError):
    """Raised when a subtitle file yields no usable cues."""


@dataclass(frozen=True, order=True)
class TimeSpan:
    start_s: float
    end_s: float

    def __post_init__(self) -> None:
        if self.start_s < 0:
            raise ValueError(f"span starts before 0: {self.start_s}")
        if not self.end_s > self.start_s:
            raise ValueError(f"empty or inverted span [{self.start_s}, {self.end_s}]")

    def duration(self) -> float:
        return self.end_s - self.start_s

    def overlap(self, other: TimeSpan) -> float:
        return min(self.end_s, other.end_s) - max(self.start_s, other.start_s)

    def overlaps(self, other: TimeSpan) -> bool:
        """Strict overlap: touching endpoints do not count."""
        return self.overlap(other) > 0


@dataclass(frozen=True)
class SubtitleCue:
    index: int
    span: TimeSpan
    raw_text: str
    clean_text: str | None = None

    def cleaned(self) -> SubtitleCue:
        return replace(self, clean_text=clean(self.raw_text))


@dataclass(frozen=True)
class SubtitleTrack:
    episode_id: str
    cues: tuple[SubtitleCue, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        starts = [c.span.start_s for c in self.cues]
        if starts != sorted(starts):
            raise ValueError("cues must be sorted by start time")
        idx = [c.index for c in self.cues]
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ValueError("cue indices must be strictly increasing")

    def cleaned(self) -> SubtitleTrack:
        return replace(self, cues=tuple(c.cleaned() for c in self.cues))

    def __len__(self) -> int:
        return len(self.cues)


def _parse_timecode(h: str, m: str, s: str, ms: str) -> float:
    return (int(h) * 3_600_000 + int(m) * 60_000 + int(s) * 1000 + int(ms)) / 1000.0


def format_timecode(seconds: float) -> str:
    total_ms = round(seconds * 1000)
    h, rem = divmod(total_ms, 3_600_000)
    m, rem = divmod(rem, 60_000)
    s, ms = divmod(rem, 1000)
    return f"{h:02d}:{m:02d}:{s:02d},{ms:03d}"


def parse_srt(data: bytes, episode_id: str = "") -> SubtitleTrack:
    """Parse SubRip bytes into a track sorted by cue start.

    Malformed blocks are skipped; each skip is logged and recorded in
    ``track.warnings`` with the byte offset of the block.
    """
    bom = b"\xef\xbb\xbf"
    base = len(bom) if data.startswith(bom) else 0
    text = data[base:].decode("utf-8")

    cues: list[SubtitleCue] = []
    warnings: list[str] = []
    block: list[str] = []
    block_offset = 0
    offset = base

    def flush() -> None:
        if not block:
            return
        cue = _parse_block(block)
        if cue is None:
            msg = f"malformed subtitle block at byte {block_offset}"
            log.warning(msg)
            warnings.append(msg)
        else:
            cues.append(cue)

    for line in _LINE_RE.findall(text):
        stripped = line.rstrip("\n").rstrip("\r")
        if stripped.strip() == "":
            flush()
            block = []
        else:
            if not block:
                block_offset = offset
            block.append(stripped)
        offset += len(line.encode("utf-8"))
    flush()

    if not cues:
        raise SubtitleError(f"no well-formed subtitle blocks in {episode_id or 'input'}")

    cues.sort(key=lambda c: (c.span.start_s, c.index))
    idx = [c.index for c in cues]
    if any(b <= a for a, b in zip(idx, idx[1:])):
        msg = "cue indices out of order after sorting; renumbered from 1"
        log.warning(msg)
        warnings.append(msg)
        cues = [replace(c, index=i) for i, c in enumerate(cues, start=1)]
    return SubtitleTrack(episode_id, tuple(cues), tuple(warnings))


def _parse_block(lines: list[str]) -> SubtitleCue | None:
    if len(lines) < 3 or not lines[0].strip().isdigit():
        return None
    m = TIMECODE_RE.match(lines[1].strip())
    if m is None:
        return None
    start = _parse_timecode(*m.groups()[:4])
    end = _parse_timecode(*m.groups()[4:])
    try:
        span = TimeSpan(start, end)
    except ValueError:
        return None
    return SubtitleCue(int(lines[0].strip()), span, "\n".join(lines[2:]))


def serialize_srt(cues: Iterable[SubtitleCue]) -> bytes:
    out = []
    for c in cues:
        out.append(
            f"{c.index}\n{format_timecode(c.span.start_s)} --> "
            f"{format_timecode(c.span.end_s)}\n{c.raw_text}\n\n"
        )
    return "".join(out).encode("utf-8")


def _fix_capital_i(s: str) -> str:
    # left-to-right so a fixed "l" counts as the lowercase predecessor of the next "I"
    chars = list(s)
    for k in range(1, len(chars) - 1):
        if chars[k] == "I" and chars[k - 1].isalpha() and chars[k - 1].islower() and chars[k + 1].isalpha():
            chars[k] = "l"
    return "".join(chars)


def clean(raw_text: str) -> str:
    """Normalize one subtitle's text.

    Italic tags go first, then leading dashes per line, then newlines become
    spaces, a capital ``I`` between a lowercase letter and another letter
    becomes ``l``, and runs of spaces collapse.
    """
    s = raw_text
    while True:
        stripped = _ITALIC_RE.sub("", s)
        if stripped == s:
            break
        s = stripped
    lines = s.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    s = " ".join(_LEADING_DASH_RE.sub("", line) for line in lines)
    s = _fix_capital_i(s)
    return _SPACES_RE.sub(" ", s).strip()


def cues_in_span(track: SubtitleTrack, span: TimeSpan) -> list[SubtitleCue]:
    """Cues with strictly positive overlap with ``span``, in track order."""
    starts = [c.span.start_s for c in track.cues]
    hi = bisect.bisect_left(starts, span.end_s)
    return [c for c in track.cues[:hi] if c.span.end_s > span.start_s]


def join_text(cues: Sequence[SubtitleCue], separator: str = " ") -> str:
    parts = [c.clean_text if c.clean_text is not None else clean(c.raw_text) for c in cues]
    return separator.join(parts)
