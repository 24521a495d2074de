"""Build the annotated clip corpus from laughter segments and subtitles.

Positive clips are the context window right before each laughter onset;
negative clips are full windows carved out of the stretch between two
laughter segments. Everything is deterministic given ``BuildConfig.seed``.
"""

from __future__ import annotations

import json
import logging
import zlib
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Literal, Mapping, Sequence

import numpy as np

from . import audio as audio_io
from .laughter import DurationHistogram, LaughterSegment, duration_histogram, load_segments
from .subtitles import SubtitleTrack, TimeSpan, cues_in_span, join_text, parse_srt

log = logging.getLogger(__name__)

FUNNY = "funny"
NOT_FUNNY = "not_funny"
Label = Literal["funny", "not_funny"]
SPLITS = ("train", "val", "test")
MANIFEST_FORMAT = "laughtrack-manifest/1"

# Episodes held out for testing in the reference Friends setup.
REFERENCE_TEST_EPISODES = (
    "1x09", "2x06", "2x22", "3x13", "3x20", "4x09", "5x04", "5x07", "6x09",
    "6x11", "6x15", "6x16", "7x09", "7x16", "7x19", "7x20", "7x22", "8x03",
    "8x14", "8x21", "9x05", "9x11", "9x21", "10x17", "10x18",
)

_EPS = 1e-6


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class BuildConfig:
    window_s: float = 10.0
    threshold: float = 0.8
    min_laugh_s: float = 0.2
    negatives_per_positive: int = 3
    duration_cap_s: float = 3.0
    seed: int = 1234
    min_positive_s: float = 1.0
    separator: str = " [SEP] "

    @classmethod
    def from_dict(cls, d: Mapping) -> BuildConfig:
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise CorpusError(f"unknown build_config keys: {sorted(unknown)}")
        return cls(**d)


@dataclass(frozen=True)
class ClipSample:
    id: str
    episode_id: str
    span: TimeSpan
    label: Label
    text: str
    audio_ref: str
    laughter_duration_s: float | None = None
    raw_laughter_duration_s: float | None = None

    def __post_init__(self) -> None:
        if self.label not in (FUNNY, NOT_FUNNY):
            raise ValueError(f"bad label {self.label!r}")
        if not self.text:
            raise ValueError(f"{self.id}: empty text")
        if (self.label == FUNNY) != (self.laughter_duration_s is not None):
            raise ValueError(f"{self.id}: laughter duration must be set iff the clip is funny")

    @property
    def is_funny(self) -> bool:
        return self.label == FUNNY


@dataclass
class EpisodeMedia:
    """One episode's subtitles, laughter segments and audio.

    Audio comes either from ``audio_path`` (read lazily) or from in-memory
    ``samples`` at ``sample_rate``.
    """

    episode_id: str
    subtitles: SubtitleTrack
    laughter: list[LaughterSegment]
    audio_path: Path | None = None
    samples: np.ndarray | None = field(default=None, repr=False)
    sample_rate: int = audio_io.TARGET_SR

    def __post_init__(self) -> None:
        if self.audio_path is None and self.samples is None:
            raise CorpusError(f"{self.episode_id}: no audio")
        self.subtitles = self.subtitles.cleaned()
        self.laughter = sorted(self.laughter, key=lambda s: s.start_s)
        for a, b in zip(self.laughter, self.laughter[1:]):
            if b.start_s < a.end_s:
                raise CorpusError(f"{self.episode_id}: overlapping laughter at {b.start_s}")

    def waveform(self) -> np.ndarray:
        if self.samples is None:
            self.samples, self.sample_rate = audio_io.read_audio(self.audio_path)
        return self.samples

    @property
    def duration_s(self) -> float:
        return len(self.waveform()) / self.sample_rate

    def validate(self) -> None:
        if self.laughter and self.laughter[-1].end_s > self.duration_s + _EPS:
            raise CorpusError(
                f"{self.episode_id}: laughter ends at {self.laughter[-1].end_s} "
                f"beyond audio duration {self.duration_s:.3f}"
            )


@dataclass(frozen=True)
class CorpusManifest:
    samples: tuple[ClipSample, ...]
    splits: Mapping[str, str]
    build_config: BuildConfig

    def in_split(self, name: str) -> list[ClipSample]:
        return [s for s in self.samples if self.splits.get(s.id) == name]

    def episodes(self) -> list[str]:
        return sorted({s.episode_id for s in self.samples})

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self.build_config), sort_keys=True).encode()
        return f"{zlib.crc32(blob):08x}"

    def to_jsonl(self) -> bytes:
        header = {"format": MANIFEST_FORMAT, "build_config": asdict(self.build_config)}
        lines = [json.dumps(header, separators=(",", ":"))]
        for s in self.samples:
            rec = {
                "id": s.id,
                "episode_id": s.episode_id,
                "start_s": s.span.start_s,
                "end_s": s.span.end_s,
                "label": s.label,
                "text": s.text,
                "audio_ref": s.audio_ref,
            }
            if s.laughter_duration_s is not None:
                rec["laughter_duration_s"] = s.laughter_duration_s
                rec["raw_laughter_duration_s"] = s.raw_laughter_duration_s
            rec["split"] = self.splits.get(s.id)
            lines.append(json.dumps(rec, ensure_ascii=False, separators=(",", ":")))
        return ("\n".join(lines) + "\n").encode("utf-8")

    @classmethod
    def from_jsonl(cls, data: bytes) -> CorpusManifest:
        lines = [ln for ln in data.decode("utf-8").splitlines() if ln.strip()]
        if not lines:
            raise CorpusError("empty manifest")
        header = json.loads(lines[0])
        if header.get("format") != MANIFEST_FORMAT:
            raise CorpusError(f"not a manifest header: {lines[0][:80]}")
        samples, splits = [], {}
        for ln in lines[1:]:
            rec = json.loads(ln)
            s = ClipSample(
                id=rec["id"],
                episode_id=rec["episode_id"],
                span=TimeSpan(rec["start_s"], rec["end_s"]),
                label=rec["label"],
                text=rec["text"],
                audio_ref=rec["audio_ref"],
                laughter_duration_s=rec.get("laughter_duration_s"),
                raw_laughter_duration_s=rec.get("raw_laughter_duration_s"),
            )
            samples.append(s)
            if rec.get("split") is not None:
                splits[s.id] = rec["split"]
        return cls(tuple(samples), splits, BuildConfig.from_dict(header["build_config"]))

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.to_jsonl())

    @classmethod
    def load(cls, path: str | Path) -> CorpusManifest:
        return cls.from_jsonl(Path(path).read_bytes())


def episode_rng(seed: int, episode_id: str) -> np.random.Generator:
    return np.random.default_rng([seed, zlib.crc32(episode_id.encode("utf-8"))])


def _context_text(track: SubtitleTrack, span: TimeSpan, separator: str) -> str:
    cues = [c for c in cues_in_span(track, span) if c.clean_text]
    return join_text(cues, separator)


def _previous_end(episode: EpisodeMedia, laugh: LaughterSegment) -> float:
    prev = [s.end_s for s in episode.laughter if s.end_s <= laugh.start_s and s != laugh]
    return max(prev, default=0.0)


def _laugh_key(episode: EpisodeMedia, laugh: LaughterSegment) -> int:
    return episode.laughter.index(laugh)


def build_positive(
    episode: EpisodeMedia,
    laugh: LaughterSegment,
    config: BuildConfig = BuildConfig(),
) -> ClipSample | None:
    """Context window ending at the laughter onset, or None if unusable."""
    end = laugh.start_s
    start = max(round(end - config.window_s, 6), _previous_end(episode, laugh), 0.0)
    if end - start < config.min_positive_s:
        return None
    span = TimeSpan(start, end)
    text = _context_text(episode.subtitles, span, config.separator)
    if not text:
        return None
    sid = f"{episode.episode_id}-L{_laugh_key(episode, laugh):04d}-pos"
    raw = round(laugh.duration(), 6)
    return ClipSample(
        id=sid,
        episode_id=episode.episode_id,
        span=span,
        label=FUNNY,
        text=text,
        audio_ref=f"clips/{sid}.wav",
        laughter_duration_s=min(raw, config.duration_cap_s),
        raw_laughter_duration_s=raw,
    )


def negative_candidates(
    episode: EpisodeMedia,
    laugh: LaughterSegment,
    prev_laugh_end: float,
    config: BuildConfig = BuildConfig(),
) -> list[TimeSpan]:
    """Full windows tiling the gap before the positive window, nearest first."""
    region_end = laugh.start_s - config.window_s
    out = []
    k = 0
    while True:
        lo = round(region_end - (k + 1) * config.window_s, 6)
        hi = round(region_end - k * config.window_s, 6)
        if lo < prev_laugh_end or lo < 0:
            break
        out.append(TimeSpan(lo, hi))
        k += 1
    return out


def build_negatives(
    episode: EpisodeMedia,
    laugh: LaughterSegment,
    prev_laugh_end: float,
    rng: np.random.Generator,
    config: BuildConfig = BuildConfig(),
) -> list[ClipSample]:
    candidates = negative_candidates(episode, laugh, prev_laugh_end, config)
    key = _laugh_key(episode, laugh)
    usable = []
    for k, span in enumerate(candidates):
        text = _context_text(episode.subtitles, span, config.separator)
        if text:
            usable.append((k, span, text))
    if not usable:
        return []
    n = min(config.negatives_per_positive, len(usable))
    picked = sorted(rng.choice(len(usable), size=n, replace=False).tolist())
    out = []
    for i in sorted(picked, key=lambda i: usable[i][1].start_s):
        k, span, text = usable[i]
        sid = f"{episode.episode_id}-L{key:04d}-neg{k}"
        out.append(
            ClipSample(
                id=sid,
                episode_id=episode.episode_id,
                span=span,
                label=NOT_FUNNY,
                text=text,
                audio_ref=f"clips/{sid}.wav",
            )
        )
    return out


def build_episode(episode: EpisodeMedia, config: BuildConfig = BuildConfig()) -> list[ClipSample]:
    rng = episode_rng(config.seed, episode.episode_id)
    samples: list[ClipSample] = []
    prev_end = 0.0
    for laugh in episode.laughter:
        pos = build_positive(episode, laugh, config)
        # negatives are drawn whether or not the positive survived the text filter
        samples.extend(build_negatives(episode, laugh, prev_end, rng, config))
        if pos is not None:
            samples.append(pos)
        prev_end = laugh.end_s
    samples.sort(key=lambda s: (s.span.start_s, s.id))
    return samples


def build_corpus(episodes: Sequence[EpisodeMedia], config: BuildConfig = BuildConfig()) -> CorpusManifest:
    seen = set()
    for ep in episodes:
        if ep.episode_id in seen:
            raise CorpusError(f"duplicate episode id {ep.episode_id}")
        seen.add(ep.episode_id)
    samples: list[ClipSample] = []
    for ep in sorted(episodes, key=lambda e: _episode_sort_key(e.episode_id)):
        samples.extend(build_episode(ep, config))
    return CorpusManifest(tuple(samples), {}, config)


def _episode_sort_key(episode_id: str) -> tuple:
    parts = episode_id.lower().split("x")
    if len(parts) == 2 and all(p.isdigit() for p in parts):
        return (0, int(parts[0]), int(parts[1]), episode_id)
    return (1, 0, 0, episode_id)


def split_by_episode(
    manifest: CorpusManifest,
    test_episodes: Iterable[str],
    val_fraction: float = 0.1,
    rng: np.random.Generator | None = None,
) -> CorpusManifest:
    """Assign whole episodes to train/val/test."""
    if not 0 <= val_fraction < 1:
        raise CorpusError(f"val_fraction must be in [0, 1), got {val_fraction}")
    rng = rng if rng is not None else np.random.default_rng(manifest.build_config.seed)
    test = set(test_episodes)
    present = manifest.episodes()
    missing = test - set(present)
    if missing:
        raise CorpusError(f"test episodes not in manifest: {sorted(missing)}")

    counts: dict[str, int] = {}
    for s in manifest.samples:
        counts[s.episode_id] = counts.get(s.episode_id, 0) + 1
    remaining = sorted((e for e in present if e not in test), key=_episode_sort_key)
    order = [remaining[i] for i in rng.permutation(len(remaining))]
    target = val_fraction * sum(counts[e] for e in remaining)

    val: set[str] = set()
    n_val = 0
    for ep in order[:-1]:  # the last episode always stays in train
        if n_val >= target:
            break
        val.add(ep)
        n_val += counts[ep]

    assign = {e: ("test" if e in test else "val" if e in val else "train") for e in present}
    if "train" not in assign.values():
        raise CorpusError("split leaves the training set empty")
    splits = {s.id: assign[s.episode_id] for s in manifest.samples}
    return replace(manifest, splits=splits)


def extract_audio(episode: EpisodeMedia, span: TimeSpan) -> np.ndarray:
    """The span's audio as 16 kHz mono, exactly round(duration * 16000) samples."""
    wav = episode.waveform()
    sr = episode.sample_rate
    half_sample = 0.5 / sr
    if span.end_s > len(wav) / sr + half_sample:
        raise CorpusError(
            f"{episode.episode_id}: span [{span.start_s}, {span.end_s}] exceeds audio "
            f"duration {len(wav) / sr:.3f}s"
        )
    n_out = round(span.duration() * audio_io.TARGET_SR)
    i0 = round(span.start_s * sr)
    if sr == audio_io.TARGET_SR:
        out = wav[i0 : i0 + n_out]
    else:
        out = audio_io.resample(wav[i0 : round(span.end_s * sr)], sr)
    if len(out) < n_out:
        out = np.pad(out, (0, n_out - len(out)))
    return out[:n_out]


def write_clips(manifest: CorpusManifest, episodes: Sequence[EpisodeMedia], out_dir: str | Path) -> None:
    out_dir = Path(out_dir)
    by_id = {e.episode_id: e for e in episodes}
    for s in manifest.samples:
        path = out_dir / s.audio_ref
        path.parent.mkdir(parents=True, exist_ok=True)
        audio_io.write_wav(path, extract_audio(by_id[s.episode_id], s.span))


@dataclass(frozen=True)
class CorpusSummary:
    total: int
    funny: int
    not_funny: int
    episodes: int
    by_split: dict[str, dict[str, int]]
    laughter_histogram: DurationHistogram

    def as_dict(self) -> dict:
        d = asdict(self)
        d["laughter_histogram"] = {
            "bins": [list(b) for b in self.laughter_histogram.bins],
            "counts": list(self.laughter_histogram.counts),
            "outside": self.laughter_histogram.outside,
        }
        return d


def summarize(manifest: CorpusManifest) -> CorpusSummary:
    by_split: dict[str, dict[str, int]] = {}
    for s in manifest.samples:
        name = manifest.splits.get(s.id, "unassigned")
        bucket = by_split.setdefault(name, {FUNNY: 0, NOT_FUNNY: 0})
        bucket[s.label] += 1
    funny = [s for s in manifest.samples if s.is_funny]
    return CorpusSummary(
        total=len(manifest.samples),
        funny=len(funny),
        not_funny=len(manifest.samples) - len(funny),
        episodes=len(manifest.episodes()),
        by_split=by_split,
        laughter_histogram=duration_histogram(
            s.raw_laughter_duration_s if s.raw_laughter_duration_s is not None else s.laughter_duration_s
            for s in funny
        ),
    )


def load_episode(
    episode_id: str, media: str | Path, subtitles: str | Path, segments: str | Path
) -> EpisodeMedia:
    track = parse_srt(Path(subtitles).read_bytes(), episode_id)
    laughs = load_segments(Path(segments).read_bytes())
    ep = EpisodeMedia(episode_id, track, laughs, audio_path=Path(media))
    ep.validate()
    return ep


AUDIO_SUFFIXES = (".wav", ".flac", ".ogg", ".mp3")


def discover_episodes(media_dir: str | Path, subs_dir: str | Path, segments_dir: str | Path) -> list[EpisodeMedia]:
    """Pair ``<id>.<audio>``, ``<id>.srt`` and ``<id>.tsv`` files by episode id."""
    media_dir, subs_dir, segments_dir = Path(media_dir), Path(subs_dir), Path(segments_dir)
    media = sorted(p for p in media_dir.iterdir() if p.suffix.lower() in AUDIO_SUFFIXES)
    if not media:
        raise CorpusError(f"no audio files in {media_dir}")
    episodes = []
    for path in media:
        eid = path.stem
        srt = subs_dir / f"{eid}.srt"
        seg = segments_dir / f"{eid}.tsv"
        if not srt.exists():
            raise CorpusError(f"missing subtitles for episode {eid}: {srt}")
        if not seg.exists():
            raise CorpusError(f"missing laughter segments for episode {eid}: {seg}")
        episodes.append(load_episode(eid, path, srt, seg))
    return episodes
