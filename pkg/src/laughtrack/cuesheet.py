"""Laughter cue sheets for episodes without a laugh track.

Each subtitle cue end ``t`` is a candidate insertion point. The clip
[t - window, t) is scored by the humor classifier; candidates at or above the
threshold get a laughter duration from the intensity regressor, and a
refractory rule keeps accepted cues at least ``refractory_s`` apart,
preferring higher confidence.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field

from .corpus import NOT_FUNNY, ClipSample, EpisodeMedia, extract_audio
from .models import INTENSITY_CAP_S, ClipAudio, ModelArtifact, predict_many
from .subtitles import SubtitleCue, TimeSpan, cues_in_span, join_text, serialize_srt

MIN_CONTEXT_S = 1.0  # shorter contexts are dropped when building the corpus too
MIN_DURATION_S = 0.2  # the shortest laughter the segmenter reports


@dataclass(frozen=True)
class CuePolicy:
    threshold: float = 0.5
    refractory_s: float = 3.0
    window_s: float = 10.0
    separator: str = " [SEP] "

    def __post_init__(self) -> None:
        if self.refractory_s < 0 or self.window_s <= 0:
            raise ValueError("refractory_s must be >= 0 and window_s > 0")


@dataclass(frozen=True)
class Cue:
    insert_at_s: float
    duration_s: float
    confidence: float


@dataclass(frozen=True)
class CueSheet:
    episode_id: str
    cues: tuple[Cue, ...]
    warnings: tuple[str, ...] = field(default=(), compare=False)

    def __post_init__(self) -> None:
        times = [c.insert_at_s for c in self.cues]
        if times != sorted(times):
            raise ValueError("cues must be sorted")
        if any(not 0 < c.duration_s <= INTENSITY_CAP_S for c in self.cues):
            raise ValueError(f"cue durations must lie in (0, {INTENSITY_CAP_S}]")

    def to_jsonl(self) -> bytes:
        lines = [
            json.dumps({"insert_at_s": c.insert_at_s, "duration_s": c.duration_s, "confidence": c.confidence})
            for c in self.cues
        ]
        return "".join(ln + "\n" for ln in lines).encode("utf-8")

    def to_srt(self) -> bytes:
        """Annotation track: one subtitle per cue spanning the predicted laughter."""
        return serialize_srt(
            SubtitleCue(
                i + 1,
                TimeSpan(c.insert_at_s, c.insert_at_s + c.duration_s),
                f"[laughter {c.duration_s:.2f} s, p={c.confidence:.2f}]",
            )
            for i, c in enumerate(self.cues)
        )


def candidate_clips(episode: EpisodeMedia, policy: CuePolicy = CuePolicy()) -> list[ClipSample]:
    """Unlabeled context clips ending at each distinct subtitle cue end."""
    out = []
    for t in sorted({c.span.end_s for c in episode.subtitles.cues}):
        span_start = max(0.0, round(t - policy.window_s, 6))
        if t - span_start < MIN_CONTEXT_S:
            continue
        span = TimeSpan(span_start, t)
        text = join_text([c for c in cues_in_span(episode.subtitles, span) if c.clean_text], policy.separator)
        if not text:
            continue
        cid = f"{episode.episode_id}-C{len(out):04d}"
        out.append(ClipSample(cid, episode.episode_id, span, NOT_FUNNY, text, f"clips/{cid}.wav"))
    return out


def apply_refractory(candidates: list[Cue], gap_s: float) -> list[Cue]:
    """Greedy by confidence: keep a cue only if it is ``gap_s`` or more from every kept cue."""
    kept: list[Cue] = []
    for c in sorted(candidates, key=lambda c: (-c.confidence, c.insert_at_s)):
        if all(abs(c.insert_at_s - k.insert_at_s) >= gap_s for k in kept):
            kept.append(c)
    return sorted(kept, key=lambda c: c.insert_at_s)


def generate_cue_sheet(
    episode: EpisodeMedia,
    classifier: ModelArtifact,
    intensity: ModelArtifact,
    policy: CuePolicy = CuePolicy(),
) -> CueSheet:
    if classifier.kind not in ("text_clf", "mm_clf"):
        raise ValueError(f"expected a classifier artifact, got {classifier.kind}")
    if intensity.kind != "intensity_reg":
        raise ValueError(f"expected an intensity artifact, got {intensity.kind}")
    clips = candidate_clips(episode, policy)
    if not clips:
        msg = f"{episode.episode_id}: no subtitle text to place cues on"
        warnings.warn(msg, stacklevel=2)
        return CueSheet(episode.episode_id, (), (msg,))
    audio = ClipAudio(waveforms={c.id: extract_audio(episode, c.span) for c in clips})
    scores = predict_many(classifier, clips, audio)
    chosen = [(c, s.p_funny) for c, s in zip(clips, scores) if s.p_funny >= policy.threshold]
    durations = predict_many(intensity, [c for c, _ in chosen], audio) if chosen else []
    candidates = [
        Cue(c.span.end_s, round(min(max(d, MIN_DURATION_S), INTENSITY_CAP_S), 3), round(p, 6))
        for (c, p), d in zip(chosen, durations)
    ]
    return CueSheet(episode.episode_id, tuple(apply_refractory(candidates, policy.refractory_s)))
