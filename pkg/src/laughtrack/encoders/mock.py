"""Checkpoint-free stand-ins for the pretrained encoders.

Outputs are pure functions of (seed, input content): token vectors and audio
frame noise are drawn from generators seeded by a hash of the content. A
planted-signal mode adds ``gain * (marker - center)`` to every valid frame,
where ``marker`` is 1/0 for presence of a marker token (text) or the measured
amplitude of a marker tone (audio). That makes synthetic corpora separable by
construction.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache

import numpy as np
import torch
from torch import nn

from .base import (
    AUDIO_EVENT_DIMS,
    EXAMPLE_FRAMES,
    MIN_EVENT_SAMPLES,
    SAMPLE_RATE,
    STFT_HOP,
    STFT_WINDOW,
    EncoderError,
    EncoderSpec,
    pad_sequences,
)

TOKEN_RE = re.compile(r"\[SEP\]|\w+|[^\w\s]")
SPEECH_WINDOW = 400
SPEECH_HOP = 320
EXAMPLE_HOP_SAMPLES = EXAMPLE_FRAMES * STFT_HOP


def content_seed(*parts) -> int:
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        h.update(p if isinstance(p, bytes) else str(p).encode("utf-8"))
        h.update(b"\x00")
    return int.from_bytes(h.digest(), "little")


def tokenize(text: str) -> list[str]:
    return [t if t == "[SEP]" else t.lower() for t in TOKEN_RE.findall(text)]


def tone_amplitude(frames: np.ndarray, hz: float) -> np.ndarray:
    """Amplitude of a sinusoid at ``hz`` in each row of ``frames``."""
    n = frames.shape[1]
    basis = np.exp(-2j * np.pi * hz * np.arange(n) / SAMPLE_RATE)
    return 2.0 * np.abs(frames.astype(np.float64) @ basis) / n


class _MockBase(nn.Module):
    def __init__(self, spec: EncoderSpec):
        super().__init__()
        opts = dict(spec.options)
        self.spec = spec
        self.dims = spec.output_dims
        self.seed = int(opts.get("seed", 0))
        self.gain = float(opts.get("gain", 0.0))
        self.center = float(opts.get("center", 0.0))
        self.noise_scale = float(opts.get("noise_scale", 1.0))

    def _noise(self, key: int, shape) -> np.ndarray:
        return (np.random.default_rng(key).standard_normal(shape) * self.noise_scale).astype(np.float32)

    def _shift(self, marker):
        return self.gain * (marker - self.center) if self.gain else 0.0


class MockTextEncoder(_MockBase):
    """Bag-of-hashed-tokens encoder; the first position holds the mean of the rest."""

    def __init__(self, spec: EncoderSpec):
        super().__init__(spec)
        self.max_tokens = spec.max_tokens
        self.marker = str(spec.options.get("marker", "zinger")).lower()
        if self.max_tokens < 3:
            raise EncoderError("max_tokens must leave room for the boundary tokens")
        self._vec = lru_cache(maxsize=65536)(self._token_vector)

    def _token_vector(self, token: str) -> np.ndarray:
        return self._noise(content_seed("text", self.seed, token), self.dims)

    def encode_one(self, text: str) -> tuple[np.ndarray, np.ndarray]:
        tokens = tokenize(text)
        if not tokens:
            raise EncoderError("cannot encode empty text")
        body = ["[CLS]"] + tokens[: self.max_tokens - 2] + ["[SEP]"]
        seq = np.zeros((self.max_tokens, self.dims), dtype=np.float32)
        for i, tok in enumerate(body[1:], start=1):
            seq[i] = self._vec(tok)
        n = len(body)
        seq[0] = seq[1:n].mean(axis=0)
        seq[:n] += np.float32(self._shift(float(self.marker in tokens)))
        mask = np.zeros(self.max_tokens, dtype=bool)
        mask[:n] = True
        return seq, mask

    def forward(self, texts: list[str]):
        seqs, masks = zip(*(self.encode_one(t) for t in texts))
        seq = torch.from_numpy(np.stack(seqs))
        return seq[:, 0], seq, torch.from_numpy(np.stack(masks))


class _MockAudio(_MockBase):
    window: int
    hop: int

    def __init__(self, spec: EncoderSpec):
        super().__init__(spec)
        self.marker_hz = float(spec.options.get("marker_hz", 1000.0))

    def n_frames(self, n_samples: int) -> int:
        raise NotImplementedError

    def encode_one(self, waveform: np.ndarray) -> np.ndarray:
        w = np.asarray(waveform, dtype=np.float32)
        n = self.n_frames(len(w))
        padded = np.pad(w, (0, max(0, (n - 1) * self.hop + self.window - len(w))))
        idx = np.arange(n)[:, None] * self.hop + np.arange(self.window)[None, :]
        frames = padded[idx]
        feats = self._noise(content_seed(type(self).__name__, self.seed, w.tobytes()), (n, self.dims))
        if self.gain:
            feats += self._shift(tone_amplitude(frames, self.marker_hz))[:, None].astype(np.float32)
        return feats

    def forward(self, waveforms: list[np.ndarray]):
        return pad_sequences([self.encode_one(w) for w in waveforms], self.dims)


class MockSpeechEncoder(_MockAudio):
    """One frame per 20 ms hop with a 25 ms window."""

    window = SPEECH_WINDOW
    hop = SPEECH_HOP

    def n_frames(self, n_samples: int) -> int:
        if n_samples <= 0:
            raise EncoderError("empty waveform")
        return max(1, 1 + (n_samples - self.window) // self.hop)


class MockAudioEventEmbedder(_MockAudio):
    """128-d vector per 0.96 s example, same framing as the log-mel embedder."""

    window = MIN_EVENT_SAMPLES
    hop = EXAMPLE_HOP_SAMPLES

    def __init__(self, spec: EncoderSpec):
        super().__init__(spec)
        if self.dims != AUDIO_EVENT_DIMS:
            raise EncoderError(f"audio-event embeddings are {AUDIO_EVENT_DIMS}-d, got {self.dims}")

    def n_frames(self, n_samples: int) -> int:
        if n_samples < MIN_EVENT_SAMPLES:
            raise EncoderError(
                f"audio-event embedding needs at least {MIN_EVENT_SAMPLES / SAMPLE_RATE:.4f} s "
                f"({MIN_EVENT_SAMPLES} samples), got {n_samples}"
            )
        stft_frames = 1 + (n_samples - STFT_WINDOW) // STFT_HOP
        return 1 + (stft_frames - EXAMPLE_FRAMES) // EXAMPLE_FRAMES


def make_mock(kind: str, output_dims: int, seed: int = 0, **options) -> EncoderSpec:
    """Spec for a deterministic mock encoder standing in for ``kind``.

    Planted-signal options: ``gain``, ``center``, ``marker`` (text token) or
    ``marker_hz`` (audio tone), plus ``noise_scale``.
    """
    max_tokens = int(options.pop("max_tokens", 128))
    return EncoderSpec(
        kind="mock",
        checkpoint_id=f"mock:{kind}:{seed}",
        output_dims=output_dims,
        max_tokens=max_tokens,
        role=kind,
        trainable=False,
        options={"seed": seed, **options},
    )
