"""Text, speech and audio-event feature extractors behind one interface.

Every encoder is a ``torch.nn.Module``:

* text encoders map ``list[str]`` to ``(pooled, sequence, mask)``;
* speech encoders and audio-event embedders map ``list[np.ndarray]`` of
  16 kHz mono audio to ``(sequence, mask)``.

``load_encoder`` builds one from an :class:`EncoderSpec`; the module-level
``encode_*`` helpers are single-input conveniences returning numpy.
"""

from __future__ import annotations

import json

import numpy as np
import torch
from torch import nn

from .base import (
    AUDIO_EVENT_DIMS,
    DEFAULT_CHECKPOINTS,
    MIN_EVENT_SAMPLES,
    SAMPLE_RATE,
    EncoderError,
    EncoderSpec,
    FeatureMatrix,
    ModelRegistry,
    check_waveform,
    set_trainable,
)
from .mock import MockAudioEventEmbedder, MockSpeechEncoder, MockTextEncoder, make_mock

__all__ = [
    "AUDIO_EVENT_DIMS",
    "DEFAULT_CHECKPOINTS",
    "MIN_EVENT_SAMPLES",
    "EncoderError",
    "EncoderSpec",
    "FeatureMatrix",
    "ModelRegistry",
    "embed_audio_events",
    "encode_speech",
    "encode_text",
    "load_encoder",
    "make_mock",
    "set_trainable",
]

_cache: dict[str, nn.Module] = {}


def _build(spec: EncoderSpec) -> nn.Module:
    role = spec.effective_role
    if spec.kind == "mock":
        cls = {"text": MockTextEncoder, "speech": MockSpeechEncoder, "audio_event": MockAudioEventEmbedder}[role]
        return cls(spec)
    from . import pretrained

    if role == "text":
        return pretrained.HFTextEncoder(spec)
    if role == "speech":
        return pretrained.HFSpeechEncoder(spec)
    if spec.output_dims != AUDIO_EVENT_DIMS:
        raise EncoderError(f"audio-event embeddings are {AUDIO_EVENT_DIMS}-d")
    return pretrained.VGGishEmbedder(spec)


def load_encoder(spec: EncoderSpec, *, fresh: bool = False) -> nn.Module:
    """Encoder module for ``spec``; shared instances unless ``fresh`` is set.

    Trainers should ask for a fresh instance: a shared one must not be
    fine-tuned by two trainers at once.
    """
    key = json.dumps(spec.to_dict(), sort_keys=True)
    if not fresh and key in _cache:
        return _cache[key]
    enc = _build(spec)
    set_trainable(enc, spec.trainable)
    if not fresh:
        _cache[key] = enc
    return enc


def _require_role(spec: EncoderSpec, role: str) -> None:
    if spec.effective_role != role:
        raise EncoderError(f"spec is a {spec.effective_role} encoder, not {role}")


@torch.no_grad()
def encode_text(spec: EncoderSpec, text: str) -> tuple[np.ndarray, FeatureMatrix]:
    _require_role(spec, "text")
    if not text:
        raise EncoderError("cannot encode empty text")
    enc = load_encoder(spec)
    enc.eval()
    pooled, seq, mask = enc([text])
    return pooled[0].numpy(), FeatureMatrix(seq[0].numpy(), mask[0].numpy())


@torch.no_grad()
def encode_speech(spec: EncoderSpec, waveform: np.ndarray, sample_rate: int = SAMPLE_RATE) -> FeatureMatrix:
    _require_role(spec, "speech")
    w = check_waveform(waveform, sample_rate)
    enc = load_encoder(spec)
    enc.eval()
    seq, mask = enc([w])
    return FeatureMatrix(seq[0].numpy(), mask[0].numpy())


@torch.no_grad()
def embed_audio_events(spec: EncoderSpec, waveform: np.ndarray, sample_rate: int = SAMPLE_RATE) -> FeatureMatrix:
    _require_role(spec, "audio_event")
    w = check_waveform(waveform, sample_rate)
    enc = load_encoder(spec)
    enc.eval()
    seq, mask = enc([w])
    return FeatureMatrix(seq[0].numpy(), mask[0].numpy())
