"""The three trainable models: encoders plus a small task head each.

Every model splits into ``encode`` (raw texts and waveforms -> features)
and ``head`` (features -> scores). Training caches ``encode`` output when
the encoders are frozen, so heads only ever see feature tensors.

Feature layouts: a ``"vec"`` feature is a (B, D) tensor, a ``"seq"``
feature is a ``(values, mask)`` pair of shapes (B, T, D) and (B, T).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from ..encoders import AUDIO_EVENT_DIMS, EncoderSpec, load_encoder
from .layers import adaptive_pool, concat, masked_mean, pool2d_to, relu

KINDS = ("text_clf", "mm_clf", "intensity_reg")
INTENSITY_CAP_S = 3.0
POOLED_SIZE = 128
HIDDEN = 64


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class ClassifierOutput:
    scores: tuple[float, float]  # (funny, not_funny)
    probabilities: tuple[float, float]

    @classmethod
    def from_scores(cls, scores) -> ClassifierOutput:
        s = np.asarray(scores, dtype=np.float64)
        p = np.exp(s - s.max())
        p /= p.sum()
        return cls((float(s[0]), float(s[1])), (float(p[0]), float(p[1])))

    @property
    def p_funny(self) -> float:
        return self.probabilities[0]

    @property
    def is_funny(self) -> bool:
        return self.probabilities[0] >= self.probabilities[1]


def _encoder(spec: EncoderSpec, role: str) -> nn.Module:
    if spec.effective_role != role:
        raise ModelError(f"expected a {role} encoder, got {spec.effective_role}")
    # trainable encoders get a private copy so fine-tuning never touches the shared instance
    return load_encoder(spec, fresh=spec.trainable)


def _check_seq(name: str, values: torch.Tensor, mask: torch.Tensor, dims: int | None = None) -> None:
    if values.ndim != 3 or mask.shape != values.shape[:2]:
        raise ModelError(f"{name}: expected (B, T, D) values with a (B, T) mask")
    if dims is not None and values.shape[-1] != dims:
        raise ModelError(f"{name}: expected {dims} dims, got {values.shape[-1]}")
    if not mask.any(dim=1).all():
        raise ModelError(f"{name}: empty sequence")


class _Model(nn.Module):
    kind: str
    layout: tuple[str, ...]
    roles: tuple[str, ...]

    def __init__(self, specs: dict[str, EncoderSpec]):
        super().__init__()
        missing = [r for r in self.roles if r not in specs]
        if missing:
            raise ModelError(f"{self.kind} needs encoders for {missing}")
        self.specs = {r: specs[r] for r in self.roles}
        self.encoders = nn.ModuleDict({r: _encoder(specs[r], r) for r in self.roles})

    @property
    def needs_audio(self) -> bool:
        return len(self.roles) > 1

    @property
    def encoders_frozen(self) -> bool:
        return not any(s.trainable for s in self.specs.values())

    def head(self, *features):
        raise NotImplementedError

    def encode(self, texts: list[str], waveforms: list[np.ndarray] | None = None) -> tuple:
        raise NotImplementedError

    def forward(self, texts: list[str], waveforms: list[np.ndarray] | None = None):
        return self.head(*self.encode(texts, waveforms))

    def _audio(self, waveforms):
        if waveforms is None:
            raise ModelError(f"{self.kind} needs audio")
        return waveforms


class TextClassifier(_Model):
    """Pooled text vector -> dropout -> dense layer with two outputs."""

    kind = "text_clf"
    layout = ("vec",)
    roles = ("text",)

    def __init__(self, specs: dict[str, EncoderSpec], dropout: float = 0.2):
        super().__init__(specs)
        self.dims = specs["text"].output_dims
        self.dropout = nn.Dropout(dropout)
        self.dense = nn.Linear(self.dims, 2)

    def encode(self, texts, waveforms=None):
        pooled, _, _ = self.encoders["text"](texts)
        return (pooled,)

    def head(self, pooled: torch.Tensor) -> torch.Tensor:
        if pooled.shape[-1] != self.dims:
            raise ModelError(f"pooled vector has {pooled.shape[-1]} dims, head expects {self.dims}")
        return self.dense(self.dropout(pooled))


class MultimodalClassifier(_Model):
    """Two-branch classifier.

    Text frames are averaged globally, speech frames are averaged and then
    adaptively pooled to the text width, so both sides contribute equally
    many features to the concatenation.
    """

    kind = "mm_clf"
    layout = ("seq", "seq")
    roles = ("text", "speech")

    def __init__(self, specs: dict[str, EncoderSpec], dropout: float = 0.2):
        super().__init__(specs)
        self.dims = specs["text"].output_dims
        self.dropout = nn.Dropout(dropout)
        self.dense = nn.Linear(2 * self.dims, 2)

    def encode(self, texts, waveforms=None):
        _, seq, mask = self.encoders["text"](texts)
        speech, speech_mask = self.encoders["speech"](self._audio(waveforms))
        return (seq, mask), (speech, speech_mask)

    def fuse(self, text: tuple, speech: tuple) -> torch.Tensor:
        _check_seq("text", *text, dims=self.dims)
        _check_seq("speech", *speech)
        return concat(masked_mean(*text), adaptive_pool(masked_mean(*speech), self.dims))

    def head(self, text: tuple, speech: tuple) -> torch.Tensor:
        return self.dense(self.dropout(self.fuse(text, speech)))


class IntensityRegressor(_Model):
    """Both modalities pooled to 128 -> 256 -> dense 64 -> ReLU -> dropout -> dense 1."""

    kind = "intensity_reg"
    layout = ("seq", "seq")
    roles = ("text", "audio_event")

    def __init__(self, specs: dict[str, EncoderSpec], dropout: float = 0.1):
        super().__init__(specs)
        if specs["audio_event"].output_dims != AUDIO_EVENT_DIMS:
            raise ModelError(f"audio-event features must be {AUDIO_EVENT_DIMS}-d")
        self.hidden = nn.Linear(2 * POOLED_SIZE, HIDDEN)
        self.dropout = nn.Dropout(dropout)
        self.out = nn.Linear(HIDDEN, 1)

    def encode(self, texts, waveforms=None):
        _, seq, mask = self.encoders["text"](texts)
        events, events_mask = self.encoders["audio_event"](self._audio(waveforms))
        return (seq, mask), (events, events_mask)

    def fuse(self, text: tuple, events: tuple) -> torch.Tensor:
        _check_seq("text", *text)
        _check_seq("audio events", *events, dims=AUDIO_EVENT_DIMS)
        return concat(pool2d_to(*text, POOLED_SIZE), pool2d_to(*events, POOLED_SIZE))

    def head(self, text: tuple, events: tuple) -> torch.Tensor:
        h = self.dropout(relu(self.hidden(self.fuse(text, events))))
        y = self.out(h).squeeze(-1)
        # the clamp is an inference-time guard; training sees the raw output
        return y if self.training else y.clamp(0.0, INTENSITY_CAP_S)


MODEL_CLASSES = {cls.kind: cls for cls in (TextClassifier, MultimodalClassifier, IntensityRegressor)}


def build_model(kind: str, specs: dict[str, EncoderSpec], dropout: float) -> _Model:
    if kind not in MODEL_CLASSES:
        raise ModelError(f"unknown model kind {kind!r}; expected one of {KINDS}")
    return MODEL_CLASSES[kind](specs, dropout=dropout)


def count_parameters(model: _Model) -> dict[str, int]:
    """Parameter counts: encoder, head and trainable totals."""
    enc = sum(p.numel() for p in model.encoders.parameters())
    total = sum(p.numel() for p in model.parameters())
    trainable = sum(p.numel() for p in model.parameters() if p.requires_grad)
    return {"encoders": enc, "head": total - enc, "total": total, "trainable": trainable}


def format_count(n: int) -> str:
    if n < 1000:
        return str(n)
    exp = min(int(math.log10(n) // 3), 3)
    return f"{n / 1000 ** exp:.1f}{' KMB'[exp]}"
