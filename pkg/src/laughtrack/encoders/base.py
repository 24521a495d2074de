from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Literal, Mapping

import numpy as np
import torch
from torch import nn

EncoderKind = Literal["text", "speech", "audio_event", "mock"]
ROLES = ("text", "speech", "audio_event")
SAMPLE_RATE = 16_000
AUDIO_EVENT_DIMS = 128

# log-mel framing shared by the audio-event embedder and its mock
STFT_WINDOW = 400
STFT_HOP = 160
EXAMPLE_FRAMES = 96
MIN_EVENT_SAMPLES = STFT_WINDOW + (EXAMPLE_FRAMES - 1) * STFT_HOP


class EncoderError(ValueError):
    pass


@dataclass(frozen=True)
class FeatureMatrix:
    values: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise ValueError("feature matrix must be frames x dims")
        if self.mask.shape != (self.values.shape[0],):
            raise ValueError("mask length must equal the frame count")
        if not np.isfinite(self.values).all():
            raise ValueError("non-finite encoder output")

    @property
    def frames(self) -> int:
        return self.values.shape[0]

    @property
    def dims(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class EncoderSpec:
    kind: EncoderKind
    checkpoint_id: str
    output_dims: int
    max_tokens: int = 128
    role: str | None = None
    trainable: bool = True
    options: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.output_dims <= 0:
            raise ValueError("output_dims must be positive")
        if self.kind == "mock" and self.role not in ROLES:
            raise ValueError(f"mock encoders need a role in {ROLES}")
        if self.kind != "mock" and self.role not in (None, self.kind):
            raise ValueError(f"role {self.role} does not match kind {self.kind}")

    @property
    def effective_role(self) -> str:
        return self.role if self.kind == "mock" else self.kind

    def to_dict(self) -> dict:
        d = asdict(self)
        d["options"] = dict(self.options)
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> EncoderSpec:
        return cls(**d)


def check_waveform(waveform: np.ndarray, sample_rate: int) -> np.ndarray:
    if sample_rate != SAMPLE_RATE:
        raise EncoderError(f"expected {SAMPLE_RATE} Hz audio, got {sample_rate} Hz; resample first")
    w = np.asarray(waveform, dtype=np.float32)
    if w.ndim != 1:
        raise EncoderError("expected a mono waveform")
    if w.size == 0:
        raise EncoderError("empty waveform")
    return w


def set_trainable(module: nn.Module, trainable: bool) -> None:
    for p in module.parameters():
        p.requires_grad_(trainable)


def pad_sequences(seqs: list[np.ndarray], dims: int) -> tuple[torch.Tensor, torch.Tensor]:
    """Stack variable-length (frames, dims) arrays into a padded batch and mask."""
    t = max(s.shape[0] for s in seqs)
    out = np.zeros((len(seqs), t, dims), dtype=np.float32)
    mask = np.zeros((len(seqs), t), dtype=bool)
    for i, s in enumerate(seqs):
        out[i, : s.shape[0]] = s
        mask[i, : s.shape[0]] = True
    return torch.from_numpy(out), torch.from_numpy(mask)


DEFAULT_CHECKPOINTS = {
    "text": "bert-base-uncased",
    "speech": "facebook/hubert-xlarge-ls960-ft",
    "audio_event": "https://github.com/harritaylor/torchvggish/releases/download/v0.1/vggish-10086976.pth",
}
DEFAULT_DIMS = {"text": 768, "speech": 1280, "audio_event": AUDIO_EVENT_DIMS}


class ModelRegistry:
    """Resolves encoder kinds to checkpoint ids.

    Lookup order: ``LAUGHTRACK_<KIND>_CHECKPOINT`` environment variable, the
    JSON config file, then the built-in defaults.
    """

    def __init__(self, mapping: Mapping[str, str] | None = None):
        self.mapping = dict(DEFAULT_CHECKPOINTS)
        if mapping:
            unknown = set(mapping) - set(ROLES)
            if unknown:
                raise EncoderError(f"unknown encoder kinds in registry: {sorted(unknown)}")
            self.mapping.update(mapping)

    @classmethod
    def from_file(cls, path: str | Path) -> ModelRegistry:
        return cls(json.loads(Path(path).read_text()))

    def checkpoint(self, kind: str) -> str:
        env = os.environ.get(f"LAUGHTRACK_{kind.upper()}_CHECKPOINT")
        return env or self.mapping[kind]

    def spec(self, kind: str, *, output_dims: int | None = None, max_tokens: int = 128, trainable: bool = True) -> EncoderSpec:
        return EncoderSpec(
            kind=kind,
            checkpoint_id=self.checkpoint(kind),
            output_dims=output_dims or DEFAULT_DIMS[kind],
            max_tokens=max_tokens,
            trainable=trainable,
        )
