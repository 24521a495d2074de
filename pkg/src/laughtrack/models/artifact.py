"""Saved models and the inference surface used by evaluation and cue sheets."""

from __future__ import annotations

import io
import json
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import torch

from .. import audio as audio_io
from ..corpus import ClipSample
from ..encoders import EncoderSpec
from .config import TrainConfig
from .heads import KINDS, ClassifierOutput, ModelError, build_model

ARTIFACT_FORMAT = "laughtrack-model/1"


class ClipAudio:
    """Finds a clip's 16 kHz waveform: in-memory ``waveforms`` first, then ``root / audio_ref``."""

    def __init__(self, root: str | Path | None = None, waveforms: Mapping[str, np.ndarray] | None = None):
        self.root = Path(root) if root is not None else None
        self.waveforms = dict(waveforms or {})

    def __call__(self, sample: ClipSample) -> np.ndarray:
        if sample.id in self.waveforms:
            return np.asarray(self.waveforms[sample.id], dtype=np.float32)
        if self.root is not None:
            path = self.root / sample.audio_ref
            if path.exists():
                wav, sr = audio_io.read_audio(path)
                return audio_io.resample(wav, sr)
        raise ModelError(f"missing audio for clip {sample.id} ({sample.audio_ref})")


@dataclass
class ModelArtifact:
    kind: str
    encoder_specs: dict[str, EncoderSpec]
    train_config: TrainConfig
    weights: dict[str, torch.Tensor]
    metrics: dict = field(default_factory=dict)
    corpus_hash: str | None = None
    heldout: dict[str, list[str]] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ModelError(f"unknown artifact kind {self.kind!r}")
        self._model = None
        self._lock = threading.Lock()

    def meta(self) -> dict:
        return {
            "format": ARTIFACT_FORMAT,
            "kind": self.kind,
            "encoder_specs": {r: s.to_dict() for r, s in sorted(self.encoder_specs.items())},
            "train_config": self.train_config.to_dict(),
            "metrics": self.metrics,
            "corpus_hash": self.corpus_hash,
            "heldout": self.heldout,
        }

    def model(self):
        """The eval-mode model, built once and shared across threads."""
        with self._lock:
            if self._model is None:
                m = build_model(self.kind, self.encoder_specs, self.train_config.dropout)
                _load_weights(m, self.weights)
                m.eval()
                self._model = m
            return self._model

    def save(self, path: str | Path) -> None:
        payload = {"meta": json.dumps(self.meta(), sort_keys=True), "weights": self.weights}
        # via a buffer: torch.save names the archive after the file, which would break byte identity
        buf = io.BytesIO()
        torch.save(payload, buf)
        Path(path).write_bytes(buf.getvalue())

    @classmethod
    def load(cls, path: str | Path) -> ModelArtifact:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
        meta = json.loads(payload["meta"])
        if meta.get("format") != ARTIFACT_FORMAT:
            raise ModelError(f"{path}: not a model artifact")
        return cls(
            kind=meta["kind"],
            encoder_specs={r: EncoderSpec.from_dict(d) for r, d in meta["encoder_specs"].items()},
            train_config=TrainConfig(**meta["train_config"]),
            weights=payload["weights"],
            metrics=meta["metrics"],
            corpus_hash=meta["corpus_hash"],
            heldout=meta["heldout"],
        )


def saved_weights(model) -> dict[str, torch.Tensor]:
    """State dict minus frozen encoders, which are reloaded from their checkpoints."""
    frozen = tuple(f"encoders.{r}." for r, s in model.specs.items() if not s.trainable)
    return {k: v.detach().clone() for k, v in model.state_dict().items() if not k.startswith(frozen)}


def _load_weights(model, weights: Mapping[str, torch.Tensor]) -> None:
    frozen = tuple(f"encoders.{r}." for r, s in model.specs.items() if not s.trainable)
    try:
        result = model.load_state_dict(dict(weights), strict=False)
    except RuntimeError as e:
        raise ModelError(f"weights do not fit a {model.kind} model: {e}") from None
    missing = [k for k in result.missing_keys if not k.startswith(frozen)]
    if missing or result.unexpected_keys:
        raise ModelError(
            f"weights do not fit a {model.kind} model: missing {missing[:5]}, unexpected {result.unexpected_keys[:5]}"
        )


@torch.no_grad()
def predict_many(
    artifact: ModelArtifact,
    clips: Sequence[ClipSample],
    audio: ClipAudio | None = None,
    *,
    kind: str | None = None,
    batch_size: int = 16,
) -> list[ClassifierOutput] | list[float]:
    """Eval-mode predictions: ``ClassifierOutput`` per clip for classifiers, seconds for the regressor."""
    if kind is not None and kind != artifact.kind:
        raise ModelError(f"artifact is a {artifact.kind} model, not {kind}")
    model = artifact.model()
    if model.needs_audio and audio is None:
        raise ModelError(f"{artifact.kind} prediction needs clip audio")
    out = []
    for i in range(0, len(clips), batch_size):
        chunk = clips[i : i + batch_size]
        waves = [audio(c) for c in chunk] if model.needs_audio else None
        y = model([c.text for c in chunk], waves)
        if artifact.kind == "intensity_reg":
            out.extend(float(v) for v in y)
        else:
            out.extend(ClassifierOutput.from_scores(row.numpy()) for row in y)
    return out


def predict(artifact: ModelArtifact, clip: ClipSample, audio: ClipAudio | None = None, *, kind: str | None = None):
    return predict_many(artifact, [clip], audio, kind=kind)[0]
