"""Wrappers around pretrained checkpoints (transformers text/speech models, VGGish)."""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
from torch import nn

from .base import (
    EXAMPLE_FRAMES,
    MIN_EVENT_SAMPLES,
    SAMPLE_RATE,
    STFT_HOP,
    STFT_WINDOW,
    EncoderError,
    EncoderSpec,
)


def _transformers():
    try:
        import transformers
    except ImportError:
        raise EncoderError("pretrained text/speech encoders need the 'transformers' package") from None
    return transformers


class HFTextEncoder(nn.Module):
    """Pretrained text model; pooled output is the pooler applied to the first token."""

    def __init__(self, spec: EncoderSpec, model=None, tokenizer=None):
        super().__init__()
        tf = _transformers()
        self.spec = spec
        self.max_tokens = spec.max_tokens
        self.tokenizer = tokenizer or tf.AutoTokenizer.from_pretrained(spec.checkpoint_id)
        self.model = model or tf.AutoModel.from_pretrained(spec.checkpoint_id)
        hidden = self.model.config.hidden_size
        if hidden != spec.output_dims:
            raise EncoderError(f"{spec.checkpoint_id} has hidden size {hidden}, spec says {spec.output_dims}")

    def forward(self, texts: list[str]):
        if any(not t for t in texts):
            raise EncoderError("cannot encode empty text")
        batch = self.tokenizer(
            list(texts),
            padding="max_length",
            truncation=True,
            max_length=self.max_tokens,
            return_tensors="pt",
        )
        out = self.model(**batch)
        seq = out.last_hidden_state
        pooled = getattr(out, "pooler_output", None)
        if pooled is None:
            pooled = seq[:, 0]
        return pooled, seq, batch["attention_mask"].bool()


class HFSpeechEncoder(nn.Module):
    def __init__(self, spec: EncoderSpec, model=None, feature_extractor=None, max_seconds: float = 10.0):
        super().__init__()
        tf = _transformers()
        self.spec = spec
        self.max_samples = int(max_seconds * SAMPLE_RATE)
        self.feature_extractor = feature_extractor or tf.AutoFeatureExtractor.from_pretrained(spec.checkpoint_id)
        self.model = model or tf.AutoModel.from_pretrained(spec.checkpoint_id)
        hidden = self.model.config.hidden_size
        if hidden != spec.output_dims:
            raise EncoderError(f"{spec.checkpoint_id} has hidden size {hidden}, spec says {spec.output_dims}")

    def forward(self, waveforms: list[np.ndarray]):
        clipped = [np.asarray(w, dtype=np.float32)[: self.max_samples] for w in waveforms]
        if any(w.size == 0 for w in clipped):
            raise EncoderError("empty waveform")
        batch = self.feature_extractor(
            clipped, sampling_rate=SAMPLE_RATE, padding=True, return_tensors="pt", return_attention_mask=True
        )
        out = self.model(batch["input_values"], attention_mask=batch.get("attention_mask"))
        seq = out.last_hidden_state
        lengths = torch.tensor([len(w) for w in clipped])
        frame_lengths = self.model._get_feat_extract_output_lengths(lengths)
        mask = torch.arange(seq.shape[1])[None, :] < frame_lengths[:, None]
        return seq, mask


# ---- VGGish ---------------------------------------------------------------

_MEL_BINS = 64
_LOG_OFFSET = 0.01


def _hz_to_mel(hz):
    return 1127.0 * np.log(1.0 + np.asarray(hz) / 700.0)


def mel_matrix(
    n_spectrogram_bins: int = 257,
    n_mel: int = _MEL_BINS,
    sample_rate: int = SAMPLE_RATE,
    lower_hz: float = 125.0,
    upper_hz: float = 7500.0,
) -> np.ndarray:
    bins_mel = _hz_to_mel(np.linspace(0.0, sample_rate / 2.0, n_spectrogram_bins))
    edges = np.linspace(_hz_to_mel(lower_hz), _hz_to_mel(upper_hz), n_mel + 2)
    w = np.empty((n_spectrogram_bins, n_mel))
    for i in range(n_mel):
        lo, mid, hi = edges[i : i + 3]
        w[:, i] = np.maximum(0.0, np.minimum((bins_mel - lo) / (mid - lo), (hi - bins_mel) / (hi - mid)))
    w[0, :] = 0.0
    return w


def log_mel_examples(waveform: np.ndarray) -> np.ndarray:
    """16 kHz waveform -> (n_examples, 96, 64) log-mel patches, 0.96 s each."""
    w = np.asarray(waveform, dtype=np.float64)
    if len(w) < MIN_EVENT_SAMPLES:
        raise EncoderError(
            f"audio-event embedding needs at least {MIN_EVENT_SAMPLES / SAMPLE_RATE:.4f} s "
            f"({MIN_EVENT_SAMPLES} samples), got {len(w)}"
        )
    n_frames = 1 + (len(w) - STFT_WINDOW) // STFT_HOP
    idx = np.arange(n_frames)[:, None] * STFT_HOP + np.arange(STFT_WINDOW)[None, :]
    window = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(STFT_WINDOW) / STFT_WINDOW)
    spec = np.abs(np.fft.rfft(w[idx] * window, n=512))
    log_mel = np.log(spec @ mel_matrix() + _LOG_OFFSET)
    n_ex = 1 + (n_frames - EXAMPLE_FRAMES) // EXAMPLE_FRAMES
    return np.stack([log_mel[i * EXAMPLE_FRAMES : (i + 1) * EXAMPLE_FRAMES] for i in range(n_ex)]).astype(np.float32)


class VGGish(nn.Module):
    """VGG-style log-mel CNN producing a 128-d embedding per 0.96 s example.

    Layer names match the published torch port so its state dict loads as is.
    Its PCA/quantization post-processing is not applied.
    """

    def __init__(self):
        super().__init__()
        cfg = [64, "M", 128, "M", 256, 256, "M", 512, 512, "M"]
        layers, c = [], 1
        for v in cfg:
            if v == "M":
                layers.append(nn.MaxPool2d(2, 2))
            else:
                layers += [nn.Conv2d(c, v, 3, padding=1), nn.ReLU(inplace=True)]
                c = v
        self.features = nn.Sequential(*layers)
        self.embeddings = nn.Sequential(
            nn.Linear(512 * 4 * 6, 4096),
            nn.ReLU(True),
            nn.Linear(4096, 4096),
            nn.ReLU(True),
            nn.Linear(4096, 128),
            nn.ReLU(True),
        )

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        x = self.features(x)
        x = x.transpose(1, 3).transpose(1, 2).contiguous()
        return self.embeddings(x.view(x.size(0), -1))


class VGGishEmbedder(nn.Module):
    def __init__(self, spec: EncoderSpec, network: VGGish | None = None):
        super().__init__()
        self.spec = spec
        if network is None:
            network = VGGish()
            network.load_state_dict(_load_state_dict(spec.checkpoint_id))
        self.network = network

    def forward(self, waveforms: list[np.ndarray]):
        per_clip = [log_mel_examples(w) for w in waveforms]
        counts = [p.shape[0] for p in per_clip]
        flat = torch.from_numpy(np.concatenate(per_clip))[:, None]
        emb = self.network(flat)
        t = max(counts)
        seq = emb.new_zeros((len(waveforms), t, emb.shape[-1]))
        mask = torch.zeros((len(waveforms), t), dtype=torch.bool)
        offset = 0
        for i, n in enumerate(counts):
            seq[i, :n] = emb[offset : offset + n]
            mask[i, :n] = True
            offset += n
        return seq, mask


def _load_state_dict(checkpoint_id: str):
    if Path(checkpoint_id).exists():
        return torch.load(checkpoint_id, map_location="cpu")
    if checkpoint_id.startswith(("http://", "https://")):
        return torch.hub.load_state_dict_from_url(checkpoint_id, map_location="cpu", progress=False)
    raise EncoderError(f"cannot resolve audio-event checkpoint {checkpoint_id!r}")
