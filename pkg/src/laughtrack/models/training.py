"""Training loops for the classifiers and the intensity regressor."""

from __future__ import annotations

import copy
import logging
import math
from typing import Sequence

import numpy as np
import torch
import torch.nn.functional as F
from torch.nn.utils.rnn import pad_sequence

from ..corpus import FUNNY, ClipSample, CorpusManifest
from ..encoders import EncoderSpec
from .artifact import ClipAudio, ModelArtifact, saved_weights
from .config import TrainConfig
from .heads import ModelError, build_model

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


def class_index(sample: ClipSample) -> int:
    """Target index matching the (funny, not_funny) score order."""
    return 0 if sample.label == FUNNY else 1


class _Features:
    """Feature batches for a model; encoder output is computed once and cached when encoders are frozen."""

    def __init__(self, model, audio: ClipAudio | None, batch_size: int):
        self.model = model
        self.audio = audio
        self.batch_size = batch_size
        self.cache: dict[str, tuple] | None = {} if model.encoders_frozen else None

    def _raw(self, samples: Sequence[ClipSample]):
        texts = [s.text for s in samples]
        if not self.model.needs_audio:
            return texts, None
        if self.audio is None:
            raise ModelError(f"{self.model.kind} training needs clip audio")
        return texts, [self.audio(s) for s in samples]

    @torch.no_grad()
    def _fill(self, samples: Sequence[ClipSample]) -> None:
        todo = [s for s in samples if s.id not in self.cache]
        self.model.encoders.eval()
        for i in range(0, len(todo), self.batch_size):
            chunk = todo[i : i + self.batch_size]
            feats = self.model.encode(*self._raw(chunk))
            for j, s in enumerate(chunk):
                self.cache[s.id] = tuple(_take(kind, f, j) for kind, f in zip(self.model.layout, feats))

    def __call__(self, samples: Sequence[ClipSample]) -> tuple:
        if self.cache is None:
            return self.model.encode(*self._raw(samples))
        self._fill(samples)
        rows = [self.cache[s.id] for s in samples]
        return tuple(_collate(kind, [r[k] for r in rows]) for k, kind in enumerate(self.model.layout))


def _take(kind: str, feature, j: int):
    if kind == "vec":
        return feature[j]
    values, mask = feature
    return values[j][mask[j]]


def _collate(kind: str, items: list[torch.Tensor]):
    if kind == "vec":
        return torch.stack(items)
    values = pad_sequence(items, batch_first=True)
    lengths = torch.tensor([len(x) for x in items])
    return values, torch.arange(values.shape[1])[None, :] < lengths[:, None]


def _outputs(model, feats: _Features, samples: Sequence[ClipSample], batch_size: int) -> torch.Tensor:
    model.eval()
    with torch.no_grad():
        return torch.cat([model.head(*feats(samples[i : i + batch_size])) for i in range(0, len(samples), batch_size)])


def _check_finite(loss: torch.Tensor, epoch: int, step: int, batch: Sequence[ClipSample], config: TrainConfig):
    if not torch.isfinite(loss):
        ids = ", ".join(s.id for s in batch[:4])
        raise TrainingError(
            f"non-finite loss {loss.item()} at epoch {epoch} step {step} "
            f"(lr={config.learning_rate}, batch starts with {ids})"
        )


def _fit(model, feats, train, targets, loss_fn, config, val_loss_fn, early_stopping: bool):
    """Shared optimization loop; returns the per-epoch history."""
    params = [p for p in model.parameters() if p.requires_grad]
    opt = torch.optim.Adam(params, lr=config.learning_rate)
    order_gen = torch.Generator().manual_seed(config.seed)
    history, first_epoch_losses = [], []
    best, best_state, wait = math.inf, None, 0
    for epoch in range(1, config.epochs + 1):
        model.train()
        perm = torch.randperm(len(train), generator=order_gen).tolist()
        total = 0.0
        for step, start in enumerate(range(0, len(perm), config.batch_size)):
            idx = perm[start : start + config.batch_size]
            batch = [train[i] for i in idx]
            loss = loss_fn(model.head(*feats(batch)), targets[idx])
            _check_finite(loss, epoch, step, batch, config)
            opt.zero_grad()
            loss.backward()
            opt.step()
            total += loss.item() * len(idx)
            if epoch == 1:
                first_epoch_losses.append(loss.item())
        val_loss = val_loss_fn()
        history.append({"epoch": epoch, "train_loss": total / len(train), "val_loss": val_loss})
        log.info("epoch %d train_loss %.4f val_loss %.4f", epoch, total / len(train), val_loss)
        if not early_stopping:
            continue
        if val_loss < best - config.min_delta:
            best, best_state, wait = val_loss, copy.deepcopy(model.state_dict()), 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                break
    if early_stopping and best_state is not None:
        model.load_state_dict(best_state)
    return history, first_epoch_losses


def _require(samples: Sequence[ClipSample], name: str) -> None:
    if not samples:
        raise ModelError(f"empty {name} split")


def train_classifier(
    manifest: CorpusManifest,
    encoders: dict[str, EncoderSpec],
    config: TrainConfig = TrainConfig(),
    *,
    multimodal: bool = False,
    audio: ClipAudio | None = None,
) -> ModelArtifact:
    """Cross-entropy training with Adam for exactly ``config.epochs`` epochs on the train split."""
    train, val = manifest.in_split("train"), manifest.in_split("val")
    _require(train, "train")
    _require(val, "val")
    kind = "mm_clf" if multimodal else "text_clf"
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = build_model(kind, encoders, config.dropout)
        feats = _Features(model, audio, config.batch_size)
        y_train = torch.tensor([class_index(s) for s in train])
        y_val = torch.tensor([class_index(s) for s in val])

        def val_loss():
            return F.cross_entropy(_outputs(model, feats, val, config.batch_size), y_val).item()

        history, first = _fit(model, feats, train, y_train, F.cross_entropy, config, val_loss, early_stopping=False)
        train_acc = (_outputs(model, feats, train, config.batch_size).argmax(1) == y_train).float().mean().item()
        val_scores = _outputs(model, feats, val, config.batch_size)
    metrics = {
        "train_accuracy": train_acc,
        "val_accuracy": (val_scores.argmax(1) == y_val).float().mean().item(),
        "val_loss": F.cross_entropy(val_scores, y_val).item(),
        "history": history,
        "first_epoch_batch_losses": first,
    }
    return ModelArtifact(kind, model.specs, config, saved_weights(model), metrics, manifest.config_hash())


def intensity_split(samples: Sequence[ClipSample], seed: int) -> dict[str, list[ClipSample]]:
    """Seeded random 80/10/10 split of the funny clips."""
    funny = sorted((s for s in samples if s.label == FUNNY), key=lambda s: s.id)
    n = len(funny)
    n_val = n_test = max(1, round(0.1 * n))
    if n - n_val - n_test < 1:
        raise ModelError(f"intensity training needs at least 3 funny clips, got {n}")
    perm = np.random.default_rng(seed).permutation(n)
    picked = [funny[i] for i in perm]
    return {"test": picked[:n_test], "val": picked[n_test : n_test + n_val], "train": picked[n_test + n_val :]}


def train_intensity(
    manifest: CorpusManifest,
    encoders: dict[str, EncoderSpec],
    config: TrainConfig | None = None,
    *,
    audio: ClipAudio | None = None,
) -> ModelArtifact:
    """MSE regression of the capped laughter duration with early stopping on validation loss."""
    config = config or TrainConfig.for_kind("intensity_reg")
    frozen = {r: s if not s.trainable else _frozen(s) for r, s in encoders.items()}
    parts = intensity_split(manifest.samples, config.seed)
    train, val = parts["train"], parts["val"]
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = build_model("intensity_reg", frozen, config.dropout)
        feats = _Features(model, audio, config.batch_size)
        y_train = torch.tensor([s.laughter_duration_s for s in train], dtype=torch.float32)
        y_val = torch.tensor([s.laughter_duration_s for s in val], dtype=torch.float32)
        # start from the mean duration; at lr 1e-4 the weights alone take hundreds of epochs to learn the offset
        with torch.no_grad():
            model.out.bias.fill_(y_train.mean().item())

        def val_loss():
            return F.mse_loss(_outputs(model, feats, val, config.batch_size), y_val).item()

        history, _ = _fit(model, feats, train, y_train, F.mse_loss, config, val_loss, early_stopping=True)
        pred_val = _outputs(model, feats, val, config.batch_size)
    best_epoch = min(history, key=lambda h: h["val_loss"])["epoch"]
    metrics = {
        "val_mae": (pred_val - y_val).abs().mean().item(),
        "val_loss": F.mse_loss(pred_val, y_val).item(),
        "epochs_run": len(history),
        "best_epoch": best_epoch,
        "stopped_early": len(history) < config.epochs,
        "history": history,
    }
    heldout = {k: [s.id for s in v] for k, v in parts.items()}
    return ModelArtifact("intensity_reg", model.specs, config, saved_weights(model), metrics, manifest.config_hash(), heldout)


def _frozen(spec: EncoderSpec) -> EncoderSpec:
    d = spec.to_dict()
    d["trainable"] = False
    return EncoderSpec.from_dict(d)
