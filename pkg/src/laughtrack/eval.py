"""Classification and regression metrics, baselines, and report tables."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .corpus import FUNNY, NOT_FUNNY, CorpusManifest

CLASS_NAMES = {FUNNY: "Funny", NOT_FUNNY: "Not funny"}
REPORT_FORMAT = "laughtrack-report/1"


class MetricWarning(UserWarning):
    """A score was undefined (zero denominator) and reported as 0."""


def _is_funny(label) -> bool:
    if isinstance(label, str):
        if label not in (FUNNY, NOT_FUNNY):
            raise ValueError(f"unknown label {label!r}")
        return label == FUNNY
    if label not in (0, 1):
        raise ValueError(f"labels must be binary, got {label!r}")
    return bool(label)


@dataclass(frozen=True)
class ConfusionMatrix:
    """Counts with funny as the positive class."""

    tp: int
    fp: int
    fn: int
    tn: int

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be non-negative")

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn

    @classmethod
    def from_labels(cls, y_true: Sequence, y_pred: Sequence) -> ConfusionMatrix:
        if len(y_true) != len(y_pred):
            raise ValueError(f"length mismatch: {len(y_true)} labels, {len(y_pred)} predictions")
        if not len(y_true):
            raise ValueError("no labels to score")
        t = np.array([_is_funny(y) for y in y_true])
        p = np.array([_is_funny(y) for y in y_pred])
        return cls(int((t & p).sum()), int((~t & p).sum()), int((t & ~p).sum()), int((~t & ~p).sum()))

    def swapped(self) -> ConfusionMatrix:
        """The same predictions scored with not-funny as the positive class."""
        return ConfusionMatrix(self.tn, self.fn, self.fp, self.tp)


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class Metrics:
    funny: ClassMetrics
    not_funny: ClassMetrics
    accuracy: float
    confusion: ConfusionMatrix | None = None
    accuracy_std: float | None = None  # set for baselines averaged over several draws

    @property
    def support(self) -> int:
        return self.funny.support + self.not_funny.support

    def as_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: Mapping) -> Metrics:
        cm = d.get("confusion")
        return cls(
            funny=ClassMetrics(**d["funny"]),
            not_funny=ClassMetrics(**d["not_funny"]),
            accuracy=d["accuracy"],
            confusion=ConfusionMatrix(**cm) if cm else None,
            accuracy_std=d.get("accuracy_std"),
        )


@dataclass(frozen=True)
class RegressionMetrics:
    mae_s: float
    n: int

    def as_dict(self) -> dict:
        return asdict(self)


def _ratio(num: int, den: int, what: str) -> float:
    if den == 0:
        warnings.warn(f"{what} is undefined (no samples in the denominator); reporting 0", MetricWarning, stacklevel=3)
        return 0.0
    return num / den


def _class_metrics(tp: int, fp: int, fn: int, name: str) -> ClassMetrics:
    p = _ratio(tp, tp + fp, f"{name} precision")
    r = _ratio(tp, tp + fn, f"{name} recall")
    f1 = 2 * p * r / (p + r) if p + r > 0 else 0.0
    return ClassMetrics(p, r, f1, tp + fn)


def metrics_from_confusion(cm: ConfusionMatrix) -> Metrics:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    s = cm.swapped()
    return Metrics(
        funny=_class_metrics(cm.tp, cm.fp, cm.fn, "funny"),
        not_funny=_class_metrics(s.tp, s.fp, s.fn, "not-funny"),
        accuracy=(cm.tp + cm.tn) / cm.total,
        confusion=cm,
    )


def classification_metrics(y_true: Sequence, y_pred: Sequence) -> Metrics:
    """Per-class precision/recall/F1 and accuracy; labels are class names or 1 (funny) / 0."""
    return metrics_from_confusion(ConfusionMatrix.from_labels(y_true, y_pred))


def regression_mae(y_true: Sequence[float], y_pred: Sequence[float]) -> float:
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} targets, {len(y_pred)} predictions")
    if not len(y_true):
        raise ValueError("no targets to score")
    return math.fsum(abs(float(t) - float(p)) for t, p in zip(y_true, y_pred)) / len(y_true)


@dataclass(frozen=True)
class Baselines:
    random: Metrics  # per-field means over the draws, accuracy_std set
    majority: Metrics
    majority_label: str
    seed: int
    draws: int


def _mean_metrics(runs: list[Metrics]) -> Metrics:
    def mean_class(attr):
        cs = [getattr(m, attr) for m in runs]
        return ClassMetrics(
            float(np.mean([c.precision for c in cs])),
            float(np.mean([c.recall for c in cs])),
            float(np.mean([c.f1 for c in cs])),
            cs[0].support,
        )

    acc = np.array([m.accuracy for m in runs])
    return Metrics(mean_class("funny"), mean_class("not_funny"), float(acc.mean()), None, float(acc.std()))


def baselines(manifest: CorpusManifest, seed: int = 0, draws: int = 100) -> Baselines:
    """Uniform random labels (averaged over ``draws`` seeded draws) and the majority training label, on the test split."""
    train, test = manifest.in_split("train"), manifest.in_split("test")
    if not train or not test:
        raise ValueError("baselines need non-empty train and test splits")
    n_funny = sum(s.is_funny for s in train)
    # ties go to not funny, the larger class of the reference corpus
    majority = FUNNY if n_funny > len(train) - n_funny else NOT_FUNNY
    truth = [s.label for s in test]
    rng = np.random.default_rng(seed)
    labels = np.array([FUNNY, NOT_FUNNY])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        runs = [classification_metrics(truth, list(labels[rng.integers(0, 2, len(truth))])) for _ in range(draws)]
        maj = classification_metrics(truth, [majority] * len(truth))
    return Baselines(_mean_metrics(runs), maj, majority, seed, draws)


# ---- reports ----------------------------------------------------------------


@dataclass(frozen=True)
class Report:
    text: str
    record: dict

    def to_json(self) -> str:
        return json.dumps(self.record, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def record_from_json(data: str) -> dict:
        rec = json.loads(data)
        if rec.get("format") != REPORT_FORMAT:
            raise ValueError("not a report record")
        return rec


def _table(name: str, m: Metrics) -> list[str]:
    lines = [name, f"  {'':<10} {'Precision':>9} {'Recall':>7} {'F1':>6} {'N':>6}"]
    for label, c in ((FUNNY, m.funny), (NOT_FUNNY, m.not_funny)):
        lines.append(f"  {CLASS_NAMES[label]:<10} {c.precision:>9.2f} {c.recall:>7.2f} {c.f1:>6.2f} {c.support:>6d}")
    acc = f"{m.accuracy:.2f}"
    if m.accuracy_std is not None:
        acc += f" (sd {m.accuracy_std:.3f})"
    lines.append(f"  {'Accuracy':<10} {acc:>25} {m.support:>6d}")
    return lines


def report(results: Mapping[str, Metrics | RegressionMetrics], **extra) -> Report:
    """Render named results as per-class precision and recall tables plus a JSON-ready record.

    ``extra`` is copied into the record verbatim (seeds, artifact kind, ...).
    """
    if not results:
        raise ValueError("nothing to report")
    lines, rec = [], {"format": REPORT_FORMAT, "results": {}, **extra}
    for name, m in results.items():
        if isinstance(m, RegressionMetrics):
            lines += [name, f"  MAE {m.mae_s:.3f} s over {m.n} clips"]
            rec["results"][name] = {"type": "regression", **m.as_dict()}
        else:
            lines += _table(name, m)
            rec["results"][name] = {"type": "classification", **m.as_dict()}
        lines.append("")
    return Report("\n".join(lines), rec)


def parse_results(record: Mapping) -> dict[str, Metrics | RegressionMetrics]:
    out = {}
    for name, d in record["results"].items():
        body = {k: v for k, v in d.items() if k != "type"}
        out[name] = RegressionMetrics(**body) if d["type"] == "regression" else Metrics.from_dict(body)
    return out


def evaluate_artifact(artifact, manifest: CorpusManifest, audio=None, *, seed: int = 0, draws: int = 100) -> Report:
    """Score a trained model on its held-out clips.

    Classifiers use the manifest's test split and are reported next to the
    random and majority baselines; the regressor uses the test ids stored in
    its artifact.
    """
    from .models import predict_many

    extra = {"kind": artifact.kind, "corpus_hash": manifest.config_hash()}
    if artifact.corpus_hash and artifact.corpus_hash != manifest.config_hash():
        warnings.warn(
            f"artifact was trained on corpus {artifact.corpus_hash}, evaluating on {manifest.config_hash()}",
            stacklevel=2,
        )
    if artifact.kind == "intensity_reg":
        ids = set(artifact.heldout.get("test", ()))
        clips = [s for s in manifest.samples if s.id in ids]
        if not clips:
            raise ValueError("the manifest contains none of the regressor's held-out test clips")
        preds = predict_many(artifact, clips, audio)
        mae = regression_mae([s.laughter_duration_s for s in clips], preds)
        return report({"intensity": RegressionMetrics(mae, len(clips))}, **extra)
    test = manifest.in_split("test")
    if not test:
        raise ValueError("empty test split")
    preds = predict_many(artifact, test, audio)
    model = classification_metrics([s.label for s in test], [FUNNY if p.is_funny else NOT_FUNNY for p in preds])
    b = baselines(manifest, seed=seed, draws=draws)
    results = {"model": model, "random baseline": b.random, "majority baseline": b.majority}
    return report(results, **extra, baseline_seed=seed, baseline_draws=draws, majority_label=b.majority_label)
