"""Command-line interface: detect-laughter, build-corpus, train, evaluate, cue-sheet.

The optional ``--config`` JSON file may hold the sections ``build``
(corpus build settings), ``train`` (training settings), ``encoders`` (role
-> encoder spec) and ``cue_policy``. Command-line flags win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .corpus import (
    REFERENCE_TEST_EPISODES,
    BuildConfig,
    CorpusManifest,
    EpisodeMedia,
    build_corpus,
    discover_episodes,
    split_by_episode,
    summarize,
    write_clips,
)
from .encoders import DEFAULT_CHECKPOINTS, EncoderSpec, ModelRegistry, make_mock
from .encoders.base import DEFAULT_DIMS
from .laughter import ProbabilitySeries, segment, serialize_segments
from .subtitles import SubtitleError, SubtitleTrack, parse_srt

log = logging.getLogger("laughtrack")

TRAIN_KINDS = {"text": "text_clf", "multimodal": "mm_clf", "intensity": "intensity_reg"}
ROLES_FOR = {"text_clf": ("text",), "mm_clf": ("text", "speech"), "intensity_reg": ("text", "audio_event")}


class CliError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    cfg = json.loads(Path(path).read_text())
    unknown = set(cfg) - {"build", "train", "encoders", "cue_policy"}
    if unknown:
        raise CliError(f"unknown config sections: {sorted(unknown)}")
    return cfg


def _write(out: str | None, data: bytes) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_bytes(data)
    else:
        sys.stdout.write(data.decode("utf-8"))


# ---- detect-laughter --------------------------------------------------------


def _read_probabilities(path: Path, hop_s: float | None) -> ProbabilitySeries:
    if path.suffix == ".json":
        d = json.loads(path.read_text())
        return ProbabilitySeries(float(d.get("hop_s", hop_s or 0.01)), np.asarray(d["values"], dtype=np.float64))
    values = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, ndmin=1)
    return ProbabilitySeries(hop_s or 0.01, values)


def cmd_detect_laughter(args, cfg) -> int:
    build = BuildConfig.from_dict(cfg.get("build", {}))
    threshold = args.threshold if args.threshold is not None else build.threshold
    min_len = args.min_length if args.min_length is not None else build.min_laugh_s
    src = Path(args.probabilities)
    if src.suffix.lower() in (".wav", ".flac", ".mp3", ".ogg"):
        raise CliError(
            f"{src} is audio; run a frame-level laughter detector on it first and pass its "
            "per-frame probabilities (.json, .npy or .txt)"
        )
    segs = segment(_read_probabilities(src, args.hop), threshold, min_len)
    _write(args.out, serialize_segments(segs))
    log.info("%d laughter segments", len(segs))
    return 0


# ---- build-corpus -------------------------------------------------------------


def cmd_build_corpus(args, cfg) -> int:
    build = BuildConfig.from_dict(cfg.get("build", {}))
    if args.seed is not None:
        build = replace(build, seed=args.seed)
    episodes = discover_episodes(args.media, args.subtitles, args.segments)
    manifest = build_corpus(episodes, build)
    if args.test_episodes:
        test = [e.strip() for e in args.test_episodes.split(",") if e.strip()]
    else:
        test = [e for e in REFERENCE_TEST_EPISODES if e in set(manifest.episodes())]
        if not test:
            raise CliError("none of the reference test episodes are present; pass --test-episodes")
    manifest = split_by_episode(manifest, test, args.val_fraction)
    if not args.out:
        raise CliError("build-corpus needs --out for the manifest")
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest.save(out)
    if not args.no_clips:
        write_clips(manifest, episodes, out.parent)
    print(json.dumps(summarize(manifest).as_dict(), indent=2, sort_keys=True))
    return 0


# ---- train ------------------------------------------------------------------


def encoder_specs(kind: str, cfg: dict, args) -> dict[str, EncoderSpec]:
    """Encoders for a model kind: config file entries, else mocks or registry checkpoints."""
    roles = ROLES_FOR[kind]
    given = cfg.get("encoders", {})
    specs = {}
    registry = ModelRegistry.from_file(args.registry) if args.registry else ModelRegistry()
    # the regressor keeps its encoders frozen; the classifiers fine-tune theirs
    trainable = kind != "intensity_reg"
    for role in roles:
        if role in given:
            specs[role] = EncoderSpec.from_dict(given[role])
        elif args.mock_encoders:
            specs[role] = make_mock(role, DEFAULT_DIMS[role], seed=args.seed or 0)
        else:
            specs[role] = registry.spec(role, trainable=trainable)
    return specs


def cmd_train(args, cfg) -> int:
    from .models import ClipAudio, TrainConfig, count_parameters, format_count, train_classifier, train_intensity

    kind = TRAIN_KINDS[args.kind]
    manifest = CorpusManifest.load(args.manifest)
    tc = TrainConfig.from_dict(cfg.get("train", {}), kind=kind)
    if args.seed is not None:
        tc = replace(tc, seed=args.seed)
    if args.epochs is not None:
        tc = replace(tc, epochs=args.epochs)
    specs = encoder_specs(kind, cfg, args)
    audio = ClipAudio(Path(args.manifest).parent)
    if kind == "intensity_reg":
        art = train_intensity(manifest, specs, tc, audio=audio)
    else:
        art = train_classifier(manifest, specs, tc, multimodal=kind == "mm_clf", audio=audio)
    counts = count_parameters(art.model())
    art.metrics["parameters"] = counts
    if not args.out:
        raise CliError("train needs --out for the model artifact")
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    art.save(args.out)
    summary = {k: v for k, v in art.metrics.items() if k not in ("history", "first_epoch_batch_losses")}
    print(json.dumps(summary, indent=2, sort_keys=True))
    log.info("parameters: %s total, %s trainable", format_count(counts["total"]), format_count(counts["trainable"]))
    return 0


# ---- evaluate -------------------------------------------------------------------


def cmd_evaluate(args, cfg) -> int:
    from .eval import evaluate_artifact
    from .models import ClipAudio, ModelArtifact

    art = ModelArtifact.load(args.artifact)
    manifest = CorpusManifest.load(args.manifest)
    rep = evaluate_artifact(art, manifest, ClipAudio(Path(args.manifest).parent), seed=args.seed or 0)
    print(rep.text)
    if args.out:
        _write(args.out, rep.to_json().encode("utf-8"))
    return 0


# ---- cue-sheet --------------------------------------------------------------------


def cmd_cue_sheet(args, cfg) -> int:
    from .cuesheet import CuePolicy, generate_cue_sheet
    from .models import ModelArtifact

    policy = CuePolicy(**cfg.get("cue_policy", {}))
    if args.threshold is not None:
        policy = replace(policy, threshold=args.threshold)
    if args.refractory is not None:
        policy = replace(policy, refractory_s=args.refractory)
    episode_id = args.episode_id or Path(args.media).stem
    if not Path(args.subtitles).exists():
        raise CliError(f"missing subtitles for episode {episode_id}: {args.subtitles}")
    try:
        track = parse_srt(Path(args.subtitles).read_bytes(), episode_id)
    except SubtitleError:
        track = SubtitleTrack(episode_id, ())  # no cues: the sheet comes out empty with a warning
    ep = EpisodeMedia(episode_id, track, [], audio_path=Path(args.media))
    sheet = generate_cue_sheet(ep, ModelArtifact.load(args.classifier), ModelArtifact.load(args.intensity), policy)
    for w in sheet.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        out = Path(args.out)
        _write(str(out), sheet.to_jsonl())
        _write(str(out.with_suffix(".srt")), sheet.to_srt())
    else:
        _write(None, sheet.to_jsonl())
    return 0


# ---- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed")
    common.add_argument("--config", default=argparse.SUPPRESS, help="JSON config file")
    common.add_argument("--out", default=argparse.SUPPRESS, help="output path")
    common.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)

    p = argparse.ArgumentParser(prog="laughtrack", description="Laugh-track supervised humor corpus, models and cue sheets.", parents=[common])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("detect-laughter", parents=[common], help="segment per-frame laughter probabilities")
    d.add_argument("probabilities", help=".json ({hop_s, values}), .npy or .txt probabilities")
    d.add_argument("--hop", type=float, help="frame hop in seconds (default 0.01)")
    d.add_argument("--threshold", type=float)
    d.add_argument("--min-length", type=float)
    d.set_defaults(func=cmd_detect_laughter)

    b = sub.add_parser("build-corpus", parents=[common], help="build the clip manifest from episodes")
    b.add_argument("media", help="directory of <episode>.wav files")
    b.add_argument("subtitles", help="directory of <episode>.srt files")
    b.add_argument("segments", help="directory of <episode>.tsv laughter segment files")
    b.add_argument("--test-episodes", help="comma-separated test episode ids")
    b.add_argument("--val-fraction", type=float, default=0.1)
    b.add_argument("--no-clips", action="store_true", help="write the manifest only")
    b.set_defaults(func=cmd_build_corpus)

    t = sub.add_parser("train", parents=[common], help="train a classifier or the intensity regressor")
    t.add_argument("manifest")
    t.add_argument("--kind", choices=sorted(TRAIN_KINDS), required=True)
    t.add_argument("--epochs", type=int)
    t.add_argument("--registry", help=f"JSON mapping of encoder kind to checkpoint (defaults: {', '.join(DEFAULT_CHECKPOINTS)})")
    t.add_argument("--mock-encoders", action="store_true", help="use checkpoint-free mock encoders")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", parents=[common], help="score a model on its held-out clips")
    e.add_argument("artifact")
    e.add_argument("manifest")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("cue-sheet", parents=[common], help="place laughter cues in an episode")
    c.add_argument("--media", required=True, help="episode audio")
    c.add_argument("--subtitles", required=True, help="episode .srt")
    c.add_argument("--classifier", required=True, help="humor classifier artifact")
    c.add_argument("--intensity", required=True, help="intensity regressor artifact")
    c.add_argument("--episode-id")
    c.add_argument("--threshold", type=float)
    c.add_argument("--refractory", type=float)
    c.set_defaults(func=cmd_cue_sheet)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    for name, default in (("seed", None), ("config", None), ("out", None), ("verbose", False)):
        if not hasattr(args, name):
            setattr(args, name, default)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args, _load_config(args.config))
    except (CliError, ValueError, OSError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
