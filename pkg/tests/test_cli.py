import json
import shutil

import numpy as np
import pytest

from laughtrack import audio as audio_io
from laughtrack.cli import main
from laughtrack.corpus import BuildConfig, CorpusManifest, build_corpus, discover_episodes, split_by_episode
from laughtrack.encoders import make_mock
from laughtrack.laughter import ProbabilitySeries, load_segments, segment
from laughtrack.models import ModelArtifact, TrainConfig, train_classifier, train_intensity, ClipAudio
from conftest import FIXTURE_DIR
from planted import classifier_encoders, intensity_encoders, planted_episode, planted_manifest


def run(*argv) -> int:
    return main([str(a) for a in argv])


# ---- detect-laughter --------------------------------------------------------


@pytest.mark.parametrize("fmt", ["json", "npy", "txt"])
def test_detect_laughter_formats(tmp_path, fmt):
    rng = np.random.default_rng(0)
    values = np.clip(rng.random(500) * 1.3, 0, 1)
    src = tmp_path / f"probs.{fmt}"
    if fmt == "json":
        src.write_text(json.dumps({"hop_s": 0.02, "values": values.tolist()}))
    elif fmt == "npy":
        np.save(src, values)
    else:
        np.savetxt(src, values)
    hop = [] if fmt == "json" else ["--hop", "0.02"]
    out = tmp_path / "segs.tsv"
    assert run("detect-laughter", src, *hop, "--out", out) == 0
    expected = segment(ProbabilitySeries(0.02, values))
    got = load_segments(out.read_bytes())
    assert [(s.start_s, s.end_s) for s in got] == pytest.approx([(s.start_s, s.end_s) for s in expected])


def test_detect_laughter_flags(tmp_path, capsys):
    src = tmp_path / "p.txt"
    np.savetxt(src, [0.0, 0.6, 0.6, 0.6, 0.0])
    assert run("detect-laughter", src, "--threshold", "0.5", "--min-length", "0.03") == 0
    assert capsys.readouterr().out == "0.010\t0.040\t0.600\n"


def test_detect_laughter_rejects_audio(tmp_path, capsys):
    wav = tmp_path / "ep.wav"
    audio_io.write_wav(wav, np.zeros(1600, np.float32))
    assert run("detect-laughter", wav) == 1
    assert "probabilities" in capsys.readouterr().err


# ---- build-corpus -------------------------------------------------------------


def build(tmp_path, media, name="corpus", *extra):
    out = tmp_path / name / "manifest.jsonl"
    code = run("build-corpus", media, FIXTURE_DIR, FIXTURE_DIR, "--test-episodes", "2x01", "--out", out, *extra)
    return code, out


def test_build_corpus_matches_library(tmp_path, fixture_media, fixture_episodes, capsys):
    code, out = build(tmp_path, fixture_media)
    assert code == 0
    summary = json.loads(capsys.readouterr().out)
    assert (summary["total"], summary["funny"], summary["not_funny"]) == (17, 7, 10)
    expected = split_by_episode(build_corpus(fixture_episodes, BuildConfig()), ["2x01"])
    assert out.read_bytes() == expected.to_jsonl()
    m = CorpusManifest.load(out)
    for s in m.samples:
        wav, sr = audio_io.read_audio(out.parent / s.audio_ref)
        assert sr == 16_000 and len(wav) == round(s.span.duration() * 16_000)


def test_build_corpus_idempotent(tmp_path, fixture_media):
    _, a = build(tmp_path, fixture_media, "a")
    _, b = build(tmp_path, fixture_media, "b")
    assert a.read_bytes() == b.read_bytes()
    clips_a = sorted((a.parent / "clips").iterdir())
    clips_b = sorted((b.parent / "clips").iterdir())
    assert [p.read_bytes() for p in clips_a] == [p.read_bytes() for p in clips_b]


def test_build_corpus_seed_and_config(tmp_path, fixture_media):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"build": {"negatives_per_positive": 1}}))
    code, out = build(tmp_path, fixture_media, "c", "--config", cfg, "--seed", "7", "--no-clips")
    assert code == 0
    m = CorpusManifest.load(out)
    assert m.build_config.seed == 7 and m.build_config.negatives_per_positive == 1
    assert not (out.parent / "clips").exists()


def test_build_corpus_missing_subtitles_names_episode(tmp_path, fixture_media, capsys):
    subs = tmp_path / "subs"
    shutil.copytree(FIXTURE_DIR, subs)
    (subs / "1x02.srt").unlink()
    code = run("build-corpus", fixture_media, subs, FIXTURE_DIR, "--test-episodes", "2x01", "--out", tmp_path / "m.jsonl")
    assert code == 1
    assert "1x02" in capsys.readouterr().err


# ---- train / evaluate ---------------------------------------------------------


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    from conftest import write_fixture_media

    root = tmp_path_factory.mktemp("cli")
    media = write_fixture_media(root / "media")
    out = root / "corpus" / "manifest.jsonl"
    assert run("build-corpus", media, FIXTURE_DIR, FIXTURE_DIR, "--test-episodes", "2x01", "--out", out) == 0
    return out


def mock_config(tmp_path, **roles):
    cfg = tmp_path / "enc.json"
    cfg.write_text(json.dumps({"encoders": {r: s.to_dict() for r, s in roles.items()}, "train": {"batch_size": 4}}))
    return cfg


@pytest.mark.filterwarnings("ignore::laughtrack.eval.MetricWarning")
@pytest.mark.parametrize(
    "kind,roles",
    [
        ("text", {"text": make_mock("text", 32)}),
        ("multimodal", {"text": make_mock("text", 32), "speech": make_mock("speech", 16)}),
        ("intensity", {"text": make_mock("text", 32), "audio_event": make_mock("audio_event", 128)}),
    ],
)
def test_train_and_evaluate(tmp_path, built, capsys, kind, roles):
    art = tmp_path / f"{kind}.pt"
    assert run("train", built, "--kind", kind, "--config", mock_config(tmp_path, **roles), "--out", art, "--seed", 1) == 0
    metrics = json.loads(capsys.readouterr().out)
    assert metrics["parameters"]["head"] > 0
    loaded = ModelArtifact.load(art)
    assert loaded.train_config.seed == 1 and loaded.train_config.batch_size == 4
    report = tmp_path / "report.json"
    assert run("evaluate", art, built, "--out", report) == 0
    text = capsys.readouterr().out
    rec = json.loads(report.read_text())
    if kind == "intensity":
        assert "MAE" in text and rec["results"]["intensity"]["n"] == 1
    else:
        assert "majority baseline" in text and rec["results"]["model"]["funny"]["support"] == 3


def test_train_is_idempotent(tmp_path, built):
    cfg = mock_config(tmp_path, text=make_mock("text", 32))
    for name in ("a.pt", "b.pt"):
        assert run("train", built, "--kind", "text", "--config", cfg, "--out", tmp_path / name) == 0
    assert (tmp_path / "a.pt").read_bytes() == (tmp_path / "b.pt").read_bytes()


def test_train_with_mock_flag(tmp_path, built):
    assert run("train", built, "--kind", "text", "--mock-encoders", "--epochs", 1, "--out", tmp_path / "m.pt") == 0
    assert ModelArtifact.load(tmp_path / "m.pt").encoder_specs["text"].output_dims == 768


def test_bad_config_section(tmp_path, built, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text('{"optimizer": {}}')
    assert run("train", built, "--kind", "text", "--config", cfg, "--out", tmp_path / "x.pt") == 1
    assert "optimizer" in capsys.readouterr().err


# ---- cue-sheet ------------------------------------------------------------------


@pytest.fixture(scope="module")
def planted_artifacts(tmp_path_factory):
    root = tmp_path_factory.mktemp("art")
    manifest, _ = planted_manifest(400, seed=1)
    train_classifier(manifest, classifier_encoders(), TrainConfig(seed=0)).save(root / "clf.pt")
    m2, waves = planted_manifest(200, seed=3, durations=lambda a: 0.5 + 2 * a)
    train_intensity(m2, intensity_encoders(), audio=ClipAudio(waveforms=waves)).save(root / "reg.pt")
    return root / "clf.pt", root / "reg.pt"


def test_cue_sheet_command(tmp_path, planted_artifacts):
    clf, reg = planted_artifacts
    ep, srt, wav = planted_episode([20.0, 50.0, 80.0], [5.0, 10.0, 35.0, 40.0, 65.0, 70.0, 95.0])
    (tmp_path / "ep.srt").write_bytes(srt)
    audio_io.write_wav(tmp_path / "ep.wav", wav)
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name / "sheet.jsonl"
        args = ["cue-sheet", "--media", tmp_path / "ep.wav", "--subtitles", tmp_path / "ep.srt"]
        assert run(*args, "--classifier", clf, "--intensity", reg, "--out", out) == 0
        outs.append(out)
    rows = [json.loads(ln) for ln in outs[0].read_text().splitlines()]
    assert [r["insert_at_s"] for r in rows] == [20.0, 50.0, 80.0]
    assert outs[0].read_bytes() == outs[1].read_bytes()
    assert outs[0].with_suffix(".srt").exists()


def test_cue_sheet_missing_subtitles(tmp_path, planted_artifacts, capsys):
    clf, reg = planted_artifacts
    audio_io.write_wav(tmp_path / "4x02.wav", np.zeros(16000, np.float32))
    code = run("cue-sheet", "--media", tmp_path / "4x02.wav", "--subtitles", tmp_path / "4x02.srt",
               "--classifier", clf, "--intensity", reg)
    assert code == 1 and "4x02" in capsys.readouterr().err


def test_cue_sheet_empty_subtitles(tmp_path, planted_artifacts, capsys):
    clf, reg = planted_artifacts
    audio_io.write_wav(tmp_path / "e.wav", np.zeros(16000 * 20, np.float32))
    (tmp_path / "e.srt").write_text("")
    with pytest.warns(UserWarning):
        code = run("cue-sheet", "--media", tmp_path / "e.wav", "--subtitles", tmp_path / "e.srt",
                   "--classifier", clf, "--intensity", reg)
    assert code == 0 and capsys.readouterr().out == ""
