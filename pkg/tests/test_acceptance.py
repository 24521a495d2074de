"""Acceptance criteria 1 to 9, each at its stated tolerance.

Every test records a verdict line; ``conftest.py`` prints them in the
terminal summary, one PASS/FAIL line per criterion. Run directly with
``python tests/test_acceptance.py`` or as part of ``pytest``.
"""

from __future__ import annotations

import random
import time
import warnings

import numpy as np
import pytest
import torch

from laughtrack.corpus import FUNNY, NOT_FUNNY, build_corpus, split_by_episode
from laughtrack.cuesheet import generate_cue_sheet
from laughtrack.eval import ConfusionMatrix, MetricWarning, baselines, classification_metrics, metrics_from_confusion
from laughtrack.laughter import DURATION_BINS, ProbabilitySeries, duration_histogram, segment
from laughtrack.models import ClipAudio, TrainConfig, layers, predict_many, train_classifier, train_intensity
from laughtrack.subtitles import clean, parse_srt, serialize_srt
from planted import classifier_encoders, intensity_encoders, planted_episode, planted_manifest
from test_corpus import check_leak_invariants, expected_fixture_clips, random_episode
from test_eval import supports_manifest
from test_laughter import brute_force_segments
from test_models import check_grads, rand, rand_mask
from test_subtitles import _random_cues

RESULTS: dict[int, str] = {}


def verdict(n: int, title: str, checks: dict[str, bool], detail: str = "") -> None:
    ok = all(checks.values())
    failed = [k for k, v in checks.items() if not v]
    line = f"criterion {n} [{'PASS' if ok else 'FAIL'}] {title}"
    if detail:
        line += f": {detail}"
    if failed:
        line += f" (failed: {', '.join(failed)})"
    RESULTS[n] = line
    assert ok, line


# ---- 1 ----------------------------------------------------------------------------


def _covered(segs, hop):
    return {k for s in segs for k in range(round(s.start_s / hop), round(s.end_s / hop))}


def test_criterion_1_segmentation():
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    mismatches = 0
    for _ in range(1000):
        n = int(rng.integers(0, 200))
        # blocky series so runs of every length occur
        values = np.repeat(rng.random(n // 4 + 1), rng.integers(1, 8, n // 4 + 1))[:n]
        hop = float(rng.choice([0.01, 0.02, 0.05]))
        thr, min_len = float(rng.uniform(0.1, 0.95)), float(rng.uniform(0.01, 0.5))
        got = [(s.start_s, s.end_s, s.mean_confidence) for s in segment(ProbabilitySeries(hop, values), thr, min_len)]
        want = brute_force_segments(list(values), hop, thr, min_len)
        if len(got) != len(want) or not np.allclose(np.array(got).reshape(-1, 3), np.array(want).reshape(-1, 3), atol=1e-9):
            mismatches += 1

    monotone_failures = 0
    for _ in range(1000):
        n = int(rng.integers(1, 300))
        series = ProbabilitySeries(0.01, np.repeat(rng.random(n), rng.integers(1, 6, n))[:n])
        t_lo, t_hi = sorted(rng.uniform(0.05, 1.0, 2))
        m_lo, m_hi = sorted(rng.uniform(0.01, 0.6, 2))
        # a higher threshold only removes covered frames; a longer minimum only removes segments
        if not _covered(segment(series, t_hi, m_lo), 0.01) <= _covered(segment(series, t_lo, m_lo), 0.01):
            monotone_failures += 1
        short = {(s.start_s, s.end_s) for s in segment(series, t_lo, m_lo)}
        if not {(s.start_s, s.end_s) for s in segment(series, t_lo, m_hi)} <= short:
            monotone_failures += 1
    elapsed = time.perf_counter() - t0
    verdict(
        1,
        "segmentation vs brute-force oracle",
        {"oracle": mismatches == 0, "monotonicity": monotone_failures == 0, "runtime": elapsed < 10.0},
        f"{mismatches} oracle mismatches / 1000, {monotone_failures} monotonicity violations / 1000 trials, {elapsed:.2f} s",
    )


# ---- 2 ----------------------------------------------------------------------------

GOLDEN_CLEANING = {
    "dash": [("- Hey!", "Hey!"), ("-Hi.\n-Hey.", "Hi. Hey."), ("a - b", "a - b")],
    "newline": [("line one\nline two", "line one line two"), ("one\r\ntwo", "one two")],
    "italics": [("<i>We were on a break</i>", "We were on a break"), ("<I>Oh.</I> My.", "Oh. My.")],
    "I to l": [("heIp", "help"), ("AppIe", "Apple"), ("fiIIing", "filling"), ("stiII", "stilI")],
    "word-initial I kept": [("I am here", "I am here"), ("Is it?", "Is it?"), ("FBI agent", "FBI agent"), ("Idaho", "Idaho")],
}


def test_criterion_2_subtitles():
    golden_fail = [f"{rule}: {raw!r}" for rule, cases in GOLDEN_CLEANING.items() for raw, want in cases if clean(raw) != want]
    rng = random.Random(2)
    alphabet = list("aIlbX -\n\r.?!") + ["<i>", "</i>", "<I>", "I", "i", "  ", "\t", "é"]
    not_idempotent = 0
    for _ in range(10_000):
        s = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 40)))
        once = clean(s)
        not_idempotent += clean(once) != once
    bad_round_trips = 0
    for _ in range(100):
        cues = _random_cues(rng, rng.randint(1, 30))
        data = serialize_srt(cues)
        parsed = parse_srt(data)
        bad_round_trips += list(parsed.cues) != cues or serialize_srt(parsed.cues) != data
    verdict(
        2,
        "subtitle golden suite",
        {"golden rules": not golden_fail, "idempotence": not_idempotent == 0, "round trip": bad_round_trips == 0},
        f"{sum(map(len, GOLDEN_CLEANING.values())) - len(golden_fail)} golden cases pass, "
        f"{not_idempotent} / 10000 non-idempotent, {bad_round_trips} / 100 round-trip failures",
    )


# ---- 3 ----------------------------------------------------------------------------


def test_criterion_3_corpus(fixture_episodes):
    m = build_corpus(fixture_episodes)
    got = [(s.id, s.span.start_s, s.span.end_s, s.label, s.laughter_duration_s) for s in m.samples]
    exact = got == expected_fixture_clips()
    a = split_by_episode(build_corpus(fixture_episodes), ["2x01"]).to_jsonl()
    b = split_by_episode(build_corpus(fixture_episodes), ["2x01"]).to_jsonl()
    rng = np.random.default_rng(3)
    leaks = checked = 0
    for trial in range(200):
        eps = [random_episode(rng, f"{trial}x{k}") for k in range(4)]
        manifest = build_corpus(eps)
        present = manifest.episodes()
        if len(present) >= 2:
            manifest = split_by_episode(manifest, [present[0]], 0.2, rng)
        else:
            manifest = type(manifest)(manifest.samples, {s.id: "train" for s in manifest.samples}, manifest.build_config)
        try:
            check_leak_invariants(manifest, eps)
        except AssertionError:
            leaks += 1
        checked += 1
    verdict(
        3,
        "corpus builder on the shipped fixture",
        {"hand enumeration": exact, "byte identical": a == b, "leak invariants": leaks == 0 and checked == 200},
        f"{len(got)} clips ({sum(s.is_funny for s in m.samples)} funny), {leaks} leaking fixtures / {checked}",
    )


# ---- 4 ----------------------------------------------------------------------------

REFERENCE_HISTOGRAM = (459, 2895, 2328, 948, 374, 184, 234)


def test_criterion_4_histogram_and_majority():
    rng = np.random.default_rng(4)
    durations = []
    for (lo, hi), n in zip(DURATION_BINS, REFERENCE_HISTOGRAM):
        # both closed edges of the first bin, the closed upper edge of every bin, and interior points
        edge = [lo, hi] if lo == DURATION_BINS[0][0] else [hi]
        durations += edge + list(rng.uniform(lo, hi, n - len(edge)))
    hist = duration_histogram(durations)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        b = baselines(supports_manifest(5941, 7434, 758, 950))
    verdict(
        4,
        "laughter histogram and majority baseline",
        {
            "histogram": hist.counts == REFERENCE_HISTOGRAM and hist.outside == 0,
            "total 7422": hist.total == 7422,
            "majority 0.556": abs(b.majority.accuracy - 0.556) <= 0.005,
        },
        f"counts {hist.counts}, total {hist.total}, majority accuracy {b.majority.accuracy:.4f}",
    )


# ---- 5 ----------------------------------------------------------------------------


def test_criterion_5_reference_metrics():
    m = metrics_from_confusion(ConfusionMatrix(tp=682, fp=306, fn=76, tn=644))
    targets = {
        "funny P": (m.funny.precision, 0.69),
        "funny R": (m.funny.recall, 0.90),
        "not-funny P": (m.not_funny.precision, 0.90),
        "not-funny R": (m.not_funny.recall, 0.68),
        "accuracy": (m.accuracy, 0.78),
    }
    verdict(
        5,
        "metrics from the inverted reference confusion matrix",
        {k: abs(v - t) <= 0.005 for k, (v, t) in targets.items()},
        ", ".join(f"{k} {v:.4f} (target {t:.2f})" for k, (v, t) in targets.items()),
    )


# ---- 6 ----------------------------------------------------------------------------


def _grad_ok(fn, inputs, seed) -> bool:
    try:
        check_grads(fn, inputs, seed)
        return True
    except AssertionError:
        return False


def test_criterion_6_gradient_checks():
    failures = {}
    for name in ("masked mean", "adaptive pool", "2-D pool", "rectifier", "dense", "concat"):
        bad = 0
        for i in range(50):
            g = torch.Generator().manual_seed(1000 + i)
            if name == "masked mean":
                mask = rand_mask(g, 3, 5)
                ok = _grad_ok(lambda x: layers.masked_mean(x, mask), [rand(g, 3, 5, 4)], i)
            elif name == "adaptive pool":
                d, size = int(torch.randint(2, 12, (1,), generator=g)), int(torch.randint(1, 12, (1,), generator=g))
                ok = _grad_ok(lambda x: layers.adaptive_pool(x, size), [rand(g, 2, d)], i)
            elif name == "2-D pool":
                mask = rand_mask(g, 2, 6)
                ok = _grad_ok(lambda x: layers.pool2d_to(x, mask, 4), [rand(g, 2, 6, 9)], i)
            elif name == "rectifier":
                x = rand(g, 3, 5)
                ok = _grad_ok(layers.relu, [x + torch.sign(x) * 0.01], i)
            elif name == "dense":
                ok = _grad_ok(torch.nn.functional.linear, [rand(g, 3, 5), rand(g, 4, 5), rand(g, 4)], i)
            else:
                ok = _grad_ok(layers.concat, [rand(g, 2, 3), rand(g, 2, 5)], i)
            bad += not ok
        failures[name] = bad
    verdict(
        6,
        "gradient checks against central differences",
        {k: v == 0 for k, v in failures.items()},
        ", ".join(f"{k} {50 - v}/50" for k, v in failures.items()),
    )


# ---- 7 ----------------------------------------------------------------------------


def _accuracy(art, clips, audio=None) -> float:
    preds = predict_many(art, clips, audio)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MetricWarning)
        m = classification_metrics([c.label for c in clips], [FUNNY if p.is_funny else NOT_FUNNY for p in preds])
    return m.accuracy


def test_criterion_7_planted_classifiers():
    t0 = time.perf_counter()
    manifest, _ = planted_manifest(400, seed=71)
    text = train_classifier(manifest, classifier_encoders(), TrainConfig(seed=0, epochs=3))
    held_out, _ = planted_manifest(200, seed=72)
    text_test = _accuracy(text, list(held_out.samples))
    text_time = time.perf_counter() - t0

    t0 = time.perf_counter()
    mm_manifest, waves = planted_manifest(400, seed=73, text_signal=False, audio_signal=True)
    mm = train_classifier(mm_manifest, classifier_encoders(), TrainConfig(seed=0, epochs=3), multimodal=True, audio=ClipAudio(waveforms=waves))
    mm_held, mm_waves = planted_manifest(200, seed=74, text_signal=False, audio_signal=True)
    mm_test = _accuracy(mm, list(mm_held.samples), ClipAudio(waveforms=mm_waves))
    mm_time = time.perf_counter() - t0
    verdict(
        7,
        "planted-signal classifiers with mock encoders",
        {
            "text train >= 0.95": text.metrics["train_accuracy"] >= 0.95,
            "text test >= 0.90": text_test >= 0.90,
            "audio-only multimodal test >= 0.90": mm_test >= 0.90,
            "runtime < 5 min each": text_time < 300 and mm_time < 300,
        },
        f"text train {text.metrics['train_accuracy']:.3f} test {text_test:.3f} ({text_time:.1f} s), "
        f"audio-only multimodal test {mm_test:.3f} ({mm_time:.1f} s)",
    )


# ---- 8 ----------------------------------------------------------------------------


def test_criterion_8_intensity():
    linear, waves = planted_manifest(400, seed=81, durations=lambda a: 3.0 * a)
    art = train_intensity(linear, intensity_encoders(noise_scale=0.3), audio=ClipAudio(waveforms=waves))
    lin_preds = predict_many(art, list(linear.samples), ClipAudio(waveforms=waves))

    c = 1.2
    const, cwaves = planted_manifest(400, seed=82, durations=lambda a: c)
    cart = train_intensity(const, intensity_encoders(audio_gain=0.0, noise_scale=0.1), audio=ClipAudio(waveforms=cwaves))
    c_preds = np.array(predict_many(cart, list(const.samples), ClipAudio(waveforms=cwaves)))
    all_preds = np.concatenate([lin_preds, c_preds])
    verdict(
        8,
        "intensity regressor with mock encoders",
        {
            "val MAE <= 0.15": art.metrics["val_mae"] <= 0.15,
            "constant within 0.05": float(np.abs(c_preds - c).max()) <= 0.05,
            "predictions in [0, 3]": bool(((all_preds >= 0) & (all_preds <= 3.0)).all()),
            "early stop before 100": cart.metrics["epochs_run"] < 100,
        },
        f"linear val MAE {art.metrics['val_mae']:.3f} s, constant {c}: max deviation {np.abs(c_preds - c).max():.3f}, "
        f"stopped after {cart.metrics['epochs_run']} epochs",
    )


# ---- 9 ----------------------------------------------------------------------------


def test_criterion_9_cue_sheet():
    manifest, _ = planted_manifest(400, seed=91)
    clf = train_classifier(manifest, classifier_encoders(), TrainConfig(seed=0))
    m2, waves = planted_manifest(200, seed=92, durations=lambda a: 0.5 + 2 * a)
    reg = train_intensity(m2, intensity_encoders(), audio=ClipAudio(waveforms=waves))
    planted = [14.0, 31.5, 47.0, 62.0, 93.25]
    other = [3.0, 6.5, 27.0, 44.0, 58.0, 77.0, 80.0, 110.0]
    ep, _, _ = planted_episode(planted, other, seconds=120.0, seed=9)
    sheet = generate_cue_sheet(ep, clf, reg)
    times = [c.insert_at_s for c in sheet.cues]
    verdict(
        9,
        "cue sheet on the planted fixture",
        {
            "positions": times == planted,
            "durations in (0, 3]": all(0 < c.duration_s <= 3.0 for c in sheet.cues),
            "refractory spacing": all(b - a >= 3.0 for a, b in zip(times, times[1:])),
        },
        f"cues at {times}, durations {[c.duration_s for c in sheet.cues]}",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
