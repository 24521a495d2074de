from pathlib import Path

import numpy as np
import pytest

from laughtrack import audio as audio_io
from laughtrack.corpus import discover_episodes

FIXTURE_DIR = Path(__file__).parent / "fixtures" / "episodes"

# episode id -> (duration in seconds, native sample rate of the synthetic audio)
FIXTURE_AUDIO = {"1x01": (90.0, 16_000), "1x02": (120.0, 48_000), "2x01": (60.0, 8_000)}


def write_fixture_media(media_dir: Path) -> Path:
    """Low-level noise tracks for the fixture episodes at assorted sample rates."""
    media_dir.mkdir(parents=True, exist_ok=True)
    for k, (eid, (dur, sr)) in enumerate(sorted(FIXTURE_AUDIO.items())):
        rng = np.random.default_rng(100 + k)
        audio_io.write_wav(media_dir / f"{eid}.wav", 0.05 * rng.standard_normal(int(dur * sr)), sr)
    return media_dir


@pytest.fixture(scope="session")
def fixture_media(tmp_path_factory) -> Path:
    return write_fixture_media(tmp_path_factory.mktemp("media"))


@pytest.fixture
def fixture_episodes(fixture_media):
    return discover_episodes(fixture_media, FIXTURE_DIR, FIXTURE_DIR)


def pytest_terminal_summary(terminalreporter):
    import sys

    acceptance = sys.modules.get("test_acceptance")
    results = getattr(acceptance, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for n in sorted(results):
            terminalreporter.write_line(results[n])
