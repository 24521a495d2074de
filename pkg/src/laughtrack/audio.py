"""Waveform loading, mono downmix, resampling and PCM16 WAV output."""

from __future__ import annotations

from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import resample_poly

TARGET_SR = 16_000


def to_float(samples: np.ndarray) -> np.ndarray:
    """Integer PCM to float32 in [-1, 1]; float input passes through as float32."""
    if np.issubdtype(samples.dtype, np.integer):
        info = np.iinfo(samples.dtype)
        if info.min == 0:  # unsigned 8-bit
            return ((samples.astype(np.float32) - 128.0) / 128.0).astype(np.float32)
        return (samples.astype(np.float32) / float(-info.min)).astype(np.float32)
    return samples.astype(np.float32, copy=False)


def to_mono(samples: np.ndarray) -> np.ndarray:
    if samples.ndim == 1:
        return samples
    return samples.mean(axis=1).astype(samples.dtype, copy=False)


def read_audio(path: str | Path) -> tuple[np.ndarray, int]:
    """Load any file the available backends can decode as mono float32.

    WAV is read with scipy; other containers need the optional ``soundfile``
    package.
    """
    path = Path(path)
    if path.suffix.lower() == ".wav":
        sr, data = wavfile.read(path)
        return to_mono(to_float(data)), int(sr)
    try:
        import soundfile
    except ImportError:
        raise RuntimeError(
            f"cannot decode {path.suffix} audio without the 'soundfile' package; convert to WAV first"
        ) from None
    data, sr = soundfile.read(str(path), dtype="float32", always_2d=False)
    return to_mono(data), int(sr)


def resample(samples: np.ndarray, sr_in: int, sr_out: int = TARGET_SR) -> np.ndarray:
    if sr_in == sr_out:
        return samples
    ratio = Fraction(sr_out, sr_in)
    out = resample_poly(samples.astype(np.float64), ratio.numerator, ratio.denominator)
    return out.astype(np.float32)


def write_wav(path: str | Path, samples: np.ndarray, sr: int = TARGET_SR) -> None:
    """Write mono 16-bit PCM."""
    pcm = np.clip(np.round(np.asarray(samples, dtype=np.float64) * 32767.0), -32768, 32767)
    wavfile.write(Path(path), sr, pcm.astype(np.int16))
