"""Reading impulse responses and noise recordings."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np
from scipy.io import wavfile


class FileFormatError(ValueError):
    """A data file could not be parsed; the message names the position."""


def read_impulse_response(path, fmt: str | None = None) -> np.ndarray:
    """Load FIR taps from a text or raw binary file.

    ``fmt`` is ``"text"`` (one coefficient per line, ``#`` comments and blank
    lines ignored) or ``"f32le"`` (little-endian 32-bit floats).  When omitted
    it is inferred from the suffix: ``.bin``, ``.f32`` and ``.raw`` are
    binary, anything else text.
    """
    path = Path(path)
    if fmt is None:
        fmt = "f32le" if path.suffix.lower() in (".bin", ".f32", ".raw") else "text"
    if fmt == "text":
        taps = _read_text_taps(path)
    elif fmt == "f32le":
        taps = _read_f32le(path)
    else:
        raise ValueError(f"unknown impulse-response format {fmt!r}")
    if taps.size == 0:
        raise FileFormatError(f"{path}: no coefficients found")
    return taps


def _read_text_taps(path: Path) -> np.ndarray:
    values = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                v = float(text)
            except ValueError:
                raise FileFormatError(f"{path}:{lineno}: cannot parse coefficient {text!r}") from None
            if not math.isfinite(v):
                raise FileFormatError(f"{path}:{lineno}: non-finite coefficient {text!r}")
            values.append(v)
    return np.array(values, dtype=float)


def _read_f32le(path: Path) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) % 4:
        raise FileFormatError(
            f"{path}: {len(raw)} bytes is not a whole number of float32 values "
            f"(trailing {len(raw) % 4} bytes at offset {len(raw) - len(raw) % 4})"
        )
    taps = np.frombuffer(raw, dtype="<f4").astype(float)
    bad = np.flatnonzero(~np.isfinite(taps))
    if bad.size:
        raise FileFormatError(f"{path}: non-finite value at index {bad[0]} (byte offset {4 * bad[0]})")
    return taps


def write_impulse_response(path, taps, fmt: str = "text") -> None:
    taps = np.asarray(taps, dtype=float)
    if fmt == "text":
        Path(path).write_text("".join(f"{v!r}\n" for v in taps.tolist()), encoding="utf-8")
    elif fmt == "f32le":
        Path(path).write_bytes(taps.astype("<f4").tobytes())
    else:
        raise ValueError(f"unknown impulse-response format {fmt!r}")


def read_wav(path) -> tuple[np.ndarray, int]:
    """Read a mono PCM16 or float32 WAV file as floats (PCM scaled to [-1, 1))."""
    path = Path(path)
    try:
        fs, data = wavfile.read(path)
    except ValueError as exc:
        raise FileFormatError(f"{path}: {exc}") from None
    if data.ndim != 1:
        raise FileFormatError(f"{path}: expected mono audio, found {data.shape[1]} channels")
    if data.dtype == np.int16:
        samples = data.astype(float) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(float)
    else:
        raise FileFormatError(f"{path}: unsupported sample format {data.dtype} (need PCM16 or float32)")
    bad = np.flatnonzero(~np.isfinite(samples))
    if bad.size:
        raise FileFormatError(f"{path}: non-finite sample at index {bad[0]}")
    return samples, int(fs)


def write_wav(path, samples, fs: int, fmt: str = "float32") -> None:
    samples = np.asarray(samples, dtype=float)
    if fmt == "float32":
        wavfile.write(path, int(fs), samples.astype(np.float32))
    elif fmt == "pcm16":
        wavfile.write(path, int(fs), np.clip(np.round(samples * 32768.0), -32768, 32767).astype(np.int16))
    else:
        raise ValueError(f"unknown wav format {fmt!r}")
