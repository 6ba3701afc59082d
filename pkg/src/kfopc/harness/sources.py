"""Turn config source specs into impulse responses and noise signals.

Also holds the synthetic stand-ins for measured duct paths and recorded
compressor noise.  They are not measurements of anything.
"""

from __future__ import annotations

import math

import numpy as np

from kfopc.io import read_impulse_response, read_wav
from kfopc.signals import (
    FirPath,
    bandlimited_noise_power,
    bandpass_fir,
    generate_bandlimited_noise,
    generate_tone,
)


def duct_impulse_response(length: int, delay: int, decay: float, seed: int = 0,
                          fs: float = 16000.0) -> np.ndarray:
    """Synthetic duct-like impulse response (stand-in, not measured).

    A unit direct arrival at ``delay`` followed by a seeded, exponentially
    decaying reflection tail (time constant ``decay`` samples), band-limited
    to 50-5000 Hz and normalised to unit energy.
    """
    rng = np.random.default_rng(seed)
    h = np.zeros(length)
    h[delay] = 1.0
    k = np.arange(1, length - delay)
    h[delay + 1:] = 0.4 * rng.standard_normal(k.size) * np.exp(-k / decay)
    band = bandpass_fir(50.0, 5000.0, fs, 31)
    h = np.convolve(h, band)[:length]
    return h / np.linalg.norm(h)


def compressor_noise(n: int, fs: float, seed: int, fundamental: float = 150.0,
                     amplitudes=(1.0, 0.7, 0.5, 0.35), floor_db: float = -20.0,
                     power: float = 1.0) -> np.ndarray:
    """Synthetic compressor-like noise (stand-in, not a recording).

    Harmonics of ``fundamental`` with seeded phases plus a band-limited
    (50-4000 Hz) noise floor ``floor_db`` below the harmonic power, scaled
    to mean power ``power``.
    """
    rng = np.random.default_rng(seed)
    amplitudes = np.asarray(amplitudes, dtype=float)
    phases = rng.uniform(0.0, 2 * np.pi, amplitudes.size)
    k = np.arange(int(n))
    x = np.zeros(int(n))
    for h, (a, ph) in enumerate(zip(amplitudes, phases), start=1):
        f = h * fundamental
        if f >= fs / 2:
            raise ValueError(f"harmonic {h} at {f} Hz is above Nyquist")
        x += a * np.sin(2 * np.pi * f * k / fs + ph)
    tonal_power = 0.5 * float(np.sum(amplitudes ** 2))
    floor_power = tonal_power * 10.0 ** (floor_db / 10.0)
    floor = generate_bandlimited_noise(50.0, 4000.0, fs, n, seed + 1)
    if n:
        floor *= math.sqrt(floor_power / bandlimited_noise_power(50.0, 4000.0, fs))
    total = tonal_power + floor_power
    return (x + floor) * math.sqrt(power / total) if total > 0 else x + floor


def build_path(spec: dict, fs: float) -> np.ndarray:
    kind = spec["type"]
    if kind == "bandpass":
        return bandpass_fir(spec["lo"], spec["hi"], fs, spec["length"])
    if kind == "identity":
        return np.ones(1)
    if kind == "delay":
        h = np.zeros(spec["samples"] + 1)
        h[-1] = 1.0
        return h
    if kind == "taps":
        return np.array(spec["taps"], dtype=float)
    if kind == "file":
        return read_impulse_response(spec["path"], spec["format"])
    if kind == "duct":
        return duct_impulse_response(spec["length"], spec["delay"], spec["decay"], spec["seed"], fs)
    raise ValueError(f"unknown path type {kind!r}")


def tone_amplitude_for_control_power(freq: float, control_power: float, primary, secondary,
                                     fs: float) -> float:
    """Tone amplitude whose ideal cancelling control signal has ``control_power``.

    Cancellation needs ``|Y| = |P(f)| / |S(f)| * A`` at the error point, and a
    sinusoid of amplitude ``|Y|`` has power ``|Y|^2 / 2``.
    """
    p = abs(FirPath(primary).response(freq, fs)[0])
    s = abs(FirPath(secondary).response(freq, fs)[0])
    if p == 0.0:
        raise ValueError(f"primary path has no gain at {freq} Hz")
    return float(math.sqrt(2.0 * control_power) * s / p)


def build_noise(spec: dict, fs: float, n: int, seed: int) -> np.ndarray:
    """Reference signal for ``spec`` (tone amplitudes must already be resolved)."""
    kind = spec["type"]
    if kind == "zero":
        return np.zeros(n)
    if kind == "tone":
        return generate_tone(spec["freq"], spec["amplitude"], fs, n)
    if kind == "bandlimited":
        x = generate_bandlimited_noise(spec["lo"], spec["hi"], fs, n, seed, spec["numtaps"])
        return x * math.sqrt(spec["power"] / bandlimited_noise_power(spec["lo"], spec["hi"], fs, spec["numtaps"]))
    if kind == "compressor":
        return compressor_noise(n, fs, seed, spec["fundamental"], spec["amplitudes"],
                                spec["floor_db"], spec["power"])
    if kind == "file":
        samples, file_fs = read_wav(spec["path"])
        if file_fs != int(round(fs)):
            raise ValueError(f"{spec['path']}: sample rate {file_fs} Hz does not match fs={fs}")
        if samples.size < n:
            raise ValueError(f"{spec['path']}: {samples.size} samples, run needs {n}")
        x = samples[:n].copy()
        if spec["power"] is not None and n:
            ms = float(np.mean(samples ** 2))
            if ms == 0.0:
                raise ValueError(f"{spec['path']}: recording is silent, cannot scale to a power")
            x *= math.sqrt(spec["power"] / ms)
        return x
    raise ValueError(f"unknown noise type {kind!r}")
