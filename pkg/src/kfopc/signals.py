"""FIR paths, signal generators, the clipping amplifier and signal statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

DEFAULT_FS = 16_000.0
NSE_FLOOR_DB = -100.0


class FirPath:
    """Fixed FIR filter with a streaming delay line.

    Models the primary path P(z), the secondary path S(z) or its estimate.
    The delay line is a doubled circular buffer so that each sample costs a
    single dot product and no array shifting.

    Parameters
    ----------
    taps : array_like
        Impulse response, ``taps[0]`` multiplies the newest input.
    """

    def __init__(self, taps):
        taps = np.array(taps, dtype=float).ravel()
        if taps.size < 1:
            raise ValueError("FIR path needs at least one tap")
        if not np.all(np.isfinite(taps)):
            raise ValueError("FIR taps must be finite")
        self.taps = taps
        self._n = taps.size
        self._buf = np.zeros(2 * self._n)
        self._idx = 0

    def __len__(self) -> int:
        return self._n

    def __repr__(self) -> str:
        return f"FirPath(len={self._n})"

    @property
    def delay_line(self) -> np.ndarray:
        """Last ``len(self)`` inputs, newest first."""
        return self._buf[self._idx:self._idx + self._n].copy()

    def reset(self) -> None:
        self._buf[:] = 0.0
        self._idx = 0

    def process(self, sample: float) -> float:
        """Shift ``sample`` into the delay line and return the filter output."""
        if not math.isfinite(sample):
            raise ValueError(f"non-finite input sample to FIR path: {sample!r}")
        n = self._n
        idx = (self._idx - 1) % n
        self._buf[idx] = sample
        self._buf[idx + n] = sample
        self._idx = idx
        return float(np.dot(self.taps, self._buf[idx:idx + n]))

    def convolve(self, x) -> np.ndarray:
        """Filter a whole block from a zero initial state (delay line untouched)."""
        x = np.asarray(x, dtype=float)
        if x.size == 0:
            return np.zeros(0)
        return np.convolve(x, self.taps)[: x.size]

    def response(self, freq, fs: float = DEFAULT_FS) -> np.ndarray:
        """Complex frequency response at ``freq`` (Hz)."""
        _, h = sps.freqz(self.taps, worN=np.atleast_1d(np.asarray(freq, dtype=float)), fs=fs)
        return h


def fir_process(path: FirPath, sample: float) -> float:
    return path.process(sample)


@dataclass
class SaturatingAmplifier:
    """Hard symmetric clipper at ``+-clip_level``.

    Build it from a rated power with :meth:`from_rated_power`; a rated power of
    1 gives the clip level sqrt(2), the peak of a unit-power sinusoid.
    """

    clip_level: float

    def __post_init__(self):
        if not self.clip_level > 0:
            raise ValueError(f"clip level must be positive, got {self.clip_level}")

    @classmethod
    def from_rated_power(cls, rated_power: float) -> "SaturatingAmplifier":
        return cls(math.sqrt(2.0 * rated_power))

    def __call__(self, sample: float) -> float:
        c = self.clip_level
        if sample > c:
            return c
        if sample < -c:
            return -c
        return sample

    def clips(self, sample: float) -> bool:
        return abs(sample) > self.clip_level


def saturate(amp: SaturatingAmplifier, sample: float) -> float:
    return amp(sample)


@dataclass
class RunningPower:
    """Exponentially weighted mean of the squared input.

    ``value`` follows ``lam * value + (1 - lam) * sample**2``.  ``weight``
    accumulates the same recursion applied to a constant 1, so ``mean``
    removes the start-up bias of a zero-initialised average.  A value passed
    in at construction counts as a fully-weighted prior.
    """

    lam: float = 0.999
    value: float = 0.0
    weight: float | None = None

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"forgetting factor must lie in (0, 1), got {self.lam}")
        if self.weight is None:
            self.weight = 1.0 if self.value != 0.0 else 0.0

    def update(self, sample: float) -> float:
        lam = self.lam
        self.value = lam * self.value + (1.0 - lam) * sample * sample
        self.weight = lam * self.weight + (1.0 - lam)
        return self.value

    @property
    def mean(self) -> float:
        if self.weight > 0.0:
            return self.value / self.weight
        return self.value


def update_power(rp: RunningPower, sample: float) -> float:
    return rp.update(sample)


def bandpass_fir(lo: float, hi: float, fs: float, numtaps: int) -> np.ndarray:
    """Linear-phase band-pass FIR by the Hann-windowed sinc method.

    The Hann window is taken from a ``numtaps + 2`` point window with its zero
    end points dropped, so every tap carries weight.  The result is scaled to
    unit gain at the band centre.
    """
    if not 0 < lo < hi < fs / 2:
        raise ValueError(f"band edges must satisfy 0 < lo < hi < fs/2, got lo={lo}, hi={hi}, fs={fs}")
    if numtaps < 1:
        raise ValueError("numtaps must be positive")
    m = np.arange(numtaps) - (numtaps - 1) / 2.0
    f_lo = lo / fs
    f_hi = hi / fs
    h = 2 * f_hi * np.sinc(2 * f_hi * m) - 2 * f_lo * np.sinc(2 * f_lo * m)
    h *= np.hanning(numtaps + 2)[1:-1]
    centre = 0.5 * (lo + hi)
    gain = abs(np.sum(h * np.exp(-2j * np.pi * centre / fs * np.arange(numtaps))))
    return h / gain


def generate_tone(freq: float, amplitude: float, fs: float, n: int) -> np.ndarray:
    """``amplitude * sin(2*pi*freq*k/fs)`` for ``k = 0 .. n-1``."""
    if not 0 < freq < fs / 2:
        raise ValueError(f"tone frequency {freq} Hz must lie in (0, fs/2 = {fs / 2})")
    k = np.arange(int(n))
    return amplitude * np.sin(2 * np.pi * freq * k / fs)


def generate_bandlimited_noise(lo: float, hi: float, fs: float, n: int, seed: int,
                               numtaps: int = 255) -> np.ndarray:
    """Seeded white Gaussian noise through a windowed-sinc band-pass.

    Extra noise is drawn ahead of the block so the output is stationary from
    its first sample.  The variance of the output is ``sum(taps**2)``, see
    :func:`bandlimited_noise_power`.
    """
    taps = bandpass_fir(lo, hi, fs, numtaps)
    n = int(n)
    if n == 0:
        return np.zeros(0)
    rng = np.random.default_rng(np.uint64(seed & 0xFFFFFFFFFFFFFFFF))
    white = rng.standard_normal(n + numtaps - 1)
    return np.convolve(white, taps, mode="valid")


def bandlimited_noise_power(lo: float, hi: float, fs: float, numtaps: int = 255) -> float:
    """Theoretical variance of :func:`generate_bandlimited_noise` output."""
    taps = bandpass_fir(lo, hi, fs, numtaps)
    return float(np.dot(taps, taps))


def nse_db(error, disturbance, floor_db: float = NSE_FLOOR_DB) -> float:
    """Normalised squared error ``10*log10(sum e^2 / sum d^2)`` in dB."""
    e = np.asarray(error, dtype=float)
    d = np.asarray(disturbance, dtype=float)
    if e.shape != d.shape or e.size == 0:
        raise ValueError("NSE needs equal-length non-empty windows")
    den = float(np.dot(d, d))
    if den == 0.0:
        raise ValueError("NSE undefined: disturbance window has zero energy")
    num = float(np.dot(e, e))
    if num == 0.0:
        return floor_db
    return max(10.0 * math.log10(num / den), floor_db)


def nse_curve(error, disturbance, window: int, floor_db: float = NSE_FLOOR_DB) -> np.ndarray:
    """NSE over a trailing rectangular window, one value per sample.

    Samples before the first full window use the data seen so far.  Windows
    whose disturbance energy is zero yield NaN.
    """
    e2 = np.cumsum(np.square(np.asarray(error, dtype=float)))
    d2 = np.cumsum(np.square(np.asarray(disturbance, dtype=float)))
    if e2.size == 0:
        return np.zeros(0)
    e2 = np.concatenate(([0.0], e2))
    d2 = np.concatenate(([0.0], d2))
    hi = np.arange(1, e2.size)
    lo = np.maximum(hi - window, 0)
    num = e2[hi] - e2[lo]
    den = d2[hi] - d2[lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        out = 10.0 * np.log10(num / den)
    out[den <= 0] = np.nan
    out[(den > 0) & (num <= 0)] = floor_db
    return np.maximum(out, floor_db, where=np.isfinite(out), out=out)


@dataclass
class Spectrum:
    freq: np.ndarray
    power: np.ndarray = field(repr=False)

    def power_at(self, f: float) -> float:
        """Power in the bin nearest to ``f``."""
        return float(self.power[np.argmin(np.abs(self.freq - f))])

    def band_power(self, f: float, half_width: int = 1) -> float:
        """Power summed over the bin nearest ``f`` and its neighbours."""
        i = int(np.argmin(np.abs(self.freq - f)))
        return float(np.sum(self.power[max(i - half_width, 0):i + half_width + 1]))

    def __iter__(self):
        return iter(zip(self.freq, self.power))


def error_spectrum(x, fs: float, segment: int = 1024) -> Spectrum:
    """Welch power spectrum (Hann, 50% overlap) as power per bin.

    Bins hold density times bin width, so ``power.sum()`` approximates the
    mean square of ``x``.
    """
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError("cannot estimate the spectrum of an empty signal")
    if segment < 2 or segment & (segment - 1):
        raise ValueError(f"segment must be a power of two, got {segment}")
    if segment > x.size:
        raise ValueError(f"segment {segment} longer than signal ({x.size} samples)")
    f, pxx = sps.welch(x, fs=fs, window="hann", nperseg=segment, noverlap=segment // 2,
                       detrend=False, scaling="density")
    return Spectrum(f, pxx * (fs / segment))
