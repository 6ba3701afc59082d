"""Closed-loop single-channel ANC simulation.

Per sample ``n``::

    d(n)  = [P x](n)
    y(n)  = controller output for x(n)
    ya(n) = saturate(y(n))
    y'(n) = [S ya](n)
    e(n)  = d(n) - y'(n)

and the controller then adapts on ``e(n)``.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from kfopc.harness.config import ExperimentConfig
from kfopc.harness.sources import build_noise, build_path, tone_amplitude_for_control_power
from kfopc.kalman import KalmanController
from kfopc.lms import FxLMSController
from kfopc.signals import FirPath, SaturatingAmplifier, Spectrum, error_spectrum, nse_curve, nse_db

log = logging.getLogger(__name__)


class NullController:
    """Controller frozen at zero: the loop runs open."""

    diverged = False
    alpha = 1.0

    def __init__(self, length: int):
        self.w = np.zeros(length)

    def output(self, x: float) -> float:
        return 0.0

    def update(self, e: float) -> None:
        pass

    def snapshot(self) -> dict:
        return {"w": self.w.copy()}


def make_controller(cfg: ExperimentConfig, s_hat: np.ndarray):
    c = cfg.controller
    if c.type == "none":
        return NullController(c.length)
    if c.type in ("fxlms", "leaky"):
        return FxLMSController(c.length, s_hat, mu=c.mu, leak=c.leak if c.type == "leaky" else 0.0,
                               divergence_bound=cfg.divergence_bound)
    return KalmanController(c.length, s_hat, rho_o=cfg.rho_o, constrained=c.type == "kf-opc",
                            q=c.q, r=c.r, p0=c.p0, lam=c.lam, q_mode=c.q_mode, warmup=c.warmup,
                            divergence_bound=cfg.divergence_bound)


@dataclass
class RunArtifacts:
    """Traces and summaries of one closed-loop run."""

    config: dict
    d: np.ndarray
    e: np.ndarray
    y: np.ndarray
    y_amp: np.ndarray
    y_prime: np.ndarray
    alpha: np.ndarray
    weight_trace: np.ndarray
    nse: np.ndarray
    spectrum: Spectrum | None
    snapshot: dict
    clipped: np.ndarray
    warmup_samples: int
    steady_start: int
    diverged: bool = False
    diverged_at: int | None = None
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.e.size

    @property
    def out_power(self) -> np.ndarray:
        """Instantaneous output power after the amplifier."""
        return np.square(self.y_amp)

    @property
    def output_power(self) -> float:
        """Mean of ``y_amp**2`` over the steady-state window."""
        w = self.y_amp[self.steady_start:]
        return float(np.mean(np.square(w))) if w.size else 0.0

    @property
    def final_nse_db(self) -> float | None:
        e = self.e[self.steady_start:]
        d = self.d[self.steady_start:]
        if e.size == 0 or not np.any(d):
            return None
        return nse_db(e, d)

    @property
    def clipped_after_warmup(self) -> int:
        return int(np.count_nonzero(self.clipped[self.warmup_samples:]))

    @property
    def final_alpha(self) -> float:
        return float(self.alpha[-1]) if self.alpha.size else 1.0

    def summary(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "steady_start": self.steady_start,
            "final_nse_db": self.final_nse_db,
            "output_power": self.output_power,
            "clipped_samples": self.clipped_after_warmup,
            "clipped_samples_total": int(np.count_nonzero(self.clipped)),
            "final_alpha": self.final_alpha,
            "diverged": self.diverged,
            "diverged_at": self.diverged_at,
            "runtime_s": self.runtime_s,
            **self.extra,
        }


def resolve(cfg: ExperimentConfig) -> ExperimentConfig:
    """Fill in derived values (tone amplitude from a target control power)."""
    noise = cfg.noise
    if noise["type"] == "tone" and noise["amplitude"] is None:
        primary = build_path(cfg.primary_path, cfg.fs)
        secondary = build_path(cfg.secondary_path, cfg.fs)
        amp = tone_amplitude_for_control_power(noise["freq"], noise["control_power"],
                                               primary, secondary, cfg.fs)
        return cfg.replace(noise={**noise, "amplitude": amp, "control_power": None})
    return cfg


def run_closed_loop(cfg: ExperimentConfig) -> RunArtifacts:
    """Simulate one run; deterministic for a given config.

    A controller that flags divergence halts the run; the artifacts then
    cover the samples up to and including the diverging one.
    """
    t0 = time.perf_counter()
    cfg = resolve(cfg)
    fs = cfg.fs
    n = cfg.n_samples
    primary = build_path(cfg.primary_path, fs)
    secondary = build_path(cfg.secondary_path, fs)
    s_hat = secondary if cfg.s_hat is None else build_path(cfg.s_hat, fs)

    x = build_noise(cfg.noise, fs, n, cfg.seed)
    d = FirPath(primary).convolve(x)
    ctrl = make_controller(cfg, s_hat)
    s_path = FirPath(secondary)
    amp = SaturatingAmplifier.from_rated_power(cfg.amplifier_power) if cfg.amplifier_power else None

    e = np.zeros(n)
    y = np.zeros(n)
    y_amp = np.zeros(n)
    y_prime = np.zeros(n)
    alpha = np.ones(n)
    w_trace = np.zeros(n)
    clipped = np.zeros(n, dtype=bool)
    tap = cfg.trace_tap
    has_alpha = isinstance(ctrl, KalmanController)

    output, update, s_step = ctrl.output, ctrl.update, s_path.process
    w = ctrl.w
    diverged_at = None
    for i in range(n):
        yi = output(x[i])
        y[i] = yi
        if amp is not None:
            ya = amp(yi)
            clipped[i] = ya != yi
        else:
            ya = yi
        y_amp[i] = ya
        yp = s_step(ya)
        y_prime[i] = yp
        ei = d[i] - yp
        e[i] = ei
        update(ei)
        if has_alpha:
            alpha[i] = ctrl.alpha
        w_trace[i] = w[tap]
        if ctrl.diverged:
            diverged_at = i
            log.warning("%s: controller diverged at sample %d", cfg.name, i)
            break

    if diverged_at is not None:
        m = diverged_at + 1
        d, e, y, y_amp, y_prime, alpha, w_trace, clipped = (
            a[:m] for a in (d, e, y, y_amp, y_prime, alpha, w_trace, clipped))
        n = m

    steady_start = n - int(math.ceil(cfg.steady_fraction * n)) if n else 0
    spec = None
    seg = cfg.spectrum_segment
    if n - steady_start >= seg:
        spec = error_spectrum(e[steady_start:], fs, seg)
    elif n >= seg:
        spec = error_spectrum(e, fs, seg)

    return RunArtifacts(
        config=cfg.to_dict(),
        d=d, e=e, y=y, y_amp=y_amp, y_prime=y_prime, alpha=alpha, weight_trace=w_trace,
        nse=nse_curve(e, d, cfg.nse_window),
        spectrum=spec,
        snapshot=ctrl.snapshot(),
        clipped=clipped,
        warmup_samples=min(int(round(cfg.warmup * fs)), n),
        steady_start=steady_start,
        diverged=diverged_at is not None,
        diverged_at=diverged_at,
        runtime_s=time.perf_counter() - t0,
    )
