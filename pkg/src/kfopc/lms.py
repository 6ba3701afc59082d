"""FxLMS and leaky FxLMS baselines.

The leaky variant stands in for minimum-output-variance FxLMS: its leak
factor is calibrated empirically (:func:`calibrate_leak`) until the
steady-state output power meets a rated power.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from kfopc.signals import FirPath

log = logging.getLogger(__name__)

DEFAULT_DIVERGENCE_BOUND = 1e3


@dataclass
class LmsState:
    w: np.ndarray
    mu: float
    leak: float = 0.0
    x_filt: np.ndarray = None
    x_ref: np.ndarray = None

    def __post_init__(self):
        self.w = np.array(self.w, dtype=float)
        L = self.w.size
        if not self.mu > 0:
            raise ValueError(f"step size must be positive, got {self.mu}")
        if self.leak < 0:
            raise ValueError(f"leak must be non-negative, got {self.leak}")
        self.x_filt = np.zeros(L) if self.x_filt is None else np.array(self.x_filt, dtype=float)
        self.x_ref = np.zeros(L) if self.x_ref is None else np.array(self.x_ref, dtype=float)


class FxLMSController:
    """Filtered-x LMS with an optional leak.

    The update is ``w <- (1 - mu*leak) w + mu e x'`` with ``e = d - y'``,
    so a positive step reduces the error for a static plant.  ``leak == 0``
    is plain FxLMS.
    """

    def __init__(self, length: int, s_hat, mu: float, leak: float = 0.0,
                 divergence_bound: float = DEFAULT_DIVERGENCE_BOUND):
        taps = s_hat.taps if isinstance(s_hat, FirPath) else s_hat
        self.state = LmsState(np.zeros(length), mu, leak)
        self.divergence_bound = divergence_bound
        self._sx = FirPath(taps)
        self.diverged = False

    @property
    def w(self) -> np.ndarray:
        return self.state.w

    def output(self, x: float) -> float:
        ls = self.state
        xf = self._sx.process(x)
        ls.x_filt[1:] = ls.x_filt[:-1]
        ls.x_filt[0] = xf
        ls.x_ref[1:] = ls.x_ref[:-1]
        ls.x_ref[0] = x
        return float(ls.w @ ls.x_ref)

    def update(self, e: float) -> None:
        ls = self.state
        if ls.leak:
            ls.w *= 1.0 - ls.mu * ls.leak
        ls.w += (ls.mu * e) * ls.x_filt
        if not math.isfinite(ls.w[0]) or np.max(np.abs(ls.w)) > self.divergence_bound:
            self.diverged = True

    def step(self, x: float, e: float) -> float:
        """Update with ``e(n)`` then return the output for reference ``x(n+1)``."""
        self.update(e)
        return self.output(x)

    def snapshot(self) -> dict:
        return {"w": self.state.w.copy(), "mu": self.state.mu, "leak": self.state.leak}


def step_fxlms(ctrl: FxLMSController, x: float, e: float) -> float:
    if ctrl.state.leak:
        raise ValueError("step_fxlms needs a zero-leak controller; use step_leaky_fxlms")
    return ctrl.step(x, e)


def step_leaky_fxlms(ctrl: FxLMSController, x: float, e: float) -> float:
    return ctrl.step(x, e)


def calibrate_leak(target_power: float, probe: Callable[[float], float],
                   leak_max: float | None = None, rtol: float = 0.02,
                   max_iter: int = 40, leak_start: float = 1e-3, growth: float = 4.0) -> float:
    """Find the leak whose steady-state output power matches ``target_power``.

    ``probe(leak)`` runs a closed-loop simulation and returns the
    steady-state output power; it must be non-increasing in ``leak``.
    Bisection stops once the power is within ``rtol`` of the target.  If the
    upper bracket is not given it is found by growing ``leak_start`` by
    ``growth`` until the power drops to the target.
    """
    if not target_power > 0:
        raise ValueError(f"target power must be positive, got {target_power}")
    p0 = probe(0.0)
    if p0 <= target_power * (1 + rtol):
        if p0 < target_power * (1 - rtol):
            log.warning("target power %.4g unreachable: unconstrained output power is %.4g",
                        target_power, p0)
        return 0.0

    lo = 0.0
    if leak_max is None:
        if not (leak_start > 0 and growth > 1):
            raise ValueError("need leak_start > 0 and growth > 1")
        hi = leak_start
        for _ in range(60):
            p_hi = probe(hi)
            if p_hi <= target_power * (1 + rtol):
                break
            lo = hi
            hi *= growth
        else:
            raise RuntimeError("could not bracket the target power by increasing the leak")
    else:
        hi = leak_max
        p_hi = probe(hi)
        if p_hi > target_power * (1 + rtol):
            raise ValueError(f"leak_max={leak_max} still gives power {p_hi:.4g} > target")
    if abs(p_hi - target_power) <= rtol * target_power:
        return hi

    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        p = probe(mid)
        if abs(p - target_power) <= rtol * target_power:
            return mid
        if p > target_power:
            lo = mid
        else:
            hi = mid
    log.warning("leak calibration stopped after %d iterations at leak=%.6g", max_iter, mid)
    return mid
