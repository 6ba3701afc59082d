"""Kalman-filter ANC (KF-ANC) and the output-power-constrained variant (KF-OPC).

The control filter ``w`` is the Kalman state, driven by a random walk with
per-tap variance ``r``.  The measurement is the disturbance at the error
microphone, observed through the filtered reference ``x'`` with noise
variance ``q``::

    w(n) = w(n-1) + v(n)
    d(n) = x'(n)^T w(n) + e_o(n)

KF-OPC multiplies the measurement by a constraint factor ``alpha`` chosen so
that the power of the control output matches the rated power ``rho_o``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from kfopc.signals import FirPath, RunningPower

DEFAULT_Q = 1e-2
DEFAULT_R = 1e-6
DEFAULT_P0 = 1.0
DEFAULT_LAMBDA = 0.999
DEFAULT_DIVERGENCE_BOUND = 1e3


@dataclass
class KalmanState:
    """Control-filter estimate, its error covariance and the noise variances.

    ``x_filt`` is the delay line of the filtered reference, newest sample
    first; it is the observation row of the current measurement.
    """

    w_hat: np.ndarray
    P: np.ndarray
    q: float = DEFAULT_Q
    r: float = DEFAULT_R
    x_filt: np.ndarray = None

    def __post_init__(self):
        self.w_hat = np.array(self.w_hat, dtype=float)
        P = np.array(self.P, dtype=float)
        L = self.w_hat.size
        if P.shape != (L, L):
            raise ValueError(f"covariance shape {P.shape} does not match filter length {L}")
        # The correction relies on bitwise symmetry.
        self.P = 0.5 * (P + P.T)
        if self.x_filt is None:
            self.x_filt = np.zeros(L)
        else:
            self.x_filt = np.array(self.x_filt, dtype=float)
        if self.q < 0 or self.r < 0:
            raise ValueError("noise variances q and r must be non-negative")

    @classmethod
    def initial(cls, length: int, p0: float = DEFAULT_P0, q: float = DEFAULT_Q,
                r: float = DEFAULT_R) -> "KalmanState":
        """Zero filter with covariance ``p0 * I``."""
        return cls(np.zeros(length), p0 * np.eye(length), q=q, r=r)

    @property
    def length(self) -> int:
        return self.w_hat.size

    def push_filtered(self, value: float) -> None:
        """Shift a new filtered-reference sample into ``x_filt``."""
        self.x_filt[1:] = self.x_filt[:-1]
        self.x_filt[0] = value


def time_update(ks: KalmanState) -> KalmanState:
    """Predict step: the estimate carries over, the covariance grows by ``r*I``."""
    if ks.r:
        ks.P.flat[::ks.length + 1] += ks.r
    return ks


def kalman_gain(ks: KalmanState) -> np.ndarray:
    """``K = P x' / (x'^T P x' + q)`` using the prior covariance."""
    Px = ks.P @ ks.x_filt
    denom = float(ks.x_filt @ Px) + ks.q
    if not denom > 0.0:
        raise ValueError(
            f"Kalman gain undefined: innovation variance x'^T P x' + q = {denom!r} "
            f"(q={ks.q}); x' lies in the null space of P"
        )
    return Px / denom


def correct(ks: KalmanState, d_meas: float, alpha: float = 1.0) -> KalmanState:
    """Measurement update with the measurement scaled by ``alpha``.

    With ``alpha == 1`` this is the plain Kalman correction.  The covariance
    uses ``P <- (I - K x'^T) P`` followed by explicit symmetrisation.
    """
    denom = _correct_inplace(ks.w_hat, ks.P, ks.x_filt, float(d_meas), float(alpha), float(ks.q))
    if not denom > 0.0:
        raise ValueError(
            f"Kalman gain undefined: innovation variance x'^T P x' + q = {denom!r} "
            f"(q={ks.q}); x' lies in the null space of P"
        )
    return ks


@njit(cache=True)
def _correct_inplace(w, P, xf, d, alpha, q):
    # Returns the innovation variance; state is untouched when it is not > 0.
    L = w.size
    Px = np.empty(L)
    for i in range(L):
        acc = 0.0
        for j in range(L):
            acc += P[i, j] * xf[j]
        Px[i] = acc
    denom = q
    prior = 0.0
    for i in range(L):
        denom += xf[i] * Px[i]
        prior += xf[i] * w[i]
    if not denom > 0.0:
        return denom
    innovation = alpha * d - prior
    K = Px / denom
    for i in range(L):
        w[i] += K[i] * innovation
    # P is exactly symmetric on entry, so x'^T P == (P x')^T.  Splitting the
    # rank-one term evenly keeps P bitwise symmetric (fp addition commutes),
    # which is (P + P^T)/2 of the plain update.
    for i in range(L):
        ki = K[i]
        pi = Px[i]
        for j in range(L):
            P[i, j] -= 0.5 * (ki * Px[j] + K[j] * pi)
    return denom


@dataclass
class ConstraintEstimators:
    """Running statistics behind the constraint factor.

    ``delta_d_sq`` tracks the disturbance power, ``pow_x`` and ``pow_x_filt``
    the reference and filtered-reference powers whose ratio is the secondary
    path gain.
    """

    rho_o: float
    delta_d_sq: RunningPower = field(default_factory=RunningPower)
    pow_x: RunningPower = field(default_factory=RunningPower)
    pow_x_filt: RunningPower = field(default_factory=RunningPower)
    alpha: float = 1.0

    def __post_init__(self):
        if not self.rho_o > 0:
            raise ValueError(f"rated output power must be positive, got {self.rho_o}")

    @classmethod
    def with_lambda(cls, rho_o: float, lam: float = DEFAULT_LAMBDA) -> "ConstraintEstimators":
        return cls(rho_o, RunningPower(lam), RunningPower(lam), RunningPower(lam))

    @property
    def gs(self) -> float:
        """Secondary path gain estimate, NaN while the reference power is zero."""
        px = self.pow_x.mean
        return self.pow_x_filt.mean / px if px > 0 else math.nan


def compute_alpha(ce: ConstraintEstimators) -> float:
    """``alpha = min(sqrt(rho_o * Gs / delta_d^2), 1)``, stored on ``ce``.

    With zero reference power (or a zero path gain) the previous value is
    kept; with zero disturbance power nothing needs constraining and alpha
    is 1.
    """
    px = ce.pow_x.mean
    if not px > 0.0 or math.isinf(ce.rho_o):
        if math.isinf(ce.rho_o):
            ce.alpha = 1.0
        return ce.alpha
    gs = ce.pow_x_filt.mean / px
    dd = ce.delta_d_sq.mean
    if not gs > 0.0:
        return ce.alpha
    if not dd > 0.0:
        ce.alpha = 1.0
        return 1.0
    ce.alpha = min(math.sqrt(ce.rho_o * gs / dd), 1.0)
    return ce.alpha


@dataclass
class ControllerStep:
    """Signals exchanged during one sample cycle."""

    x: float
    d_hat: float
    y: float


class KalmanController:
    """Per-sample KF-ANC / KF-OPC controller in the modified ANC structure.

    Call :meth:`output` with each reference sample to get the control signal
    and :meth:`update` with the resulting error sample.  :meth:`step` bundles
    the two the other way round (update with the last error, then emit the
    output for the next reference).

    Parameters
    ----------
    length : int
        Control filter length ``L``.
    s_hat : array_like or FirPath
        Secondary path estimate.
    rho_o : float
        Rated output power; ``inf`` disables the constraint.
    constrained : bool
        ``False`` pins alpha to 1 (plain KF-ANC).
    q, r, p0 : float
        Measurement-noise variance, state-noise variance and initial
        covariance scale.
    lam : float
        Forgetting factor of the power estimators.
    q_mode : {"fixed", "innovation"}
        ``"innovation"`` replaces ``q`` by the running power of the
        innovation, floored at ``q_min``.
    warmup : int, optional
        Samples before the constraint factor is trusted, default ``2*L``.
    """

    def __init__(self, length: int, s_hat, rho_o: float = math.inf, constrained: bool = True,
                 q: float = DEFAULT_Q, r: float = DEFAULT_R, p0: float = DEFAULT_P0,
                 lam: float = DEFAULT_LAMBDA, q_mode: str = "fixed", q_min: float = 1e-8,
                 warmup: int | None = None, divergence_bound: float = DEFAULT_DIVERGENCE_BOUND):
        if length < 1:
            raise ValueError("filter length must be positive")
        if q_mode not in ("fixed", "innovation"):
            raise ValueError(f"unknown q_mode {q_mode!r}")
        taps = s_hat.taps if isinstance(s_hat, FirPath) else s_hat
        self.state = KalmanState.initial(length, p0=p0, q=q, r=r)
        self.estimators = ConstraintEstimators.with_lambda(rho_o, lam)
        self.constrained = constrained
        self.q_mode = q_mode
        self.q_min = q_min
        self._innovation_power = RunningPower(lam, value=q, weight=1.0)
        self.warmup = 2 * length if warmup is None else int(warmup)
        self.divergence_bound = divergence_bound
        self._sx = FirPath(taps)
        self._sy = FirPath(taps)
        self._pow_y = RunningPower(lam)
        self.x_ref = np.zeros(length)
        self._x = 0.0
        self._xf = 0.0
        self._y = 0.0
        self._n = 0
        self._warm_alpha: float | None = None
        self.diverged = False

    @property
    def w(self) -> np.ndarray:
        return self.state.w_hat

    @property
    def alpha(self) -> float:
        return self.estimators.alpha

    def output(self, x: float) -> float:
        """Consume reference ``x(n)`` and return control ``y(n)``.

        ``x`` also passes through the secondary path estimate to extend the
        filtered-reference delay line used as the next observation row.
        """
        xf = self._sx.process(x)
        self.state.push_filtered(xf)
        ref = self.x_ref
        ref[1:] = ref[:-1]
        ref[0] = x
        self._x = x
        self._xf = xf
        self._y = float(self.state.w_hat @ ref)
        return self._y

    def update(self, e: float) -> float:
        """Adapt on error ``e(n)``; returns the disturbance estimate."""
        d_hat = e + self._sy.process(self._y)
        ce = self.estimators
        ce.delta_d_sq.update(d_hat)
        ce.pow_x.update(self._x)
        ce.pow_x_filt.update(self._xf)
        self._pow_y.update(self._y)
        self._n += 1

        ks = time_update(self.state)
        alpha = self._next_alpha() if self.constrained else 1.0
        if self.q_mode == "innovation":
            innov = alpha * d_hat - float(ks.x_filt @ ks.w_hat)
            ks.q = max(self._innovation_power.update(innov), self.q_min)
        correct(ks, d_hat, alpha)
        w = ks.w_hat
        if not np.all(np.isfinite(w)) or np.max(np.abs(w)) > self.divergence_bound:
            self.diverged = True
        return d_hat

    def _next_alpha(self) -> float:
        ce = self.estimators
        if self._n > self.warmup:
            return compute_alpha(ce)
        # Start-up: statistics are too short to trust, keep alpha at 1 until
        # the output overshoots the rating, then freeze the first estimate.
        if self._warm_alpha is None:
            if self._pow_y.mean <= ce.rho_o:
                ce.alpha = 1.0
                return 1.0
            self._warm_alpha = compute_alpha(ce)
        ce.alpha = self._warm_alpha
        return ce.alpha

    def step(self, x: float, e: float) -> ControllerStep:
        """Update with ``e(n)`` then emit the output for reference ``x(n+1)``."""
        d_hat = self.update(e)
        y = self.output(x)
        return ControllerStep(x=x, d_hat=d_hat, y=y)

    def snapshot(self) -> dict:
        return {
            "w": self.state.w_hat.copy(),
            "P_diag": np.diag(self.state.P).copy(),
            "alpha": self.alpha,
            "q": self.state.q,
        }
