"""Kalman-filter active noise control with an output power constraint.

The package is split into four layers:

* :mod:`kfopc.signals` -- FIR paths, generators, the clipping amplifier and
  signal statistics.
* :mod:`kfopc.kalman` -- the KF-ANC recursion and its output-power-constrained
  (KF-OPC) variant.
* :mod:`kfopc.lms` -- FxLMS and leaky FxLMS baselines.
* :mod:`kfopc.harness` -- closed-loop engine, experiment configs and the CLI.
"""

from kfopc.kalman import (
    ConstraintEstimators,
    ControllerStep,
    KalmanController,
    KalmanState,
    compute_alpha,
    correct,
    kalman_gain,
    time_update,
)
from kfopc.lms import FxLMSController, LmsState, calibrate_leak
from kfopc.signals import (
    FirPath,
    RunningPower,
    SaturatingAmplifier,
    bandpass_fir,
    error_spectrum,
    generate_bandlimited_noise,
    generate_tone,
    nse_db,
)

__version__ = "0.1.0"

__all__ = [
    "ConstraintEstimators",
    "ControllerStep",
    "FirPath",
    "FxLMSController",
    "KalmanController",
    "KalmanState",
    "LmsState",
    "RunningPower",
    "SaturatingAmplifier",
    "bandpass_fir",
    "calibrate_leak",
    "compute_alpha",
    "correct",
    "error_spectrum",
    "generate_bandlimited_noise",
    "generate_tone",
    "kalman_gain",
    "nse_db",
    "time_update",
]
