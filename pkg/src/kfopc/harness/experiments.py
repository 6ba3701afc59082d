"""The three saturation-avoidance experiments and their helpers.

* tonal: 400 Hz tone, band-pass paths, clipping amplifier at rated power 1;
  KF-ANC against KF-OPC.
* broadband: 200-2000 Hz noise, rated power 0.8; KF-ANC, KF-OPC and a leaky
  FxLMS baseline calibrated to the same rated power.
* real path: duct paths and compressor noise (synthetic stand-ins unless
  files are given), rated power 0.5; same three controllers.

Shipped configs live in ``kfopc/configs``.
"""

from __future__ import annotations

import logging
import math
from importlib import resources
from pathlib import Path

import numpy as np

from kfopc.harness.config import ExperimentConfig, load_config
from kfopc.harness.engine import RunArtifacts, run_closed_loop
from kfopc.lms import calibrate_leak

log = logging.getLogger(__name__)

EXPERIMENTS = ("tonal", "broadband", "real_path")


def shipped_config(name: str) -> ExperimentConfig:
    """Load ``kfopc/configs/<name>.json``."""
    ref = resources.files("kfopc") / "configs" / f"{name}.json"
    with resources.as_file(ref) as path:
        return load_config(path)


def _override(cfg: ExperimentConfig, seed: int | None, duration: float | None) -> ExperimentConfig:
    changes = {}
    if seed is not None:
        changes["seed"] = seed
    if duration is not None:
        changes["duration"] = duration
    return cfg.replace(**changes) if changes else cfg


def settling_index(nse: np.ndarray, level: float) -> int | None:
    """First sample from which the NSE curve stays at or below ``level``.

    ``None`` when the curve ends above the level.
    """
    above = np.flatnonzero(~(np.asarray(nse) <= level))
    if above.size == 0:
        return 0
    i = int(above[-1]) + 1
    return i if i < len(nse) else None


def sweep_mu(cfg: ExperimentConfig, k_min: int = 1, k_max: int = 24) -> float:
    """Largest step size ``2**-k`` whose run does not flag divergence."""
    for k in range(k_min, k_max + 1):
        mu = 2.0 ** -k
        ra = run_closed_loop(cfg.replace(controller={"mu": mu}))
        if not ra.diverged:
            return mu
    raise RuntimeError(f"no stable step size down to 2**-{k_max}")


def calibrate_leaky(cfg: ExperimentConfig, target_power: float, rtol: float = 0.02) -> tuple[float, list]:
    """Calibrate the leak of a leaky FxLMS config to ``target_power``.

    Returns the leak and the probe history ``[(leak, output_power), ...]``.
    """
    history = []

    def probe(leak: float) -> float:
        ra = run_closed_loop(cfg.replace(controller={"type": "leaky", "leak": leak}))
        p = math.inf if ra.diverged else ra.output_power
        history.append((leak, p))
        log.info("leak %.6g -> output power %.5g", leak, p)
        return p

    leak = calibrate_leak(target_power, probe, rtol=rtol)
    return leak, history


def _run_leaky(cfg: ExperimentConfig, target_power: float) -> RunArtifacts:
    leak, history = calibrate_leaky(cfg, target_power)
    ra = run_closed_loop(cfg.replace(controller={"type": "leaky", "leak": leak}))
    ra.extra["calibrated_leak"] = leak
    ra.extra["calibration_probes"] = len(history)
    return ra


def experiment_tonal_saturation(seed: int | None = None, duration: float | None = None) -> dict:
    """KF-ANC and KF-OPC on a saturating 400 Hz tone; keys ``kf``, ``kf-opc``."""
    base = _override(shipped_config("tonal_kf_opc"), seed, duration)
    return {
        "kf": run_closed_loop(base.replace(name="tonal_kf", controller={"type": "kf"})),
        "kf-opc": run_closed_loop(base),
    }


def experiment_broadband(seed: int | None = None, duration: float | None = None) -> dict:
    """KF-ANC, KF-OPC and calibrated leaky FxLMS on 200-2000 Hz noise."""
    kfopc = _override(shipped_config("broadband_kf_opc"), seed, duration)
    leaky = _override(shipped_config("broadband_leaky"), seed, duration)
    return {
        "kf": run_closed_loop(kfopc.replace(name="broadband_kf", controller={"type": "kf"})),
        "kf-opc": run_closed_loop(kfopc),
        "leaky": _run_leaky(leaky, kfopc.rho_o),
    }


def real_path_configs(primary_ir=None, secondary_ir=None, noise=None, rho_o: float = 0.5,
                      seed: int | None = None, duration: float | None = None,
                      noise_power: float | None = None) -> dict:
    """Configs of the real-path experiment, with optional user data files.

    Each of ``primary_ir``, ``secondary_ir`` (impulse-response files) and
    ``noise`` (mono WAV) replaces the corresponding synthetic stand-in.
    """
    out = {}
    for key in ("kf_opc", "leaky"):
        cfg = _override(shipped_config(f"real_path_{key}"), seed, duration)
        changes = {"rho_o": rho_o}
        if primary_ir is not None:
            changes["primary_path"] = {"type": "file", "path": str(Path(primary_ir))}
        if secondary_ir is not None:
            changes["secondary_path"] = {"type": "file", "path": str(Path(secondary_ir))}
        if noise is not None:
            power = noise_power if noise_power is not None else cfg.noise.get("power")
            changes["noise"] = {"type": "file", "path": str(Path(noise)), "power": power}
        out[key] = cfg.replace(**changes)
    out["kf"] = out["kf_opc"].replace(name="real_path_kf", controller={"type": "kf"})
    return out


def experiment_real_path(primary_ir=None, secondary_ir=None, noise=None, rho_o: float = 0.5,
                         seed: int | None = None, duration: float | None = None) -> dict:
    """KF-ANC, KF-OPC and calibrated leaky FxLMS on duct paths and compressor noise."""
    cfgs = real_path_configs(primary_ir, secondary_ir, noise, rho_o, seed, duration)
    return {
        "kf": run_closed_loop(cfgs["kf"]),
        "kf-opc": run_closed_loop(cfgs["kf_opc"]),
        "leaky": _run_leaky(cfgs["leaky"], rho_o),
    }


def run_experiment(name: str, seed: int | None = None, duration: float | None = None) -> dict:
    if name == "tonal":
        return experiment_tonal_saturation(seed, duration)
    if name == "broadband":
        return experiment_broadband(seed, duration)
    if name == "real_path":
        return experiment_real_path(seed=seed, duration=duration)
    raise ValueError(f"unknown experiment {name!r}; choose from {EXPERIMENTS}")
