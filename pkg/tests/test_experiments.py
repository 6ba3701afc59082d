import math

import numpy as np
import pytest

from kfopc.harness.engine import run_closed_loop
from kfopc.harness.experiments import (
    calibrate_leaky,
    real_path_configs,
    settling_index,
    shipped_config,
    sweep_mu,
)

STEADY_BAND_DB = 2.0


def steady_band_index(ra):
    """First sample from which NSE stays within STEADY_BAND_DB above its final value."""
    return settling_index(ra.nse, ra.final_nse_db + STEADY_BAND_DB)


def test_settling_index():
    assert settling_index(np.array([0.0, -5.0, -12.0, -11.0]), -10.0) == 2
    assert settling_index(np.array([-12.0, -11.0]), -10.0) == 0
    assert settling_index(np.array([-12.0, -9.0]), -10.0) is None
    assert settling_index(np.array([-12.0, np.nan, -12.0]), -10.0) == 2


# tonal

def test_tonal_kf_opc_respects_clip_level(tonal_runs):
    opc = tonal_runs["kf-opc"]
    assert np.max(np.abs(opc.y_amp)) <= math.sqrt(2.0)
    assert np.max(np.abs(opc.y[opc.warmup_samples:])) <= math.sqrt(2.0)
    assert 0.0 < opc.final_alpha < 1.0


def test_tonal_amplitude_is_saturating(tonal_runs):
    kf = tonal_runs["kf"]
    assert kf.config["noise"]["amplitude"] == pytest.approx(2.7587, abs=1e-4)
    assert np.max(np.abs(kf.y)) > math.sqrt(2.0)


# broadband

def test_broadband_unconstrained_exceeds_rating(broadband_runs):
    assert broadband_runs["kf"].output_power > 0.8


def test_broadband_leaky_calibrated_to_rating(broadband_runs):
    leaky = broadband_runs["leaky"]
    assert leaky.extra["calibrated_leak"] > 0
    assert leaky.output_power == pytest.approx(0.8, rel=0.02)


def test_broadband_kf_opc_settles_before_leaky(broadband_runs):
    opc = steady_band_index(broadband_runs["kf-opc"])
    leaky = steady_band_index(broadband_runs["leaky"])
    assert opc is not None and leaky is not None
    assert opc < leaky


def test_broadband_kf_opc_beats_leaky_nse(broadband_runs):
    assert broadband_runs["kf-opc"].final_nse_db < broadband_runs["leaky"].final_nse_db


# real path (stand-in data)

def test_real_path_kf_opc_power(real_path_runs):
    for seed, runs in real_path_runs.items():
        assert runs["kf-opc"].output_power <= 0.5 * 1.02, seed


def test_real_path_nse_ordering(real_path_runs):
    for seed, runs in real_path_runs.items():
        kf, opc, leaky = (runs[k].final_nse_db for k in ("kf", "kf-opc", "leaky"))
        assert kf <= opc <= leaky, seed


def test_real_path_leaky_power(real_path_runs):
    for runs in real_path_runs.values():
        assert runs["leaky"].output_power == pytest.approx(0.5, rel=0.02)


def test_real_path_is_deterministic():
    cfg = real_path_configs(seed=3, duration=0.5)["kf_opc"]
    a, b = run_closed_loop(cfg), run_closed_loop(cfg)
    for key in ("d", "e", "y", "y_amp", "y_prime", "alpha", "weight_trace", "nse"):
        assert np.array_equal(getattr(a, key), getattr(b, key), equal_nan=True)
    assert a.summary() | {"runtime_s": 0} == b.summary() | {"runtime_s": 0}


# every KF-OPC run of the suite keeps its rating

def test_constraint_property(tonal_runs, broadband_runs, real_path_runs):
    runs = [tonal_runs["kf-opc"], broadband_runs["kf-opc"]]
    runs += [r["kf-opc"] for r in real_path_runs.values()]
    for ra in runs:
        rho = float(ra.config["rho_o"])
        assert ra.output_power <= rho * 1.05, ra.config["name"]


# step-size sweep and calibration helpers

def test_shipped_step_sizes_are_sweep_results():
    for name in ("broadband_leaky", "real_path_leaky"):
        cfg = shipped_config(name)
        short = cfg.replace(duration=1.0, controller={"type": "fxlms", "leak": 0.0})
        assert sweep_mu(short, k_min=int(-math.log2(cfg.controller.mu)) - 1) == cfg.controller.mu


def test_calibration_history_monotone():
    cfg = shipped_config("broadband_leaky").replace(duration=0.5)
    leak, history = calibrate_leaky(cfg, 0.8)
    leaks, powers = zip(*sorted(history))
    assert leak in leaks
    assert all(a >= b for a, b in zip(powers, powers[1:]))
