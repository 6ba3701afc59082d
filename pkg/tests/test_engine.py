import math

import numpy as np
import pytest

from kfopc.harness.config import ExperimentConfig
from kfopc.harness.engine import run_closed_loop
from kfopc.harness.sources import (
    build_noise,
    build_path,
    compressor_noise,
    duct_impulse_response,
    tone_amplitude_for_control_power,
)
from kfopc.io import write_impulse_response, write_wav
from kfopc.signals import FirPath, bandpass_fir, error_spectrum

FS = 16000.0
IDENTITY = {"type": "identity"}


def small(**kw):
    base = dict(name="t", duration=0.25,
                noise={"type": "bandlimited", "lo": 200.0, "hi": 2000.0, "power": 1.0},
                controller={"type": "kf", "length": 16},
                primary_path={"type": "bandpass", "lo": 20.0, "hi": 5000.0, "length": 32},
                secondary_path={"type": "bandpass", "lo": 20.0, "hi": 5000.0, "length": 8})
    base.update(kw)
    return ExperimentConfig.from_dict(base)


def test_zero_noise_gives_silence():
    ra = run_closed_loop(small(noise={"type": "zero"}))
    assert not np.any(ra.e) and not np.any(ra.y)
    assert ra.final_nse_db is None


def test_disabled_controller_is_open_loop():
    ra = run_closed_loop(small(controller={"type": "none", "length": 16}))
    assert np.array_equal(ra.e, ra.d)
    assert not np.any(ra.y)


def test_identity_plant_cancels_tone_within_one_second():
    cfg = small(duration=1.0, primary_path=IDENTITY, secondary_path=IDENTITY,
                noise={"type": "tone", "freq": 400.0, "amplitude": 1.0},
                controller={"type": "kf", "length": 8})
    ra = run_closed_loop(cfg)
    assert ra.nse[-1] < -40.0
    # the optimal filter is the unit impulse
    w = ra.snapshot["w"]
    x = np.sin(2 * np.pi * 400.0 * np.arange(100) / FS)
    np.testing.assert_allclose(np.convolve(x, w)[8:100], x[8:100], atol=1e-2)


def test_trace_shapes_and_loop_identity():
    ra = run_closed_loop(small())
    n = ra.n_samples
    assert n == 4000
    for a in (ra.d, ra.e, ra.y, ra.y_amp, ra.y_prime, ra.alpha, ra.weight_trace, ra.nse, ra.clipped):
        assert a.shape == (n,)
    assert np.all(np.isfinite(ra.e)) and np.all(np.isfinite(ra.y))
    assert np.array_equal(ra.e, ra.d - ra.y_prime)
    np.testing.assert_array_equal(ra.y_amp, ra.y)


def test_secondary_path_sees_amplifier_output():
    ra = run_closed_loop(small(amplifier_power=1e-3, controller={"type": "kf", "length": 16}))
    clip = math.sqrt(2e-3)
    assert np.max(np.abs(ra.y_amp)) <= clip
    assert np.any(ra.clipped)
    s = bandpass_fir(20.0, 5000.0, FS, 8)
    np.testing.assert_allclose(ra.y_prime, FirPath(s).convolve(ra.y_amp), atol=1e-12)
    np.testing.assert_array_equal(ra.clipped, np.abs(ra.y) > clip)


def test_runs_are_deterministic():
    cfg = small(controller={"type": "kf-opc", "length": 16}, rho_o=0.1, seed=5)
    a, b = run_closed_loop(cfg), run_closed_loop(cfg)
    for key in ("d", "e", "y", "y_amp", "y_prime", "alpha", "weight_trace"):
        assert np.array_equal(getattr(a, key), getattr(b, key))
    c = run_closed_loop(cfg.replace(seed=6))
    assert not np.array_equal(a.d, c.d)


def test_infinite_rating_matches_unconstrained():
    a = run_closed_loop(small(controller={"type": "kf-opc", "length": 16}))
    b = run_closed_loop(small(controller={"type": "kf", "length": 16}))
    for key in ("e", "y", "alpha", "weight_trace"):
        assert np.array_equal(getattr(a, key), getattr(b, key))


def test_divergence_halts_with_partial_artifacts():
    cfg = small(controller={"type": "fxlms", "length": 16, "mu": 1.0})
    ra = run_closed_loop(cfg)
    assert ra.diverged
    assert ra.n_samples == ra.diverged_at + 1 < cfg.n_samples
    assert ra.nse.shape == ra.e.shape


def test_empty_run():
    ra = run_closed_loop(small(duration=0.0))
    assert ra.n_samples == 0 and ra.spectrum is None
    assert ra.output_power == 0.0


def test_steady_window_and_output_power():
    ra = run_closed_loop(small(duration=0.5))
    assert ra.steady_start == 8000 - 2000
    assert ra.output_power == pytest.approx(np.mean(ra.y_amp[6000:] ** 2), rel=1e-15)


def test_warmup_excluded_from_clip_count():
    ra = run_closed_loop(small(amplifier_power=1e-3, warmup=0.1))
    assert ra.clipped_after_warmup == int(np.count_nonzero(ra.clipped[1600:]))


def test_estimate_mismatch_runs():
    cfg = small(s_hat={"type": "bandpass", "lo": 20.0, "hi": 5000.0, "length": 12})
    ra = run_closed_loop(cfg)
    assert np.all(np.isfinite(ra.e))


# sources

def test_tone_amplitude_gives_target_control_power():
    p = bandpass_fir(20.0, 5000.0, FS, 128)
    s = bandpass_fir(20.0, 5000.0, FS, 32)
    amp = tone_amplitude_for_control_power(400.0, 4.0, p, s, FS)
    # ideal control Y = A |P| / |S|; its power is Y^2 / 2
    y = amp * abs(FirPath(p).response(400.0, FS)[0]) / abs(FirPath(s).response(400.0, FS)[0])
    assert y ** 2 / 2 == pytest.approx(4.0, rel=1e-12)


def test_tonal_config_resolves_amplitude():
    ra = run_closed_loop(small(noise={"type": "tone", "freq": 400.0, "control_power": 4.0},
                               duration=0.01))
    assert ra.config["noise"]["amplitude"] > 0
    assert ra.config["noise"]["control_power"] is None


def test_duct_response_is_normalised_and_seeded():
    h = duct_impulse_response(64, 8, 12.0, seed=3)
    assert h.size == 64 and np.linalg.norm(h) == pytest.approx(1.0)
    assert np.array_equal(h, duct_impulse_response(64, 8, 12.0, seed=3))
    assert not np.array_equal(h, duct_impulse_response(64, 8, 12.0, seed=4))
    assert np.argmax(np.abs(h)) >= 8


def test_compressor_noise_spectrum():
    x = compressor_noise(2**17, FS, seed=1, power=0.65)
    assert np.mean(x ** 2) == pytest.approx(0.65, rel=0.03)
    spec = error_spectrum(x, FS, 2048)
    floor = np.median(spec.power)
    for f in (150.0, 300.0, 450.0, 600.0):
        assert spec.band_power(f, 2) > 100 * floor


def test_compressor_rejects_aliasing_harmonics():
    with pytest.raises(ValueError, match="Nyquist"):
        compressor_noise(10, 1000.0, 0, fundamental=150.0)


def test_file_sources(tmp_path):
    write_impulse_response(tmp_path / "p.txt", [0.0, 1.0])
    write_wav(tmp_path / "n.wav", np.full(100, 0.5), 16000)
    assert build_path({"type": "file", "path": str(tmp_path / "p.txt"), "format": None}, FS).tolist() == [0.0, 1.0]
    x = build_noise({"type": "file", "path": str(tmp_path / "n.wav"), "power": 1.0}, FS, 50, 0)
    assert x.size == 50 and np.allclose(x, 1.0)
    with pytest.raises(ValueError, match="sample rate"):
        build_noise({"type": "file", "path": str(tmp_path / "n.wav"), "power": None}, 8000.0, 50, 0)
    with pytest.raises(ValueError, match="needs 200"):
        build_noise({"type": "file", "path": str(tmp_path / "n.wav"), "power": None}, FS, 200, 0)


def test_delay_and_taps_paths():
    assert build_path({"type": "delay", "samples": 2}, FS).tolist() == [0.0, 0.0, 1.0]
    assert build_path({"type": "taps", "taps": [0.5, 0.25]}, FS).tolist() == [0.5, 0.25]
