import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from kfopc.harness.config import (
    MAX_FILTER_LENGTH,
    ConfigError,
    ControllerConfig,
    ExperimentConfig,
    load_config,
    save_config,
)
from kfopc.harness.experiments import shipped_config

SHIPPED = ["tonal_kf", "tonal_kf_opc", "broadband_kf", "broadband_kf_opc", "broadband_leaky",
           "real_path_kf", "real_path_kf_opc", "real_path_leaky"]


def test_defaults_are_valid():
    cfg = ExperimentConfig()
    assert cfg.fs == 16000.0 and cfg.duration == 10.0
    assert cfg.steady_fraction == 0.25
    assert cfg.n_samples == 160000


@pytest.mark.parametrize("name", SHIPPED)
def test_shipped_configs_load_and_round_trip(name, tmp_path):
    cfg = shipped_config(name)
    assert cfg.name == name
    path = tmp_path / "c.json"
    save_config(cfg, path)
    assert load_config(path).to_dict() == cfg.to_dict()


def test_shipped_lms_configs_record_step_size():
    for name in ("broadband_leaky", "real_path_leaky"):
        mu = shipped_config(name).controller.mu
        assert mu > 0 and math.log2(mu) == int(math.log2(mu))


def test_to_dict_is_json_and_resolved():
    cfg = ExperimentConfig(noise={"type": "bandlimited", "lo": 100, "hi": 900})
    d = json.loads(json.dumps(cfg.to_dict()))
    assert d["rho_o"] == "inf"
    assert d["noise"] == {"type": "bandlimited", "lo": 100, "hi": 900, "power": 1.0, "numtaps": 255}
    assert d["controller"]["q"] == 1e-2
    assert ExperimentConfig.from_dict(d).to_dict() == cfg.to_dict()


@pytest.mark.parametrize("patch,match", [
    ({"bogus": 1}, "unknown key"),
    ({"controller": {"type": "kf", "gain": 2}}, "unknown key"),
    ({"noise": {"type": "tone", "freq": 400, "amplitude": 1, "phase": 0}}, "unknown key"),
    ({"schema_version": 2}, "schema_version"),
    ({"fs": -1}, "fs"),
    ({"fs": "fast"}, "fs"),
    ({"duration": -1}, "duration"),
    ({"seed": -3}, "seed"),
    ({"seed": 1.5}, "seed"),
    ({"controller": {"type": "rls"}}, "controller.type"),
    ({"controller": {"length": MAX_FILTER_LENGTH + 1}}, "exceeds"),
    ({"controller": {"type": "fxlms"}}, "mu"),
    ({"controller": {"type": "fxlms", "mu": 0.1, "leak": 1.0}}, "leak"),
    ({"controller": {"lam": 1.0}}, "lam"),
    ({"controller": {"q_mode": "auto"}}, "q_mode"),
    ({"noise": {"type": "tone", "freq": 400}}, "exactly one"),
    ({"noise": {"type": "tone", "freq": 9000, "amplitude": 1}}, "freq"),
    ({"noise": {"type": "bandlimited", "lo": 500, "hi": 200}}, "lo < hi"),
    ({"noise": {"type": "white"}}, "noise.type"),
    ({"primary_path": {"type": "bandpass"}}, "missing required key 'length'"),
    ({"primary_path": {"type": "taps", "taps": []}}, "taps"),
    ({"primary_path": {"type": "duct", "length": 8, "delay": 9, "decay": 2.0}}, "delay"),
    ({"secondary_path": {"type": "bandpass", "length": "32"}}, "wrong type"),
    ({"rho_o": 0}, "rho_o"),
    ({"amplifier_power": -1}, "amplifier_power"),
    ({"steady_fraction": 0}, "steady_fraction"),
    ({"spectrum_segment": 1000}, "power of two"),
    ({"trace_tap": 64}, "trace_tap"),
])
def test_invalid_configs_rejected(patch, match):
    with pytest.raises(ConfigError, match=match):
        ExperimentConfig.from_dict(patch)


def test_replace_merges_partial_controller():
    cfg = shipped_config("broadband_leaky")
    new = cfg.replace(seed=9, controller={"leak": 3.0})
    assert new.seed == 9 and new.controller.leak == 3.0
    assert new.controller.mu == cfg.controller.mu
    assert cfg.controller.leak == 0.0


def test_load_resolves_relative_file_paths(tmp_path):
    (tmp_path / "data").mkdir()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"primary_path": {"type": "file", "path": "data/p.txt"}}))
    cfg = load_config(path)
    assert cfg.primary_path["path"] == str((tmp_path / "data" / "p.txt").resolve())


def test_load_reports_json_position(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text('{"name": "x",\n  "fs": }')
    with pytest.raises(ConfigError, match=r"bad\.json:2:"):
        load_config(path)


def test_non_object_rejected():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict([1, 2])
    with pytest.raises(ConfigError):
        ControllerConfig.from_dict("kf")


@given(st.integers(0, 2**31), st.floats(0.0, 5.0), st.sampled_from(["kf", "kf-opc", "none"]),
       st.integers(1, 64), st.floats(0.01, 10.0) | st.just(math.inf))
def test_round_trip_property(seed, duration, ctype, length, rho):
    cfg = ExperimentConfig(seed=seed, duration=duration, rho_o=rho,
                           controller={"type": ctype, "length": length})
    again = ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again == cfg
