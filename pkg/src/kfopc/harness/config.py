"""Experiment configuration: schema, validation and JSON round-trip.

A config is a JSON object.  Unknown keys are rejected everywhere; missing
optional keys are filled with defaults so that :meth:`ExperimentConfig.to_dict`
always returns the fully resolved form that gets written to the manifest.

Schema version 1::

    {
      "schema_version": 1,
      "name": str,
      "fs": float,                  # Hz
      "duration": float,            # s
      "seed": int,                  # noise generator seed
      "primary_path": PATH,
      "secondary_path": PATH,
      "s_hat": PATH | null,         # null: exact copy of the secondary path
      "noise": NOISE,
      "controller": CONTROLLER,
      "rho_o": float,               # rated output power for KF-OPC ("inf" allowed)
      "amplifier_power": float | null,   # amplifier rated power, null: no clipping
      "warmup": float,              # s, excluded from the clipped-sample count
      "steady_fraction": float,     # trailing fraction used for steady-state stats
      "nse_window": int,            # samples per NSE window
      "spectrum_segment": int,      # Welch segment length (power of two)
      "trace_tap": int,             # control-filter tap recorded every sample
      "divergence_bound": float     # max |w| before a run is halted
    }

    PATH  = {"type": "bandpass", "lo", "hi", "length"}
          | {"type": "identity"} | {"type": "delay", "samples"}
          | {"type": "taps", "taps": [..]}
          | {"type": "file", "path", "format": "text" | "f32le" | null}
          | {"type": "duct", "length", "delay", "decay", "seed"}
    NOISE = {"type": "tone", "freq", "amplitude" | "control_power"}
          | {"type": "bandlimited", "lo", "hi", "power", "numtaps"}
          | {"type": "compressor", "fundamental", "amplitudes", "floor_db", "power"}
          | {"type": "file", "path", "power": float | null}
          | {"type": "zero"}
    CONTROLLER = {"type": "none" | "fxlms" | "leaky" | "kf" | "kf-opc",
                  "length", "mu", "leak", "q", "r", "p0", "lam", "q_mode", "warmup"}
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

SCHEMA_VERSION = 1
MAX_FILTER_LENGTH = 512

CONTROLLER_TYPES = ("none", "fxlms", "leaky", "kf", "kf-opc")

_NUM = (int, float)
_REQUIRED = object()

# kind -> {key: (types, default)}; _REQUIRED marks mandatory keys.
PATH_KINDS = {
    "bandpass": {"lo": (_NUM, 20.0), "hi": (_NUM, 5000.0), "length": (int, _REQUIRED)},
    "identity": {},
    "delay": {"samples": (int, _REQUIRED)},
    "taps": {"taps": (list, _REQUIRED)},
    "file": {"path": (str, _REQUIRED), "format": ((str, type(None)), None)},
    "duct": {"length": (int, _REQUIRED), "delay": (int, _REQUIRED), "decay": (_NUM, _REQUIRED),
             "seed": (int, 0)},
}

NOISE_KINDS = {
    "tone": {"freq": (_NUM, _REQUIRED), "amplitude": ((*_NUM, type(None)), None),
             "control_power": ((*_NUM, type(None)), None)},
    "bandlimited": {"lo": (_NUM, _REQUIRED), "hi": (_NUM, _REQUIRED), "power": (_NUM, 1.0),
                    "numtaps": (int, 255)},
    "compressor": {"fundamental": (_NUM, 150.0), "amplitudes": (list, [1.0, 0.7, 0.5, 0.35]),
                   "floor_db": (_NUM, -20.0), "power": (_NUM, 1.0)},
    "file": {"path": (str, _REQUIRED), "power": ((*_NUM, type(None)), None)},
    "zero": {},
}


class ConfigError(ValueError):
    """Invalid experiment configuration."""


def _check_source(spec, kinds: dict, where: str) -> dict:
    if not isinstance(spec, dict):
        raise ConfigError(f"{where}: expected an object, got {type(spec).__name__}")
    kind = spec.get("type")
    if kind not in kinds:
        raise ConfigError(f"{where}.type: must be one of {sorted(kinds)}, got {kind!r}")
    allowed = kinds[kind]
    unknown = set(spec) - set(allowed) - {"type"}
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)} for type {kind!r}")
    out = {"type": kind}
    for key, (types, default) in allowed.items():
        if key in spec:
            value = spec[key]
            if isinstance(value, bool) or not isinstance(value, types):
                raise ConfigError(f"{where}.{key}: wrong type {type(value).__name__}")
            out[key] = copy.deepcopy(value)
        elif default is _REQUIRED:
            raise ConfigError(f"{where}: missing required key {key!r}")
        else:
            out[key] = copy.deepcopy(default)
    return out


def _check_path(spec, where: str) -> dict:
    out = _check_source(spec, PATH_KINDS, where)
    kind = out["type"]
    if kind == "bandpass" and not 0 < out["lo"] < out["hi"]:
        raise ConfigError(f"{where}: need 0 < lo < hi")
    if kind in ("bandpass", "duct") and out["length"] < 1:
        raise ConfigError(f"{where}.length: must be positive")
    if kind == "duct" and not 0 <= out["delay"] < out["length"]:
        raise ConfigError(f"{where}.delay: must lie in [0, length)")
    if kind == "delay" and out["samples"] < 0:
        raise ConfigError(f"{where}.samples: must be non-negative")
    if kind == "taps":
        taps = out["taps"]
        if not taps or not all(isinstance(t, _NUM) and not isinstance(t, bool) and math.isfinite(t)
                               for t in taps):
            raise ConfigError(f"{where}.taps: need a non-empty list of finite numbers")
    return out


def _check_noise(spec, where: str) -> dict:
    out = _check_source(spec, NOISE_KINDS, where)
    kind = out["type"]
    if kind == "tone" and (out["amplitude"] is None) == (out["control_power"] is None):
        raise ConfigError(f"{where}: give exactly one of 'amplitude' or 'control_power'")
    if kind in ("bandlimited", "compressor") and not out["power"] >= 0:
        raise ConfigError(f"{where}.power: must be non-negative")
    if kind == "compressor" and not all(isinstance(a, _NUM) for a in out["amplitudes"]):
        raise ConfigError(f"{where}.amplitudes: need a list of numbers")
    return out


@dataclass
class ControllerConfig:
    type: str = "kf-opc"
    length: int = 64
    mu: float | None = None
    leak: float = 0.0
    q: float = 1e-2
    r: float = 1e-6
    p0: float = 1.0
    lam: float = 0.999
    q_mode: str = "fixed"
    warmup: int | None = None

    @classmethod
    def from_dict(cls, data, where: str = "controller") -> "ControllerConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"{where}: expected an object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"{where}: unknown key(s) {sorted(unknown)}")
        cfg = cls(**data)
        cfg.validate(where)
        return cfg

    def validate(self, where: str = "controller") -> None:
        if self.type not in CONTROLLER_TYPES:
            raise ConfigError(f"{where}.type: must be one of {CONTROLLER_TYPES}, got {self.type!r}")
        if not isinstance(self.length, int) or isinstance(self.length, bool) or self.length < 1:
            raise ConfigError(f"{where}.length: must be a positive integer")
        if self.length > MAX_FILTER_LENGTH:
            raise ConfigError(f"{where}.length: {self.length} exceeds the limit of {MAX_FILTER_LENGTH}")
        if self.type in ("fxlms", "leaky"):
            if not isinstance(self.mu, _NUM) or not self.mu > 0:
                raise ConfigError(f"{where}.mu: FxLMS controllers need a positive step size")
        if not isinstance(self.leak, _NUM) or self.leak < 0:
            raise ConfigError(f"{where}.leak: must be non-negative")
        if self.type == "fxlms" and self.leak:
            raise ConfigError(f"{where}.leak: plain FxLMS has no leak, use type 'leaky'")
        for name in ("q", "r"):
            v = getattr(self, name)
            if not isinstance(v, _NUM) or v < 0:
                raise ConfigError(f"{where}.{name}: must be a non-negative number")
        if not isinstance(self.p0, _NUM) or not self.p0 > 0:
            raise ConfigError(f"{where}.p0: must be positive")
        if not isinstance(self.lam, _NUM) or not 0 < self.lam < 1:
            raise ConfigError(f"{where}.lam: must lie in (0, 1)")
        if self.q_mode not in ("fixed", "innovation"):
            raise ConfigError(f"{where}.q_mode: must be 'fixed' or 'innovation'")
        if self.warmup is not None and (not isinstance(self.warmup, int) or self.warmup < 0):
            raise ConfigError(f"{where}.warmup: must be a non-negative integer or null")


def _float_field(value, where: str, positive: bool = False, allow_inf: bool = False) -> float:
    if allow_inf and value in ("inf", "Infinity"):
        return math.inf
    if isinstance(value, bool) or not isinstance(value, _NUM):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    value = float(value)
    if math.isnan(value) or (math.isinf(value) and not allow_inf):
        raise ConfigError(f"{where}: must be finite")
    if positive and not value > 0:
        raise ConfigError(f"{where}: must be positive")
    return value


@dataclass
class ExperimentConfig:
    name: str = "run"
    fs: float = 16000.0
    duration: float = 10.0
    seed: int = 0
    primary_path: dict = field(default_factory=lambda: {"type": "bandpass", "lo": 20.0, "hi": 5000.0, "length": 128})
    secondary_path: dict = field(default_factory=lambda: {"type": "bandpass", "lo": 20.0, "hi": 5000.0, "length": 32})
    s_hat: dict | None = None
    noise: dict = field(default_factory=lambda: {"type": "zero"})
    controller: ControllerConfig = field(default_factory=ControllerConfig)
    rho_o: float = math.inf
    amplifier_power: float | None = None
    warmup: float = 0.25
    steady_fraction: float = 0.25
    nse_window: int = 1024
    spectrum_segment: int = 1024
    trace_tap: int = 0
    divergence_bound: float = 1e3
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if isinstance(self.controller, dict):
            self.controller = ControllerConfig.from_dict(self.controller)
        self.validate()

    @property
    def n_samples(self) -> int:
        return int(round(self.duration * self.fs))

    def validate(self) -> None:
        if self.schema_version != SCHEMA_VERSION:
            raise ConfigError(f"schema_version: unsupported version {self.schema_version!r}")
        if not isinstance(self.name, str):
            raise ConfigError("name: expected a string")
        self.fs = _float_field(self.fs, "fs", positive=True)
        self.duration = _float_field(self.duration, "duration")
        if self.duration < 0:
            raise ConfigError("duration: must be non-negative")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed: must be a non-negative integer")
        self.primary_path = _check_path(self.primary_path, "primary_path")
        self.secondary_path = _check_path(self.secondary_path, "secondary_path")
        if self.s_hat is not None:
            self.s_hat = _check_path(self.s_hat, "s_hat")
        self.noise = _check_noise(self.noise, "noise")
        if self.noise["type"] == "tone" and not 0 < self.noise["freq"] < self.fs / 2:
            raise ConfigError("noise.freq: must lie between 0 and fs/2")
        if self.noise["type"] in ("bandlimited",) and not 0 < self.noise["lo"] < self.noise["hi"] < self.fs / 2:
            raise ConfigError("noise: need 0 < lo < hi < fs/2")
        self.controller.validate()
        self.rho_o = _float_field(self.rho_o, "rho_o", positive=True, allow_inf=True)
        if self.amplifier_power is not None:
            self.amplifier_power = _float_field(self.amplifier_power, "amplifier_power", positive=True)
        self.warmup = _float_field(self.warmup, "warmup")
        if self.warmup < 0:
            raise ConfigError("warmup: must be non-negative")
        self.steady_fraction = _float_field(self.steady_fraction, "steady_fraction")
        if not 0 < self.steady_fraction <= 1:
            raise ConfigError("steady_fraction: must lie in (0, 1]")
        for name in ("nse_window", "spectrum_segment"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"{name}: must be a positive integer")
        if self.spectrum_segment & (self.spectrum_segment - 1):
            raise ConfigError("spectrum_segment: must be a power of two")
        if not 0 <= self.trace_tap < self.controller.length:
            raise ConfigError("trace_tap: must index a control-filter tap")
        self.divergence_bound = _float_field(self.divergence_bound, "divergence_bound",
                                             positive=True, allow_inf=True)

    @classmethod
    def from_dict(cls, data) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ConfigError("config: expected a JSON object")
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"config: unknown key(s) {sorted(unknown)}")
        try:
            return cls(**copy.deepcopy(data))
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("rho_o", "divergence_bound"):
            if math.isinf(d[key]):
                d[key] = "inf"
        return d

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level fields replaced; ``controller`` may be a partial dict."""
        d = self.to_dict()
        ctrl = changes.pop("controller", None)
        if isinstance(ctrl, dict):
            d["controller"].update(ctrl)
        elif isinstance(ctrl, ControllerConfig):
            d["controller"] = asdict(ctrl)
        d.update(changes)
        return ExperimentConfig.from_dict(d)


def load_config(path) -> ExperimentConfig:
    """Read a JSON config; relative data-file paths resolve against its folder."""
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if isinstance(data, dict):
        for key in ("primary_path", "secondary_path", "s_hat", "noise"):
            src = data.get(key)
            if isinstance(src, dict) and src.get("type") == "file" and isinstance(src.get("path"), str):
                p = Path(src["path"])
                if not p.is_absolute():
                    src["path"] = str((path.parent / p).resolve())
    return ExperimentConfig.from_dict(data)


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2) + "\n", encoding="utf-8")
