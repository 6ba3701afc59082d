"""Command-line entry point: ``kfopc run | suite | calibrate-leak | make-standins``.

Exit codes: 0 success, 2 configuration error, 3 controller divergence,
4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from kfopc.harness.artifacts import ArtifactError, emit_artifacts
from kfopc.harness.config import CONTROLLER_TYPES, ConfigError, load_config
from kfopc.harness.experiments import EXPERIMENTS, calibrate_leaky, run_experiment
from kfopc.harness.engine import run_closed_loop
from kfopc.harness.sources import compressor_noise, duct_impulse_response
from kfopc.io import FileFormatError, write_impulse_response, write_wav

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_IO = 4

log = logging.getLogger("kfopc")


def _summary_line(label: str, s: dict) -> str:
    nse = s["final_nse_db"]
    nse = "n/a" if nse is None else f"{nse:7.2f} dB"
    return (f"{label:<24} NSE {nse}  power {s['output_power']:.5f}  "
            f"clipped {s['clipped_samples']:>6}  alpha {s['final_alpha']:.4f}"
            + ("  DIVERGED" if s["diverged"] else ""))


def _load(args):
    cfg = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "duration", None) is not None:
        changes["duration"] = args.duration
    if getattr(args, "controller", None) is not None:
        changes["controller"] = {"type": args.controller}
    return cfg.replace(**changes) if changes else cfg


def cmd_run(args) -> int:
    cfg = _load(args)
    ra = run_closed_loop(cfg)
    if args.out:
        emit_artifacts(ra, args.out)
    print(_summary_line(cfg.name, ra.summary()))
    return EXIT_DIVERGED if ra.diverged else EXIT_OK


def cmd_suite(args) -> int:
    names = args.only or list(EXPERIMENTS)
    diverged = False
    report = {}
    for name in names:
        runs = run_experiment(name, seed=args.seed, duration=args.duration)
        for ctrl, ra in runs.items():
            s = ra.summary()
            report[f"{name}/{ctrl}"] = s
            diverged |= ra.diverged
            print(_summary_line(f"{name}/{ctrl}", s), flush=True)
            if args.out:
                emit_artifacts(ra, Path(args.out) / name / ctrl)
    if args.out:
        path = Path(args.out) / "suite.json"
        try:
            path.write_text(json.dumps(report, indent=2, default=float) + "\n", encoding="utf-8")
        except OSError as exc:
            raise ArtifactError(f"{path}: {exc.strerror or exc}") from exc
    return EXIT_DIVERGED if diverged else EXIT_OK


def cmd_calibrate_leak(args) -> int:
    cfg = _load(args)
    if cfg.controller.type not in ("fxlms", "leaky"):
        raise ConfigError(f"controller.type: calibrate-leak needs an LMS controller, got {cfg.controller.type!r}")
    target = args.target if args.target is not None else cfg.rho_o
    leak, history = calibrate_leaky(cfg, target, rtol=args.rtol)
    for lk, p in history:
        print(f"leak {lk:.6g}  output power {p:.6g}")
    print(json.dumps({"target_power": target, "leak": leak, "probes": len(history)}))
    return EXIT_OK


def cmd_make_standins(args) -> int:
    """Write the synthetic duct paths and compressor noise as data files."""
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_impulse_response(out / "primary_ir.txt", duct_impulse_response(256, 30, 40.0, 11, args.fs))
        write_impulse_response(out / "secondary_ir.txt", duct_impulse_response(64, 8, 12.0, 12, args.fs))
        n = int(round(args.duration * args.fs))
        write_wav(out / "compressor.wav", compressor_noise(n, args.fs, args.seed or 0, power=0.65), int(args.fs))
    except OSError as exc:
        raise ArtifactError(f"{out}: {exc.strerror or exc}") from exc
    print(f"wrote primary_ir.txt, secondary_ir.txt, compressor.wav to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kfopc", description="Kalman-filter ANC with output power constraint")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a single config")
    run.add_argument("--config", required=True, type=Path, help="experiment config (JSON)")
    run.add_argument("--seed", type=int, help="override the noise seed")
    run.add_argument("--duration", type=float, help="override the run length in seconds")
    run.add_argument("--controller", choices=CONTROLLER_TYPES, help="override the controller type")
    run.add_argument("--out", type=Path, help="directory for CSV traces and manifest")
    run.set_defaults(func=cmd_run)

    suite = sub.add_parser("suite", help="run the tonal, broadband and real-path experiments")
    suite.add_argument("--seed", type=int, help="override the noise seed")
    suite.add_argument("--duration", type=float, help="override every run length in seconds")
    suite.add_argument("--only", nargs="+", choices=EXPERIMENTS, help="subset of experiments")
    suite.add_argument("--out", type=Path, help="root directory for artifacts")
    suite.set_defaults(func=cmd_suite)

    cal = sub.add_parser("calibrate-leak", help="find the leak giving a target output power")
    cal.add_argument("--config", required=True, type=Path, help="leaky FxLMS config (JSON)")
    cal.add_argument("--target", type=float, help="target output power (default: the config's rho_o)")
    cal.add_argument("--rtol", type=float, default=0.02, help="relative tolerance (default 0.02)")
    cal.add_argument("--seed", type=int, help="override the noise seed")
    cal.add_argument("--duration", type=float, help="override the run length in seconds")
    cal.set_defaults(func=cmd_calibrate_leak, controller=None)

    mk = sub.add_parser("make-standins", help="write the synthetic stand-in data files")
    mk.add_argument("--out", required=True, type=Path, help="output directory")
    mk.add_argument("--fs", type=float, default=16000.0, help="sample rate in Hz")
    mk.add_argument("--duration", type=float, default=10.0, help="noise length in seconds")
    mk.add_argument("--seed", type=int, default=0, help="noise seed")
    mk.set_defaults(func=cmd_make_standins)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ArtifactError, FileFormatError, OSError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
