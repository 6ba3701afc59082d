"""Writing run artifacts: CSV traces and a JSON manifest.

Every float is written with ``repr`` so that reading a CSV back with
``float()`` reproduces the in-memory value exactly.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from kfopc.harness.engine import RunArtifacts

TRACE_HEADER = ("sample", "time_s", "d", "e", "y", "y_amp", "y_prime", "alpha", "out_power", "clipped")
NSE_HEADER = ("sample", "time_s", "nse_db")
SPECTRUM_HEADER = ("freq_hz", "power_per_bin")
WEIGHTS_HEADER = ("tap", "w")
WEIGHT_HISTORY_HEADER = ("sample", "time_s", "w_tap")

FILES = {
    "traces": "traces.csv",
    "nse": "nse.csv",
    "spectrum": "spectrum.csv",
    "weights": "weights.csv",
    "weight_history": "weight_history.csv",
    "manifest": "manifest.json",
}


class ArtifactError(OSError):
    """Writing an artifact failed; the message names the file."""


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def _write_csv(path: Path, header, columns) -> None:
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            out = csv.writer(fh)
            out.writerow(header)
            for row in zip(*columns):
                out.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise ArtifactError(f"{path}: {exc.strerror or exc}") from exc


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return v


def manifest(ra: RunArtifacts) -> dict:
    return {
        "schema_version": ra.config.get("schema_version", 1),
        "config": _jsonable(ra.config),
        "seed": ra.config.get("seed"),
        "summary": _jsonable(ra.summary()),
        "files": {k: v for k, v in FILES.items() if k != "manifest"},
    }


def emit_artifacts(ra: RunArtifacts, directory) -> dict[str, Path]:
    """Write the CSV files and ``manifest.json`` of a run into ``directory``.

    A zero-length run writes headers-only CSVs.  Returns the written paths
    keyed as in :data:`FILES`.
    """
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ArtifactError(f"{directory}: cannot create output directory: {exc.strerror or exc}") from exc

    fs = float(ra.config["fs"])
    n = ra.n_samples
    idx = np.arange(n)
    t = idx / fs
    paths = {k: directory / v for k, v in FILES.items()}

    _write_csv(paths["traces"], TRACE_HEADER,
               (idx, t, ra.d, ra.e, ra.y, ra.y_amp, ra.y_prime, ra.alpha, ra.out_power, ra.clipped))
    _write_csv(paths["nse"], NSE_HEADER, (idx, t, ra.nse))
    spec = ra.spectrum
    if spec is None:
        _write_csv(paths["spectrum"], SPECTRUM_HEADER, ((), ()))
    else:
        _write_csv(paths["spectrum"], SPECTRUM_HEADER, (spec.freq, spec.power))
    w = np.asarray(ra.snapshot.get("w", ())) if n else np.zeros(0)
    p_diag = ra.snapshot.get("P_diag")
    if p_diag is None:
        _write_csv(paths["weights"], WEIGHTS_HEADER, (np.arange(w.size), w))
    else:
        p_diag = np.asarray(p_diag) if n else np.zeros(0)
        _write_csv(paths["weights"], WEIGHTS_HEADER + ("p_diag",), (np.arange(w.size), w, p_diag))
    _write_csv(paths["weight_history"], WEIGHT_HISTORY_HEADER, (idx, t, ra.weight_trace))

    try:
        paths["manifest"].write_text(json.dumps(manifest(ra), indent=2) + "\n", encoding="utf-8")
    except OSError as exc:
        raise ArtifactError(f"{paths['manifest']}: {exc.strerror or exc}") from exc
    return paths


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Read an emitted CSV back into float columns keyed by header name."""
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file, expected a header row")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return {h: data[:, i] for i, h in enumerate(header)}
