"""File formats.

Training data (CSV)
    header ``x_1,...,x_n,y_1,...,y_n``; one training pair per row.  An
    optional sidecar ``<file>.meta.json`` written by ``gpssm generate``
    records the noise deviations and generator parameters.
Model (JSON)
    kernel, noise, inputs, outputs and weight vector per output dimension.
    The Cholesky factors are recomputed on load.
Equilibrium (CSV + JSON)
    ``x_1,...,x_n,weight,u`` per grid node, and a summary document.
Ensemble (CSV)
    ``step,time,mean_1..mean_n,std_1..std_n`` (plus ``true_1..true_n`` when
    a reference trajectory is attached).

CSV numbers are written with 17 significant digits; JSON uses Python's
shortest round-trip float repr.  Both round-trip exactly.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from pathlib import Path

import numpy as np

from .equilibrium import EquilibriumSolution, build_grid
from .errors import ConfigError
from .gp import GpSsmModel, TrainingSet, fit
from .kernels import Kernel

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
MODEL_FORMAT = "gpssm-model"


def fmt(v: float) -> str:
    return format(float(v), ".17g")


def _write_rows(path, header, rows):
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if not isinstance(v, (int, np.integer)) else str(v) for v in row])


def _read_table(path) -> tuple[list[str], np.ndarray]:
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"{path} is empty")
    header = [h.strip() for h in rows[0]]
    body = rows[1:]
    if not body:
        raise ConfigError(f"{path} has a header but no data rows")
    try:
        data = np.array([[float(v) for v in r] for r in body])
    except ValueError as exc:
        raise ConfigError(f"{path}: non-numeric value ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != len(header):
        raise ConfigError(f"{path}: rows do not match the {len(header)}-column header")
    return header, data


def meta_path(path) -> Path:
    return Path(str(path) + ".meta.json")


def write_training_csv(path, data: TrainingSet, meta: dict | None = None):
    n = data.n
    header = [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)]
    _write_rows(path, header, np.hstack([data.X, data.Y]))
    if meta is not None:
        doc = {"version": SCHEMA_VERSION, "sigma_n": data.sigma_n.tolist(), **meta}
        meta_path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_training_csv(path, sigma_n=None) -> tuple[TrainingSet, bool]:
    """Load a training CSV.

    Returns the training set and whether the noise level was known (given
    explicitly or found in the sidecar).  Unknown noise is returned as 1.0
    per dimension.
    """
    header, table = _read_table(path)
    if len(header) % 2:
        raise ConfigError(f"{path}: expected x_1..x_n,y_1..y_n columns, got {header}")
    n = len(header) // 2
    expected = [f"x_{i + 1}" for i in range(n)] + [f"y_{i + 1}" for i in range(n)]
    if header != expected:
        raise ConfigError(f"{path}: expected header {expected}, got {header}")
    known = sigma_n is not None
    if sigma_n is None and meta_path(path).exists():
        sigma_n = json.loads(meta_path(path).read_text()).get("sigma_n")
        known = sigma_n is not None
    if sigma_n is None:
        sigma_n = [1.0] * n
    sigma_n = np.broadcast_to(np.asarray(sigma_n, dtype=float), (n,))
    return TrainingSet(table[:, :n], table[:, n:], sigma_n), known


def model_to_dict(model: GpSsmModel, extra: dict | None = None) -> dict:
    doc = {
        "format": MODEL_FORMAT,
        "version": SCHEMA_VERSION,
        "n": model.n,
        "m": model.m,
        "X": model.data.X.tolist(),
        "Y": model.data.Y.tolist(),
        "outputs": [
            {
                "kernel": out.kernel.to_dict(),
                "sigma_n": out.sigma_n,
                "h": out.h.tolist(),
                "jitter": out.jitter,
                "log_marginal_likelihood": lml,
            }
            for out, lml in zip(model.outputs, model.log_likelihoods)
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def save_model(path, model: GpSsmModel, extra: dict | None = None):
    Path(path).write_text(json.dumps(model_to_dict(model, extra), indent=2) + "\n")


def model_from_dict(doc: dict) -> GpSsmModel:
    if doc.get("format") != MODEL_FORMAT:
        raise ConfigError("not a gpssm model document")
    if doc.get("version") != SCHEMA_VERSION:
        raise ConfigError(f"unsupported model schema version {doc.get('version')}")
    outs = doc["outputs"]
    data = TrainingSet(np.array(doc["X"]), np.array(doc["Y"]), [o["sigma_n"] for o in outs])
    model = fit([Kernel.from_dict(o["kernel"]) for o in outs], data)
    for i, (o, out) in enumerate(zip(outs, model.outputs)):
        stored = np.asarray(o["h"])
        scale = max(1.0, float(np.abs(stored).max(initial=0.0)))
        if stored.shape != out.h.shape or np.abs(stored - out.h).max(initial=0.0) > 1e-8 * scale:
            log.warning("weight vector %d differs from the stored one after refactorization", i)
    return model


def load_model(path) -> GpSsmModel:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read model {path}: {exc}") from exc
    try:
        return model_from_dict(doc)
    except KeyError as exc:
        raise ConfigError(f"model {path} is missing field {exc}") from exc


def write_equilibrium(path, solution: EquilibriumSolution, summary_path=None, extra: dict | None = None):
    g = solution.grid
    header = [f"x_{i + 1}" for i in range(g.n)] + ["weight", "u"]
    _write_rows(path, header, np.column_stack([g.nodes, g.weights, solution.u]))
    if summary_path is not None:
        doc = {"version": SCHEMA_VERSION, **solution.summary(), **(extra or {})}
        Path(summary_path).write_text(json.dumps(doc, indent=2) + "\n")


def read_equilibrium(path) -> EquilibriumSolution:
    """Rebuild a 1-D or tensor-grid solution from its CSV."""
    header, table = _read_table(path)
    if header[-2:] != ["weight", "u"]:
        raise ConfigError(f"{path}: expected trailing weight,u columns")
    n = len(header) - 2
    nodes = table[:, :n]
    intervals, q = [], []
    for d in range(n):
        axis = np.unique(nodes[:, d])
        intervals.append((axis[0], axis[-1]))
        q.append(axis.size - 1)
    grid = build_grid(intervals, q)
    if grid.size != table.shape[0] or np.abs(grid.nodes - nodes).max() > 1e-9 * max(1.0, np.abs(nodes).max()):
        raise ConfigError(f"{path}: nodes do not form a lexicographic trapezoid grid")
    u = table[:, -1]
    if np.any(u < 0):
        raise ConfigError(f"{path}: negative density values")
    return EquilibriumSolution(grid, u, float("nan"), float("nan"))


def write_ensemble(path, stats, dt: float, reference=None):
    steps, n = stats.mean.shape
    header = ["step", "time"] + [f"mean_{i + 1}" for i in range(n)] + [f"std_{i + 1}" for i in range(n)]
    cols = [np.arange(steps), np.arange(steps) * dt, stats.mean, stats.std]
    if reference is not None:
        ref = np.full((steps, n), np.nan)
        ref[: len(reference)] = reference[:steps]
        header += [f"true_{i + 1}" for i in range(n)]
        cols.append(ref)
    rows = np.column_stack(cols)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for k, row in enumerate(rows):
            w.writerow([str(k)] + [fmt(v) for v in row[1:]])


def write_json(path, doc):
    text = json.dumps(doc, indent=2, default=_json_default) + "\n"
    if path in (None, "-"):
        print(text, end="")
    else:
        Path(path).write_text(text)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def ensure_parent(path):
    if path not in (None, "-"):
        parent = os.path.dirname(os.path.abspath(path))
        if not os.path.isdir(parent):
            raise ConfigError(f"output directory {parent} does not exist")
