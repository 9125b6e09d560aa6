"""CSV panels and JSON run configurations."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .errors import InputError
from .graph import NetworkGraph, make_regular_graph, read_edge_list

__all__ = [
    "SIM_CONFIG_KEYS",
    "write_panel_csv",
    "read_panel_csv",
    "write_treatment_csv",
    "read_treatment_csv",
    "load_config",
    "graph_from_config",
]

SIM_CONFIG_KEYS = {
    "n_units": None,
    "degree": 2,
    "graph_kind": "ring",
    "rank": 2,
    "noise_std": math.sqrt(0.1),
    "t_pre": 150,
    "t_post": 50,
    "d_treatments": 2,
    "w_process": "random_walk",
    "seed": 0,
    # optional extras
    "graph_file": None,
    "training": "design",
    "r_bar": 2,
    "factor_scale": "neighborhood",
    "noise_kind": "gaussian",
}


def _write_matrix(path, rows: np.ndarray, fmt) -> None:
    n_units = rows.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"unit_{i}" for i in range(n_units)])
        for t, row in enumerate(rows):
            w.writerow([t] + [fmt(x) for x in row])


def _read_matrix(path, cast) -> np.ndarray:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty file") from None
        if not header or header[0].strip() != "t":
            raise InputError(f"{path}: header must start with 't'")
        n_units = len(header) - 1
        rows = []
        for lineno, rec in enumerate(reader, 2):
            if not rec:
                continue
            if len(rec) != n_units + 1:
                raise InputError(f"{path}:{lineno}: expected {n_units + 1} fields, got {len(rec)}")
            try:
                rows.append([cast(x) for x in rec[1:]])
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from None
    if not rows:
        raise InputError(f"{path}: no data rows")
    return np.asarray(rows)


def write_panel_csv(z: np.ndarray, path) -> None:
    """Observations, one row per measurement (``T x N``)."""
    _write_matrix(path, np.asarray(z, dtype=float), lambda x: repr(float(x)))


def read_panel_csv(path) -> np.ndarray:
    return _read_matrix(path, float).astype(float)


def write_treatment_csv(a_matrix: np.ndarray, path) -> None:
    """Treatments in the same time-major layout as the observation panel."""
    _write_matrix(path, np.asarray(a_matrix).T, lambda x: str(int(x)))


def read_treatment_csv(path) -> np.ndarray:
    """Returns the unit-major ``N x T`` treatment matrix."""
    def to_int(x: str) -> int:
        v = float(x)
        if v != int(v):
            raise ValueError(f"non-integer treatment {x!r}")
        return int(v)

    return _read_matrix(path, to_int).astype(np.int64).T


def load_config(path) -> dict:
    """Read a JSON (or YAML, by extension) configuration file."""
    path = Path(path)
    text = path.read_text()
    try:
        if path.suffix in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:
        raise InputError(f"{path}: cannot parse config: {exc}") from None
    if not isinstance(data, dict):
        raise InputError(f"{path}: config must be a mapping")
    return data


def graph_from_config(cfg: dict, base: Path | None = None) -> NetworkGraph:
    if cfg.get("graph_file"):
        gpath = Path(cfg["graph_file"])
        if base is not None and not gpath.is_absolute():
            gpath = base / gpath
        return read_edge_list(gpath, cfg.get("n_units"))
    if cfg.get("n_units") is None:
        raise InputError("config needs n_units (or graph_file)")
    return make_regular_graph(cfg.get("graph_kind", "ring"), int(cfg["n_units"]), int(cfg.get("degree", 2)))
