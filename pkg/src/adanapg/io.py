"""CSV emission and parsing with a provenance header.

Every file starts with ``# config_hash=<hex>``, then a header row.  Floats are
written with 17 significant digits so they round-trip exactly, missing values
are empty strings and lines end in LF.
"""

from __future__ import annotations

import csv
import math
import os
from pathlib import Path

import numpy as np

TRAJECTORY_COLUMNS = ("run_id", "iter", "batch_size", "cum_samples", "objective", "dist_sq",
                      "gmap_norm", "test_rounds", "budget_capped", "elapsed_ns")


class ProvenanceError(ValueError):
    """A file's config hash does not match the expected one."""


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def write_csv(path, header, rows, config_hash: str):
    """Write ``rows`` under ``header`` atomically (temp file then rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", newline="") as fh:
        fh.write(f"# config_hash={config_hash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([format_value(v) for v in row])
    os.replace(tmp, path)


def read_csv(path):
    """Return ``(config_hash, header, rows)``; rows are lists of strings."""
    with open(path, newline="") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# config_hash="):
            raise ProvenanceError(f"{path}: missing config_hash header line")
        reader = csv.reader(fh)
        header = next(reader)
        rows = list(reader)
    return first.split("=", 1)[1], header, rows


def parse_float(s: str):
    return None if s == "" else float(s)


def read_matrix(path, expected_hash=None) -> np.ndarray:
    """Read an all-numeric CSV (as written by :func:`write_csv`) into an array."""
    h, _, rows = read_csv(path)
    if expected_hash is not None and h != expected_hash:
        raise ProvenanceError(f"{path}: config hash {h} does not match {expected_hash}")
    return np.array([[float(v) for v in r] for r in rows], dtype=np.float64)


def read_vector_file(path) -> np.ndarray:
    """Read a vector stored one component per row (``xstar.csv`` layout)."""
    _, header, rows = read_csv(path)
    col = header.index("value") if "value" in header else len(header) - 1
    return np.array([float(r[col]) for r in rows], dtype=np.float64)


def trajectory_rows(run_id, records, timing=False):
    for rec in records:
        yield (run_id, rec.n, rec.batch_size, rec.cum_samples, rec.objective, rec.dist_sq,
               rec.gmap_norm, rec.test_rounds, rec.budget_capped,
               rec.elapsed_ns if timing else None)
