"""Parsers for the analysis CSV contracts.

Each reader validates the documented header and raises SchemaError with
a descriptive message when the file does not conform. These files are
the only coupling to the analysis package.
"""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = [
    "SchemaError",
    "read_grid_csv",
    "read_eigs_csv",
    "read_forecast_csv",
    "read_matrix_csv",
    "read_series_csv",
]


class SchemaError(ValueError):
    """Input file does not conform to its documented CSV contract."""


def _read_table(path, expected_header: list[str] | None = None):
    path = Path(path)
    if not path.exists():
        raise SchemaError(f"{path} does not exist")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        header = [h.strip() for h in header]
        if expected_header is not None and header != expected_header:
            raise SchemaError(
                f"{path} header {header!r} does not match expected {expected_header!r}"
            )
        rows = []
        for lineno, fields in enumerate(reader, start=2):
            if not fields:
                continue
            if len(fields) != len(header):
                raise SchemaError(
                    f"{path} line {lineno}: expected {len(header)} fields, "
                    f"got {len(fields)}"
                )
            try:
                rows.append(
                    [float(f) if f.strip() != "" else math.nan for f in fields]
                )
            except ValueError as exc:
                raise SchemaError(f"{path} line {lineno}: {exc}") from None
    if not rows:
        raise SchemaError(f"{path} holds a header but no data rows")
    return header, np.asarray(rows)


def read_grid_csv(path):
    """Pseudospectrum grid: points, values, flags, and the JSON sidecar."""
    _, table = _read_table(path, ["re(z)", "im(z)", "r", "flagged"])
    points = table[:, 0] + 1j * table[:, 1]
    sidecar_path = Path(path).with_name(Path(path).name + ".json")
    sidecar = json.loads(sidecar_path.read_text()) if sidecar_path.exists() else {}
    return points, table[:, 2], table[:, 3].astype(bool), sidecar


def read_eigs_csv(path):
    """Eigenvalue report: eigenvalues plus residual columns (nan when absent)."""
    _, table = _read_table(
        path, ["re(lambda)", "im(lambda)", "res_var", "res", "integrated_variance"]
    )
    lam = table[:, 0] + 1j * table[:, 1]
    return lam, table[:, 2], table[:, 3], table[:, 4]


def read_forecast_csv(path):
    """Forecast report: horizons, prediction norms, bounds, subspace errors."""
    _, table = _read_table(path, ["n", "norm_prediction", "C_n", "delta_n"])
    return table[:, 0].astype(int), table[:, 1], table[:, 2], table[:, 3]


def read_matrix_csv(path):
    """Matrix export with interleaved re/im columns -> complex N x N array."""
    header, table = _read_table(path)
    if len(header) % 2 != 0:
        raise SchemaError(f"{path}: expected an even number of re/im columns")
    n = len(header) // 2
    if table.shape[0] != n:
        raise SchemaError(f"{path}: expected {n} rows for a square matrix")
    return table[:, 0::2] + 1j * table[:, 1::2]


def read_series_csv(path):
    """Generic sweep table: first column is x, the rest are named series."""
    header, table = _read_table(path)
    if len(header) < 2:
        raise SchemaError(f"{path}: need an x column plus at least one series")
    series = {name: table[:, i] for i, name in enumerate(header[1:], start=1)}
    return header[0], table[:, 0], series


def reshape_rectangular(points: np.ndarray, values: np.ndarray):
    """Recover the (im, re) mesh from row-major rectangle-grid points.

    Returns None when the points do not form a full rectangular grid
    (disk-lattice grids); callers then fall back to triangulation.
    """
    re = np.unique(points.real)
    im = np.unique(points.imag)
    if re.size * im.size != points.size:
        return None
    want = (re[None, :] + 1j * im[:, None]).ravel()
    if not np.allclose(want, points):
        return None
    return re, im, values.reshape(im.size, re.size)
