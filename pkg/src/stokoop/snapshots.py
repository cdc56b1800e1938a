"""Snapshot data containers, CSV I/O, quadrature weights, and binning.

A snapshot pair is a state ``x`` and its one-step image ``y``. Unbatched
data holds one image per state; batched data holds several independent
images per state, which is what enables estimating the cross-batch
matrix H downstream.

CSV schema: header ``x1,...,xd,y1,...,yd[,w][,batch]``. The optional
``batch`` column (integer >= 0) groups rows of pre-batched data: all
rows sharing a batch id must carry the identical x row and weight, and
their y rows are the realizations in file order. Floats are written
with 17 significant digits so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BinningError, SnapshotParseError, SnapshotSchemaError

__all__ = [
    "SnapshotSet",
    "BatchedSnapshotSet",
    "BinningSpec",
    "load_snapshots",
    "save_snapshots",
    "monte_carlo_weights",
    "periodic_trapezoid_weights",
    "bin_to_batched",
    "flatten_batched",
]


def _as_matrix(a, name: str) -> np.ndarray:
    m = np.asarray(a, dtype=float)
    if m.ndim == 1:
        m = m[:, None]
    if m.ndim != 2:
        raise ValueError(f"{name} must be a 2-D array, got shape {m.shape}")
    m = np.ascontiguousarray(m)
    m.setflags(write=False)
    return m


def _as_weights(w, m_expected: int) -> np.ndarray:
    w = np.ascontiguousarray(np.asarray(w, dtype=float))
    if w.ndim != 1 or w.shape[0] != m_expected:
        raise ValueError(f"weights must be a length-{m_expected} vector")
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    if not np.any(w > 0):
        raise ValueError("at least one weight must be positive")
    w.setflags(write=False)
    return w


@dataclass(frozen=True)
class SnapshotSet:
    """State pairs (x, y) with quadrature weights."""

    states_x: np.ndarray
    states_y: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.states_x, "states_x")
        y = _as_matrix(self.states_y, "states_y")
        if x.shape[0] != y.shape[0]:
            raise ValueError("states_x and states_y must have the same row count")
        if x.shape[0] < 1:
            raise ValueError("need at least one snapshot pair")
        if x.shape[1] != y.shape[1]:
            raise SnapshotSchemaError(
                f"state dimension mismatch: x has d={x.shape[1]}, y has d={y.shape[1]}"
            )
        w = _as_weights(self.weights, x.shape[0])
        object.__setattr__(self, "states_x", x)
        object.__setattr__(self, "states_y", y)
        object.__setattr__(self, "weights", w)

    @property
    def count(self) -> int:
        return self.states_x.shape[0]

    @property
    def dimension(self) -> int:
        return self.states_x.shape[1]


@dataclass(frozen=True)
class BatchedSnapshotSet:
    """States with two or more independent one-step images each.

    ``realizations[k]`` is an M1 x d matrix; its row j is the k-th
    independent image of ``states_x[j]``.
    """

    states_x: np.ndarray
    realizations: list[np.ndarray]
    weights: np.ndarray

    def __post_init__(self):
        x = _as_matrix(self.states_x, "states_x")
        if len(self.realizations) < 1:
            raise ValueError("need at least one realization")
        reals = []
        for k, r in enumerate(self.realizations):
            r = _as_matrix(r, f"realizations[{k}]")
            if r.shape != x.shape:
                raise ValueError(
                    f"realization {k} has shape {r.shape}, expected {x.shape}"
                )
            reals.append(r)
        w = _as_weights(self.weights, x.shape[0])
        object.__setattr__(self, "states_x", x)
        object.__setattr__(self, "realizations", reals)
        object.__setattr__(self, "weights", w)

    @property
    def batch_count(self) -> int:
        return self.states_x.shape[0]

    @property
    def realization_count(self) -> int:
        return len(self.realizations)

    @property
    def dimension(self) -> int:
        return self.states_x.shape[1]


@dataclass(frozen=True)
class BinningSpec:
    """How to turn unbatched data into batched data.

    mode "grid": ``resolution`` is a per-dimension bin count (int or
    sequence of ints) over the bounding box of the states; the batch
    representative is the bin center.

    mode "nearest-centroid": ``resolution`` is a K x d centroid matrix;
    samples join their nearest centroid and the representative is the
    weighted mean of the members.
    """

    mode: str
    resolution: object
    min_occupancy: int = 2

    def __post_init__(self):
        if self.mode not in ("grid", "nearest-centroid"):
            raise ValueError(f"unknown binning mode {self.mode!r}")
        if self.min_occupancy < 2:
            raise ValueError("min_occupancy must be >= 2")
        if self.mode == "grid":
            res = np.atleast_1d(np.asarray(self.resolution, dtype=int))
            if np.any(res < 1):
                raise ValueError("grid resolution must be positive in every dimension")
            object.__setattr__(self, "resolution", res)
        else:
            cen = _as_matrix(self.resolution, "centroids")
            object.__setattr__(self, "resolution", cen)


def monte_carlo_weights(M: int) -> np.ndarray:
    """Uniform weights 1/M for independently drawn snapshot states."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return np.full(M, 1.0 / M)


def periodic_trapezoid_weights(M: int, domain_length: float) -> np.ndarray:
    """Trapezoid-rule weights for M equispaced nodes on a periodic domain.

    On a periodic domain every node weight equals domain_length / M, and
    the rule integrates constants exactly.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    if not domain_length > 0:
        raise ValueError("domain_length must be positive")
    return np.full(M, domain_length / M)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

_FMT = "%.17g"


def _resolve_header(header: list[str], schema: dict | None):
    """Map header columns to roles. Returns (x_cols, y_cols, w_col, batch_col)."""
    if schema is not None:
        try:
            x_cols = [header.index(c) for c in schema["x"]]
            y_cols = [header.index(c) for c in schema["y"]]
        except (KeyError, ValueError) as exc:
            raise SnapshotSchemaError(f"schema mapping does not fit header: {exc}")
        w_col = header.index(schema["w"]) if schema.get("w") in header else None
        b_col = header.index(schema["batch"]) if schema.get("batch") in header else None
        if len(x_cols) != len(y_cols):
            raise SnapshotSchemaError(
                f"x-block has d={len(x_cols)} but y-block has d={len(y_cols)}"
            )
        return x_cols, y_cols, w_col, b_col

    names = [h.strip() for h in header]
    x_cols = [i for i, h in enumerate(names) if h.startswith("x") and h[1:].isdigit()]
    y_cols = [i for i, h in enumerate(names) if h.startswith("y") and h[1:].isdigit()]
    w_col = names.index("w") if "w" in names else None
    b_col = names.index("batch") if "batch" in names else None
    if not x_cols or not y_cols:
        raise SnapshotSchemaError(f"header {names!r} lacks x*/y* columns")
    if len(x_cols) != len(y_cols):
        raise SnapshotSchemaError(
            f"x-block has d={len(x_cols)} but y-block has d={len(y_cols)}"
        )
    known = set(x_cols) | set(y_cols) | {w_col, b_col}
    extra = [names[i] for i in range(len(names)) if i not in known]
    if extra:
        raise SnapshotSchemaError(f"unrecognized columns {extra!r}")
    return x_cols, y_cols, w_col, b_col


def load_snapshots(path, schema: dict | None = None):
    """Load a snapshot CSV.

    Returns a SnapshotSet, or a BatchedSnapshotSet when the file carries
    a ``batch`` column. A missing weight column defaults every weight to
    1/M. Malformed rows raise SnapshotParseError with the line number.
    """
    path = Path(path)
    with open(path, "r", newline="") as fh:
        header_line = fh.readline()
        if not header_line:
            raise SnapshotSchemaError(f"{path} is empty")
        header = next(csv.reader([header_line]))
        x_cols, y_cols, w_col, b_col = _resolve_header(header, schema)
        ncols = len(header)
        try:
            table = np.loadtxt(fh, delimiter=",", ndmin=2)
            if table.size and table.shape[1] != ncols:
                raise ValueError("column count mismatch")
        except ValueError:
            fh.seek(0)
            fh.readline()
            table = _parse_rows_slow(fh, ncols)
    if table.shape[0] == 0:
        raise SnapshotSchemaError(f"{path} has a header but no data rows")

    x = table[:, x_cols]
    y = table[:, y_cols]
    M = table.shape[0]
    w = table[:, w_col] if w_col is not None else monte_carlo_weights(M)

    if b_col is None:
        return SnapshotSet(x, y, w)
    return _regroup_batched(x, y, w, table[:, b_col])


def _parse_rows_slow(fh, ncols: int) -> np.ndarray:
    """Row-by-row fallback parse that reports the offending line number."""
    rows = []
    for lineno, line in enumerate(fh, start=2):
        if not line.strip():
            continue
        fields = next(csv.reader([line]))
        if len(fields) != ncols:
            raise SnapshotParseError(
                lineno, f"expected {ncols} fields, found {len(fields)}"
            )
        try:
            rows.append([float(f) for f in fields])
        except ValueError as exc:
            raise SnapshotParseError(lineno, str(exc)) from None
    return np.asarray(rows, dtype=float).reshape(len(rows), ncols)


def _regroup_batched(x, y, w, batch_ids) -> BatchedSnapshotSet:
    ids = np.asarray(np.rint(batch_ids), dtype=int)
    if np.any(np.abs(batch_ids - ids) > 0) or np.any(ids < 0):
        raise SnapshotSchemaError("batch column must hold integers >= 0")
    order = []
    groups: dict[int, list[int]] = {}
    for i, b in enumerate(ids):
        if b not in groups:
            groups[b] = []
            order.append(b)
        groups[b].append(i)
    sizes = {len(groups[b]) for b in order}
    if len(sizes) != 1:
        raise SnapshotSchemaError(f"ragged batches: group sizes {sorted(sizes)}")
    m2 = sizes.pop()
    xs, ws = [], []
    for b in order:
        idx = groups[b]
        if not np.all(x[idx] == x[idx[0]]):
            raise SnapshotSchemaError(f"batch {b} mixes different x rows")
        if not np.all(w[idx] == w[idx[0]]):
            raise SnapshotSchemaError(f"batch {b} mixes different weights")
        xs.append(x[idx[0]])
        ws.append(w[idx[0]])
    reals = []
    for k in range(m2):
        reals.append(np.vstack([y[groups[b][k]] for b in order]))
    return BatchedSnapshotSet(np.vstack(xs), reals, np.asarray(ws))


def save_snapshots(data, path) -> None:
    """Write a SnapshotSet or BatchedSnapshotSet to the snapshot CSV schema."""
    path = Path(path)
    d = data.dimension
    cols = [f"x{i+1}" for i in range(d)] + [f"y{i+1}" for i in range(d)] + ["w"]
    buf = io.StringIO()
    if isinstance(data, SnapshotSet):
        buf.write(",".join(cols) + "\n")
        for m in range(data.count):
            vals = np.concatenate(
                [data.states_x[m], data.states_y[m], [data.weights[m]]]
            )
            buf.write(",".join(_FMT % v for v in vals) + "\n")
    elif isinstance(data, BatchedSnapshotSet):
        buf.write(",".join(cols + ["batch"]) + "\n")
        for j in range(data.batch_count):
            for k in range(data.realization_count):
                vals = np.concatenate(
                    [data.states_x[j], data.realizations[k][j], [data.weights[j]]]
                )
                buf.write(",".join(_FMT % v for v in vals) + f",{j}\n")
    else:
        raise TypeError(f"cannot save object of type {type(data).__name__}")
    path.write_text(buf.getvalue())


# ---------------------------------------------------------------------------
# Binning
# ---------------------------------------------------------------------------


def flatten_batched(data: BatchedSnapshotSet) -> SnapshotSet:
    """View batched data as M1*M2 plain pairs, weights split evenly.

    The flattened weighted sums over y reproduce the batched
    realization-averaged estimators, so Galerkin normalizations match.
    """
    m2 = data.realization_count
    x = np.vstack([data.states_x] * m2)
    y = np.vstack(data.realizations)
    w = np.concatenate([data.weights / m2] * m2)
    return SnapshotSet(x, y, w)


def _grid_keys_and_centers(x: np.ndarray, resolution: np.ndarray):
    M, d = x.shape
    res = np.broadcast_to(resolution, (d,)).astype(int)
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    width = np.where(span > 0, span / res, 1.0)
    idx = np.floor((x - lo) / width).astype(int)
    idx = np.clip(idx, 0, res - 1)
    centers = lo + (idx + 0.5) * width
    centers = np.where(span > 0, centers, lo)
    keys = [tuple(row) for row in idx]
    return keys, centers


def _centroid_keys(x: np.ndarray, centroids: np.ndarray):
    if centroids.shape[1] != x.shape[1]:
        raise ValueError("centroid dimension does not match data dimension")
    d2 = ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
    return list(np.argmin(d2, axis=1))


def bin_to_batched(data: SnapshotSet, spec: BinningSpec) -> BatchedSnapshotSet:
    """Group snapshot pairs by state proximity into batched data.

    Bins holding fewer than ``min_occupancy`` samples are dropped; the
    surviving bins are truncated to a common realization count (the
    smallest retained occupancy, keeping the first arrivals in input
    order). Output weights are per-bin input-weight sums rescaled so the
    total weight of the original data is conserved.
    """
    x, y, w = data.states_x, data.states_y, data.weights
    if spec.mode == "grid":
        keys, reps = _grid_keys_and_centers(x, spec.resolution)
    else:
        keys = _centroid_keys(x, spec.resolution)
        reps = None

    order: list = []
    members: dict = {}
    for i, key in enumerate(keys):
        if key not in members:
            members[key] = []
            order.append(key)
        members[key].append(i)

    kept = [k for k in order if len(members[k]) >= spec.min_occupancy]
    if not kept:
        raise BinningError(
            f"no bin reached min_occupancy={spec.min_occupancy}; "
            "coarsen the binning or lower the threshold"
        )
    m2 = min(len(members[k]) for k in kept)

    xs, ws = [], []
    total_in = w.sum()
    for key in kept:
        idx = members[key]
        bin_w = w[idx].sum()
        if spec.mode == "grid":
            rep = reps[idx[0]]
        else:
            rep = (
                (w[idx][:, None] * x[idx]).sum(axis=0) / bin_w
                if bin_w > 0
                else x[idx].mean(axis=0)
            )
        xs.append(rep)
        ws.append(bin_w)
    ws = np.asarray(ws)
    ws = ws * (total_in / ws.sum())

    reals = []
    for k in range(m2):
        reals.append(np.vstack([y[members[key][k]] for key in kept]))
    return BatchedSnapshotSet(np.vstack(xs), reals, ws)
