"""Pseudospectra over complex grids by per-point residual minimization.

At each grid point z the minimized residual

    r(z) = min over g of sqrt( g* D(z) g / g* G g ),
    D(z) = S - z A* - conj(z) A + |z|^2 G,

is the smallest eigenvalue of the Hermitian pencil (D(z), G), with
S = H for the operator residual and S = L for the variance residual.
The sublevel set {z : r(z) < eps} estimates the (variance-)
pseudospectrum. One Gram factorization is shared across all grid
points, which dominates the cost profile.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg

from .errors import CapabilityError
from .matrices import KoopmanMatrices
from .spectral import RegularizationPolicy, gram_whitener

__all__ = [
    "ComplexGrid",
    "PseudospectrumGrid",
    "default_grid",
    "rectangle_grid",
    "explicit_grid",
    "min_residual",
    "pseudospectrum",
    "save_pseudospectrum_csv",
    "load_pseudospectrum_csv",
    "KIND_RESIDUAL",
    "KIND_VARIANCE",
]

KIND_RESIDUAL = "residual"
KIND_VARIANCE = "variance_residual"


@dataclass(frozen=True)
class ComplexGrid:
    points: np.ndarray
    provenance: dict

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=complex))
        if pts.ndim != 1 or pts.size == 0:
            raise ValueError("grid must be a nonempty 1-D set of points")
        if not np.all(np.isfinite(pts)):
            raise ValueError("grid points must be finite")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)


def default_grid(N: int) -> ComplexGrid:
    """The lattice (1/N)(Z + iZ) clipped to the disk of radius N.

    Enumeration is row-major: imaginary part ascending, then real part
    ascending, so output files are diffable.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    limit = N * N  # integer lattice points with a^2 + b^2 <= N^4
    pts = []
    for b in range(-limit, limit + 1):
        for a in range(-limit, limit + 1):
            if a * a + b * b <= limit * limit:
                pts.append(complex(a, b) / N)
    return ComplexGrid(np.asarray(pts), {"kind": "default", "N": N})


def rectangle_grid(re_range, im_range, steps) -> ComplexGrid:
    """Uniform rectangular window, row-major with imaginary part outermost."""
    n_re, n_im = (steps, steps) if np.isscalar(steps) else steps
    re = np.linspace(re_range[0], re_range[1], int(n_re))
    im = np.linspace(im_range[0], im_range[1], int(n_im))
    pts = (re[None, :] + 1j * im[:, None]).ravel()
    return ComplexGrid(
        pts,
        {
            "kind": "rectangle",
            "re_range": [float(re_range[0]), float(re_range[1])],
            "im_range": [float(im_range[0]), float(im_range[1])],
            "steps": [int(n_re), int(n_im)],
        },
    )


def explicit_grid(points) -> ComplexGrid:
    return ComplexGrid(np.asarray(points, dtype=complex), {"kind": "explicit"})


@dataclass(frozen=True)
class PseudospectrumGrid:
    """Grid points with minimized residuals and their minimizers.

    values[j] is r(z_j); minimizers[j] is the Gram-normalized coefficient
    vector attaining it; flagged marks the sublevel set r < epsilon.
    """

    points: np.ndarray
    values: np.ndarray
    minimizers: np.ndarray
    flagged: np.ndarray
    kind: str
    epsilon: float


class _PencilCache:
    """Whitened pencil data shared by every grid point."""

    def __init__(self, mats: KoopmanMatrices, kind: str, reg: RegularizationPolicy):
        if kind == KIND_RESIDUAL:
            if not mats.has_H:
                raise CapabilityError(
                    "residual pseudospectra require the cross-batch matrix H; "
                    "provide batched data with M2 >= 2 or bin the snapshots"
                )
            S = mats.H
        elif kind == KIND_VARIANCE:
            S = mats.L
        else:
            raise ValueError(f"unknown residual kind {kind!r}")
        wh = gram_whitener(mats.G, reg)
        self.basis = wh.basis
        self.Aw = wh.basis.conj().T @ mats.A @ wh.basis
        self.Sw = wh.basis.conj().T @ S @ wh.basis
        self.eye = np.eye(self.Aw.shape[0])
        self.G = mats.G

    def smallest(self, z: complex):
        D = self.Sw - z * self.Aw.conj().T - np.conj(z) * self.Aw
        D += (abs(z) ** 2) * self.eye
        D = 0.5 * (D + D.conj().T)
        vals, vecs = scipy.linalg.eigh(D, subset_by_index=(0, 0))
        r = float(np.sqrt(max(0.0, vals[0])))
        g = self.basis @ vecs[:, 0]
        nrm = float(np.real(g.conj() @ self.G @ g))
        if nrm > 0:
            g = g / np.sqrt(nrm)
        return r, g


def min_residual(
    z: complex,
    mats: KoopmanMatrices,
    kind: str = KIND_RESIDUAL,
    reg: RegularizationPolicy = RegularizationPolicy(),
):
    """Minimized residual at a single point and its attaining vector."""
    return _PencilCache(mats, kind, reg).smallest(z)


def pseudospectrum(
    grid: ComplexGrid,
    mats: KoopmanMatrices,
    epsilon: float,
    kind: str = KIND_RESIDUAL,
    reg: RegularizationPolicy = RegularizationPolicy(),
    threads: int = 1,
) -> PseudospectrumGrid:
    """Evaluate the minimized residual at every grid point.

    Values are stored for contour plotting regardless of epsilon; the
    flags mark the epsilon-sublevel set. Points are independent, so the
    evaluation may be partitioned over threads; results land in
    pre-assigned slots and are identical regardless of scheduling.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    cache = _PencilCache(mats, kind, reg)
    pts = grid.points
    values = np.empty(pts.size)
    minimizers = np.empty((pts.size, mats.size), dtype=complex)

    def run(lo: int, hi: int):
        for j in range(lo, hi):
            r, g = cache.smallest(complex(pts[j]))
            values[j] = r
            minimizers[j] = g

    if threads <= 1 or pts.size < 2:
        run(0, pts.size)
    else:
        bounds = np.linspace(0, pts.size, threads + 1).astype(int)
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(run, bounds[i], bounds[i + 1]) for i in range(threads)
            ]
            for f in futures:
                f.result()
    return PseudospectrumGrid(
        points=pts,
        values=values,
        minimizers=minimizers,
        flagged=values < epsilon,
        kind=kind,
        epsilon=float(epsilon),
    )


def save_pseudospectrum_csv(ps: PseudospectrumGrid, path, meta: dict | None = None):
    """Write ``re(z),im(z),r,flagged`` rows plus a JSON sidecar."""
    path = Path(path)
    lines = ["re(z),im(z),r,flagged"]
    for z, r, f in zip(ps.points, ps.values, ps.flagged):
        lines.append("%.17g,%.17g,%.17g,%d" % (z.real, z.imag, r, int(f)))
    path.write_text("\n".join(lines) + "\n")
    sidecar = {"kind": ps.kind, "epsilon": ps.epsilon}
    sidecar.update(meta or {})
    path.with_name(path.name + ".json").write_text(
        json.dumps(sidecar, sort_keys=True, indent=1)
    )
    return path


def load_pseudospectrum_csv(path):
    """Read a grid CSV back as (points, values, flags)."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    pts = table[:, 0] + 1j * table[:, 1]
    return pts, table[:, 2], table[:, 3].astype(bool)
