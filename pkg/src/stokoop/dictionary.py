"""Observable dictionaries: Fourier modes and Laplacian radial basis functions.

A dictionary is the finite set of observables spanning the Galerkin
subspace. Besides evaluation it carries per-function Lipschitz constants
and sup-norms, which feed the concentration bounds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.spatial.distance import cdist, pdist

__all__ = [
    "Dictionary",
    "fourier_dictionary",
    "laplacian_rbf_dictionary",
    "pick_centers",
    "evaluate_matrix",
]


@dataclass(frozen=True)
class Dictionary:
    """A feature map with the constants the error bounds need.

    ``matrix_evaluator`` maps an (M, d) point matrix to the (M, N)
    evaluation matrix; it is the hot path for assembly and is expected
    to be vectorized.
    """

    size: int
    dimension: int
    matrix_evaluator: Callable[[np.ndarray], np.ndarray]
    lipschitz: np.ndarray
    sup_norms: np.ndarray
    labels: tuple[str, ...]
    is_complex: bool = True
    kind: str = "custom"

    def __post_init__(self):
        if self.size < 1:
            raise ValueError("dictionary must contain at least one function")
        lip = np.asarray(self.lipschitz, dtype=float)
        sup = np.asarray(self.sup_norms, dtype=float)
        if lip.shape != (self.size,) or sup.shape != (self.size,):
            raise ValueError("lipschitz and sup_norms must be length-N vectors")
        if np.any(lip < 0) or np.any(~np.isfinite(lip)):
            raise ValueError("lipschitz constants must be finite and nonnegative")
        if np.any(sup <= 0) or np.any(~np.isfinite(sup)):
            raise ValueError("sup_norms must be finite and positive")
        lip.setflags(write=False)
        sup.setflags(write=False)
        object.__setattr__(self, "lipschitz", lip)
        object.__setattr__(self, "sup_norms", sup)
        object.__setattr__(self, "labels", tuple(self.labels))

    def evaluator(self, x) -> np.ndarray:
        """Evaluate the feature map at a single d-vector."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.matrix_evaluator(x[None, :])[0]

    def __call__(self, x) -> np.ndarray:
        return self.evaluator(x)


def fourier_dictionary(n: int, period: float = 1.0) -> Dictionary:
    """Fourier modes exp(2*pi*i*j*x/period) for j = -n..n (N = 2n+1)."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if not period > 0:
        raise ValueError("period must be positive")
    modes = np.arange(-n, n + 1)
    freq = 2.0 * np.pi * modes / period

    def eval_matrix(points: np.ndarray) -> np.ndarray:
        pts = _check_points(points, 1)
        return np.exp(1j * pts[:, :1] * freq[None, :])

    return Dictionary(
        size=2 * n + 1,
        dimension=1,
        matrix_evaluator=eval_matrix,
        lipschitz=np.abs(freq),
        sup_norms=np.ones(2 * n + 1),
        labels=tuple(f"fourier[j={j}]" for j in modes),
        is_complex=True,
        kind="fourier",
    )


def laplacian_rbf_dictionary(centers, scale: float | None = None) -> Dictionary:
    """Laplacian kernels exp(-||x - c_k|| / scale) at the given centers.

    The default scale is the median pairwise distance among the centers.
    Duplicate centers are rejected since they make the Gram matrix
    exactly singular.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    N, d = centers.shape
    if N >= 2:
        dists = pdist(centers)
        if np.min(dists) == 0.0:
            raise ValueError("duplicate centers make the Gram matrix singular")
        if scale is None:
            scale = float(np.median(dists))
    if scale is None:
        scale = 1.0
    if not scale > 0:
        raise ValueError("scale must be positive")
    centers = centers.copy()
    centers.setflags(write=False)

    def eval_matrix(points: np.ndarray) -> np.ndarray:
        pts = _check_points(points, d)
        return np.exp(-cdist(pts, centers) / scale)

    return Dictionary(
        size=N,
        dimension=d,
        matrix_evaluator=eval_matrix,
        lipschitz=np.full(N, 1.0 / scale),
        sup_norms=np.ones(N),
        labels=tuple(f"rbf[{k}]" for k in range(N)),
        is_complex=False,
        kind="rbf",
    )


def pick_centers(trajectory, N: int, seed: int = 0) -> np.ndarray:
    """Select N well-spread rows by greedy farthest-point traversal.

    Starts from the first row and repeatedly adds the row farthest from
    the current selection. Exact distance ties are broken with the
    seeded generator, so the result is deterministic for fixed inputs.
    """
    traj = np.atleast_2d(np.asarray(trajectory, dtype=float))
    M = traj.shape[0]
    if N < 1:
        raise ValueError("N must be >= 1")
    if M < N:
        raise ValueError(f"need at least N={N} rows, got {M}")
    rng = np.random.default_rng(seed)
    selected = [0]
    mindist = np.linalg.norm(traj - traj[0], axis=1)
    for _ in range(N - 1):
        best = mindist.max()
        candidates = np.flatnonzero(mindist == best)
        pick = int(candidates[0]) if len(candidates) == 1 else int(rng.choice(candidates))
        selected.append(pick)
        np.minimum(mindist, np.linalg.norm(traj - traj[pick], axis=1), out=mindist)
    return traj[selected]


def evaluate_matrix(dictionary: Dictionary, points) -> np.ndarray:
    """Evaluate the dictionary at M points, returning the M x N matrix.

    Row m is the feature map at point m, matching the layout of the
    snapshot evaluation matrices used in assembly.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts[:, None] if dictionary.dimension == 1 else pts[None, :]
    return dictionary.matrix_evaluator(pts)


def _check_points(points: np.ndarray, d: int) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != d:
        raise ValueError(f"points must be (M, {d}), got shape {pts.shape}")
    return pts
