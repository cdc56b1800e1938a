"""Forecast iteration, subspace error estimation, and the error bounds.

The data-driven propagation of an observable with coefficients g is
Psi K^n g with K the pseudoinverse Galerkin matrix. Its deviation from
the true n-step expectation is controlled by

    C_n = (|K|^n - dA^n)/(|K| - dA) * dA (dG + 1) + |K|^n dG + delta_n,

where dG, dA measure the estimation error of the Gram and action
matrices relative to a reference, and delta_n is the invariant-subspace
error of the dictionary for the chosen observable. A Chebyshev-type
bound turns a one-step variance into a tail probability for single
trajectories.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import CapabilityError, RankError
from .matrices import KoopmanMatrices
from .spectral import RegularizationPolicy, gram_whitener

__all__ = [
    "ForecastBoundInputs",
    "koopman_matrix",
    "iterate",
    "deltas_from_reference",
    "subspace_error",
    "forecast_error_bound",
    "chernoff_bound",
    "operator_norm_estimate",
]


@dataclass(frozen=True)
class ForecastBoundInputs:
    """The four scalars the forecast bound consumes."""

    norm_K: float
    delta_G: float
    delta_A: float
    delta_n: float

    def __post_init__(self):
        for name in ("norm_K", "delta_G", "delta_A", "delta_n"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


def koopman_matrix(
    mats: KoopmanMatrices, reg: RegularizationPolicy = RegularizationPolicy()
) -> np.ndarray:
    """K = pinv(G) A with the pseudoinverse truncated at the Gram cutoff."""
    wh = gram_whitener(mats.G, reg)
    return wh.basis @ (wh.basis.conj().T @ mats.A)


def iterate(K: np.ndarray, g, n: int) -> np.ndarray:
    """K^n g by repeated multiplication; n = 0 returns g unchanged.

    Sequential application makes iterate(K, g, m + n) bit-identical to
    iterate(K, iterate(K, g, m), n).
    """
    if n < 0:
        raise ValueError("horizon must be >= 0")
    v = np.asarray(g, dtype=complex)
    for _ in range(n):
        v = K @ v
    return v


def _inv_sqrt_and_sqrt(G: np.ndarray, what: str):
    s, V = scipy.linalg.eigh(G)
    if s[-1] <= 0 or s[0] <= 1e-14 * s[-1]:
        raise RankError(f"{what} Gram matrix not positive definite")
    root = V @ np.diag(np.sqrt(s)) @ V.conj().T
    inv_root = V @ np.diag(1.0 / np.sqrt(s)) @ V.conj().T
    return root, inv_root


def deltas_from_reference(
    est: KoopmanMatrices, ref: KoopmanMatrices, norm_K: float
) -> tuple[float, float]:
    """Spectral-norm estimation errors (delta_G, delta_A) against a reference.

    Uses I_G = G^{1/2} Gest^{-1/2} with
    delta_G = |I_G| |I - I_G^{-1}| + |I - I_G| and
    delta_A = norm_K (1 + |I_G|) |I_G - I|
              + |I_G|^2 |G^{-1/2} (A - Aest) G^{-1/2}|.
    """
    if est.size != ref.size:
        raise ValueError("matrix sizes differ")
    G_root, G_inv_root = _inv_sqrt_and_sqrt(ref.G, "reference")
    Ge_root, Ge_inv_root = _inv_sqrt_and_sqrt(est.G, "estimated")
    eye = np.eye(ref.size)
    I_G = G_root @ Ge_inv_root
    I_G_inv = Ge_root @ G_inv_root
    n_IG = np.linalg.norm(I_G, 2)
    delta_G = n_IG * np.linalg.norm(eye - I_G_inv, 2) + np.linalg.norm(eye - I_G, 2)
    mid = G_inv_root @ (ref.A - est.A) @ G_inv_root
    delta_A = norm_K * (1.0 + n_IG) * np.linalg.norm(I_G - eye, 2)
    delta_A += n_IG**2 * np.linalg.norm(mid, 2)
    return float(delta_G), float(delta_A)


def subspace_error(
    mats: KoopmanMatrices, K: np.ndarray, g, n: int, norm_K: float
) -> float:
    """Data-driven estimate of the n-step invariant-subspace error.

    Accumulates sum_{j=1..n} norm_K^(n-j) e_j where e_j is the one-step
    defect of v = K^{j-1} g,

        e_j = sqrt( v* H v - 2 Re(v* K* A v) + v* K* G K v ),

    clamped at zero before the sqrt. Requires H.
    """
    if not mats.has_H:
        raise CapabilityError(
            "subspace_error requires the cross-batch matrix H; "
            "provide batched data with M2 >= 2 or bin the snapshots"
        )
    if n < 0:
        raise ValueError("horizon must be >= 0")
    v = np.asarray(g, dtype=complex)
    total = 0.0
    for j in range(1, n + 1):
        Kv = K @ v
        form = (
            float(np.real(v.conj() @ mats.H @ v))
            - 2.0 * float(np.real(Kv.conj() @ mats.A @ v))
            + float(np.real(Kv.conj() @ mats.G @ Kv))
        )
        total += norm_K ** (n - j) * float(np.sqrt(max(0.0, form)))
        v = Kv
    return total


def forecast_error_bound(inputs: ForecastBoundInputs, n: int) -> float:
    """Evaluate C_n; requires norm_K > delta_A for the geometric sum."""
    if n < 0:
        raise ValueError("horizon must be >= 0")
    nk, dA = inputs.norm_K, inputs.delta_A
    if not nk > dA:
        raise ValueError("forecast bound needs norm_K > delta_A")
    geom = (nk**n - dA**n) / (nk - dA)
    return float(
        geom * dA * (inputs.delta_G + 1.0)
        + nk**n * inputs.delta_G
        + inputs.delta_n
    )


def chernoff_bound(variance: float, a: float) -> float:
    """Tail probability bound variance / a^2, capped at 1."""
    if not a > 0:
        raise ValueError("deviation threshold a must be positive")
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    return min(1.0, variance / a**2)


def operator_norm_estimate(
    mats: KoopmanMatrices, reg: RegularizationPolicy = RegularizationPolicy()
) -> float:
    """Largest singular value of the whitened action matrix.

    A practical stand-in for the operator norm when no analytic value is
    available; measure-preserving systems have norm 1.
    """
    wh = gram_whitener(mats.G, reg)
    T = wh.basis.conj().T @ mats.A @ wh.basis
    return float(np.linalg.norm(T, 2))
