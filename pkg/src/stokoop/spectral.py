"""Generalized eigenproblem on the Gram pencil plus the two residuals.

Candidate eigenpairs (lambda, g) of A g = lambda G g are scored by two
data-driven residuals, both quadratic forms divided by g* G g:

    res_var^2 uses L:  g* [L - lambda A* - conj(lambda) A + |lambda|^2 G] g
    res^2     uses H:  g* [H - lambda A* - conj(lambda) A + |lambda|^2 G] g

res_var estimates the mean squared one-step deviation, which decomposes
into the squared operator residual plus the integrated variance of the
observable; res isolates the operator residual and needs the
cross-batch matrix H. Their squared difference is the integrated
variance, an identity that holds exactly in this finite arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import CapabilityError, RankError
from .matrices import KoopmanMatrices

__all__ = [
    "RegularizationPolicy",
    "SpectralResult",
    "ResidualReport",
    "solve_eigenpairs",
    "evaluate_residuals",
    "residual_report",
    "res_var",
    "res",
    "integrated_variance",
    "covariance_matrix",
    "gram_whitener",
]


@dataclass(frozen=True)
class RegularizationPolicy:
    """Relative eigenvalue cutoff for truncating a near-singular Gram matrix."""

    rel_cutoff: float = 1e-12

    def __post_init__(self):
        if not 0.0 <= self.rel_cutoff < 1.0:
            raise ValueError("rel_cutoff must lie in [0, 1)")


@dataclass(frozen=True)
class SpectralResult:
    """One eigenpair with its residual diagnostics.

    coeffs is normalized to g* G g = 1. res and integrated_variance stay
    None until batched data supplies H. The clamped flags record whether
    a slightly negative quadratic form was clipped before the sqrt.
    """

    eigenvalue: complex
    coeffs: np.ndarray
    res_var: float | None = None
    res: float | None = None
    integrated_variance: float | None = None
    res_var_clamped: bool = False
    res_clamped: bool = False


@dataclass(frozen=True)
class ResidualReport:
    """Residual values plus the unclamped squared forms they came from.

    integrated_variance is res_var_sq - res_sq in the same arithmetic,
    so the decomposition identity is exact at the squared level; the
    sqrt'd values satisfy it to roundoff.
    """

    res_var: float
    res: float | None
    integrated_variance: float | None
    res_var_sq: float
    res_sq: float | None
    res_var_clamped: bool
    res_clamped: bool


@dataclass(frozen=True)
class GramWhitener:
    """Truncated whitening of the Gram matrix: G ~= V diag(s) V*.

    ``basis`` maps whitened coordinates to coefficients, i.e.
    g = basis @ u; on the retained subspace basis* G basis = I.
    """

    basis: np.ndarray      # N x k, equals V_k diag(1/sqrt(s_k))
    vectors: np.ndarray    # N x k retained eigenvectors
    eigvals: np.ndarray    # k retained eigenvalues of G
    sigma_max: float

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


def gram_whitener(G: np.ndarray, reg: RegularizationPolicy) -> GramWhitener:
    s, V = scipy.linalg.eigh(G)
    smax = float(s[-1])
    if not smax > 0.0:
        raise RankError("Gram matrix is numerically zero")
    keep = s > reg.rel_cutoff * smax
    if not np.any(keep):
        raise RankError("no Gram eigenvalue above the regularization cutoff")
    s_k = s[keep]
    V_k = V[:, keep]
    return GramWhitener(
        basis=V_k / np.sqrt(s_k)[None, :],
        vectors=V_k,
        eigvals=s_k,
        sigma_max=smax,
    )


def _fix_phase(g: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(g)))
    pivot = g[i]
    if pivot != 0:
        g = g * (abs(pivot) / pivot)
    return g


def solve_eigenpairs(
    mats: KoopmanMatrices, reg: RegularizationPolicy = RegularizationPolicy()
) -> list[SpectralResult]:
    """Eigenpairs of the pencil (A, G) on the retained Gram subspace.

    The pencil is whitened to T = basis* A basis, eigendecomposed, and
    mapped back; coefficients are normalized to g* G g = 1 with the
    largest entry made real positive. Ordering is by descending modulus,
    ties by ascending argument. Residual fields are left unfilled.
    """
    wh = gram_whitener(mats.G, reg)
    T = wh.basis.conj().T @ mats.A @ wh.basis
    lam, U = np.linalg.eig(T)
    order = np.lexsort((np.angle(lam), -np.abs(lam)))
    results = []
    for idx in order:
        g = wh.basis @ U[:, idx]
        nrm = np.real(g.conj() @ mats.G @ g)
        if nrm > 0:
            g = g / np.sqrt(nrm)
        g = _fix_phase(g)
        g.setflags(write=False)
        results.append(SpectralResult(eigenvalue=complex(lam[idx]), coeffs=g))
    return results


def _quadratic_form(S: np.ndarray, lam: complex, g: np.ndarray, mats) -> float:
    a = complex(g.conj() @ mats.A @ g)
    s = np.real(g.conj() @ S @ g)
    q = np.real(g.conj() @ mats.G @ g)
    return s - 2.0 * np.real(lam * np.conj(a)) + abs(lam) ** 2 * q


def residual_report(lam: complex, coeffs, mats: KoopmanMatrices) -> ResidualReport:
    """Both residuals and the integrated variance for one candidate pair.

    integrated_variance is res_var^2 - res^2 with the unclamped forms,
    so the decomposition identity is exact by construction.
    """
    g = np.asarray(coeffs, dtype=complex)
    denom = float(np.real(g.conj() @ mats.G @ g))
    if not denom > 0.0:
        raise ValueError("coefficient vector has zero Gram norm")
    rv_sq = float(_quadratic_form(mats.L, lam, g, mats) / denom)
    rv_clamped = rv_sq < 0.0
    rv = float(np.sqrt(max(0.0, rv_sq)))
    if mats.has_H:
        rs_sq = float(_quadratic_form(mats.H, lam, g, mats) / denom)
        rs_clamped = rs_sq < 0.0
        rs = float(np.sqrt(max(0.0, rs_sq)))
        iv = rv_sq - rs_sq
    else:
        rs_sq, rs, rs_clamped, iv = None, None, False, None
    return ResidualReport(
        res_var=rv,
        res=rs,
        integrated_variance=iv,
        res_var_sq=rv_sq,
        res_sq=rs_sq,
        res_var_clamped=rv_clamped,
        res_clamped=rs_clamped,
    )


def res_var(lam: complex, coeffs, mats: KoopmanMatrices) -> float:
    """Variance residual: sqrt of the L-based quadratic form, clamped at 0."""
    return residual_report(lam, coeffs, mats).res_var


def res(lam: complex, coeffs, mats: KoopmanMatrices) -> float:
    """Operator residual: sqrt of the H-based quadratic form, clamped at 0."""
    _require_H(mats, "res")
    return residual_report(lam, coeffs, mats).res


def integrated_variance(coeffs, mats: KoopmanMatrices) -> float:
    """State-averaged one-step variance of the observable: g*(L-H)g / g*Gg."""
    _require_H(mats, "integrated_variance")
    g = np.asarray(coeffs, dtype=complex)
    denom = float(np.real(g.conj() @ mats.G @ g))
    if not denom > 0.0:
        raise ValueError("coefficient vector has zero Gram norm")
    return float(np.real(g.conj() @ (mats.L - mats.H) @ g)) / denom


def covariance_matrix(mats: KoopmanMatrices) -> np.ndarray:
    """The covariance estimate L - H (Hermitian for Hermitian inputs)."""
    _require_H(mats, "covariance_matrix")
    return mats.L - mats.H


def evaluate_residuals(
    pairs: list[SpectralResult], mats: KoopmanMatrices
) -> list[SpectralResult]:
    """Fill the residual fields of eigensolver output against the same matrices."""
    out = []
    for p in pairs:
        rep = residual_report(p.eigenvalue, p.coeffs, mats)
        out.append(
            replace(
                p,
                res_var=rep.res_var,
                res=rep.res,
                integrated_variance=rep.integrated_variance,
                res_var_clamped=rep.res_var_clamped,
                res_clamped=rep.res_clamped,
            )
        )
    return out


def _require_H(mats: KoopmanMatrices, what: str) -> None:
    if not mats.has_H:
        raise CapabilityError(
            f"{what} requires the cross-batch matrix H; "
            "provide batched data with M2 >= 2 or bin the snapshots"
        )
