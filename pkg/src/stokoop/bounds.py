"""Concentration bounds for the matrix estimators under i.i.d. sampling.

For sub-Gaussian sampling with scale Upsilon, dictionary constants
alpha = sqrt(sum c_k^2), beta = sqrt(sum of squared sup-norms), and a
Lipschitz constant c of the dynamics, the Frobenius estimation errors
of the three estimators satisfy

    P(|A - Aest| < t) >= 1 - exp(2 log(2N) - M t^2 / (24 U^2 (c^2+1) a^2 b^2))
    P(|G - Gest| < t) >= 1 - exp(2 log(2N) - M t^2 / (48 U^2 a^2 b^2))
    P(|L - Lest| < t) >= 1 - exp(2 log(2N) - M t^2 / (48 U^2 c^2 a^2 b^2)).

Bounds can be negative for small M; they are reported unclamped with a
vacuity flag so callers can read off the sample size a meaningful
guarantee requires.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dictionary import Dictionary

__all__ = [
    "ConcentrationInputs",
    "ConcentrationBounds",
    "dictionary_constants",
    "concentration_bounds",
    "estimate_upsilon",
]


@dataclass(frozen=True)
class ConcentrationInputs:
    M: int
    N: int
    t: float
    upsilon: float
    c: float
    alpha: float
    beta: float

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError("M and N must be positive integers")
        for name in ("t", "upsilon", "c", "alpha", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class ConcentrationBounds:
    p_A: float
    p_G: float
    p_L: float

    @property
    def vacuous(self) -> dict[str, bool]:
        return {"A": self.p_A <= 0, "G": self.p_G <= 0, "L": self.p_L <= 0}


def dictionary_constants(dictionary: Dictionary) -> tuple[float, float]:
    """(alpha, beta) = root-sum-square Lipschitz constants and sup-norms."""
    lip = dictionary.lipschitz
    sup = dictionary.sup_norms
    if not (np.all(np.isfinite(lip)) and np.all(np.isfinite(sup))):
        raise ValueError("dictionary constants must be finite")
    return float(np.sqrt(np.sum(lip**2))), float(np.sqrt(np.sum(sup**2)))


def concentration_bounds(inp: ConcentrationInputs) -> ConcentrationBounds:
    """Probability lower bounds for the A, G, L estimators at radius t."""
    log_term = 2.0 * np.log(2.0 * inp.N)
    common = inp.M * inp.t**2 / (inp.upsilon**2 * inp.alpha**2 * inp.beta**2)
    p_A = 1.0 - np.exp(log_term - common / (24.0 * (inp.c**2 + 1.0)))
    p_G = 1.0 - np.exp(log_term - common / 48.0)
    p_L = 1.0 - np.exp(log_term - common / (48.0 * inp.c**2))
    return ConcentrationBounds(p_A=float(p_A), p_G=float(p_G), p_L=float(p_L))


def estimate_upsilon(samples, tol: float = 1e-10, max_iter: int = 200) -> float:
    """Sub-Gaussian scale from samples of the joint variable kappa = (x, tau).

    Solves the defining infimum over s of

        exp(E|kappa - E kappa|^2 / s^2) * E exp(|kappa - E kappa|^2 / s^2) <= 2

    by bisection, with both expectations replaced by sample means. The
    criterion function is monotone decreasing in s, so the bisection
    converges to the smallest feasible scale.
    """
    k = np.atleast_2d(np.asarray(samples, dtype=float))
    if k.shape[0] < 2:
        raise ValueError("need at least two samples")
    dev_sq = np.sum((k - k.mean(axis=0)) ** 2, axis=1)
    mean_sq = float(dev_sq.mean())
    if mean_sq == 0.0:
        return 0.0

    def feasible(s: float) -> bool:
        inv = 1.0 / (s * s)
        return np.exp(mean_sq * inv) * float(np.mean(np.exp(dev_sq * inv))) <= 2.0

    hi = np.sqrt(mean_sq)
    for _ in range(max_iter):
        if feasible(hi):
            break
        hi *= 2.0
    else:
        raise ValueError("failed to bracket the sub-Gaussian scale")
    lo = hi / 2.0
    while lo > tol and feasible(lo):
        hi = lo
        lo /= 2.0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if feasible(mid):
            hi = mid
        else:
            lo = mid
        if hi - lo <= tol * hi:
            break
    return float(hi)
