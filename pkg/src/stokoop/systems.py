"""Built-in benchmark systems with known spectral structure.

Two systems are provided: a noisy circle rotation whose spectrum is
available in closed form (so estimators can be checked against exact
matrices), and the stochastic Van der Pol oscillator integrated with
Euler-Maruyama, whose zero-noise Koopman eigenvalues form a lattice.

All randomness flows through the counter-based Philox generator with
one independent stream per realization, and normal variates are drawn
by inverse CDF so datasets are bit-stable across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import InstabilityError
from .matrices import KoopmanMatrices
from .snapshots import (
    BatchedSnapshotSet,
    SnapshotSet,
    monte_carlo_weights,
    periodic_trapezoid_weights,
)

__all__ = [
    "CircleMapConfig",
    "VdpConfig",
    "LatticePoint",
    "circle_step",
    "circle_alpha",
    "circle_variance",
    "circle_reference_matrices",
    "circle_lipschitz",
    "generate_circle_batched",
    "generate_circle_iid",
    "vdp_drift",
    "vdp_em_trajectory",
    "vdp_batched_from_trajectory",
    "vdp_unbatched_from_trajectory",
    "vdp_lattice",
    "default_burn_in",
]

_TWO53 = float(1 << 53)
_OVERFLOW_GUARD = 1e8


def _generator(seed_seq: np.random.SeedSequence) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed_seq))


def _uniform01(gen: np.random.Generator, size) -> np.ndarray:
    # (i + 0.5) / 2^53 lies strictly inside (0, 1), safe for inverse CDFs.
    i = gen.integers(0, 1 << 53, size=size, dtype=np.uint64)
    return (i.astype(np.float64) + 0.5) / _TWO53


def _standard_normal(gen: np.random.Generator, size) -> np.ndarray:
    return ndtri(_uniform01(gen, size))


# ---------------------------------------------------------------------------
# Noisy circle map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CircleMapConfig:
    """x -> (x + c + amp*sin(2*pi*x) + tau) mod 1 with tau ~ U[0, noise_sigma].

    Defaults reproduce the benchmark setting c = 1/5, amp = 1/(4*pi),
    full-circle uniform noise. noise_sigma < 1 keeps closed forms while
    giving a nontrivial point spectrum.
    """

    c: float = 0.2
    amp: float = 1.0 / (4.0 * np.pi)
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.noise_sigma <= 1.0:
            raise ValueError("noise_sigma must lie in (0, 1]")


def circle_step(x, tau, cfg: CircleMapConfig):
    """One noisy rotation step; vectorizes over x and tau."""
    x = np.asarray(x, dtype=float)
    return np.mod(x + cfg.c + cfg.amp * np.sin(2.0 * np.pi * x) + tau, 1.0)


def circle_alpha(j: int, cfg: CircleMapConfig) -> complex:
    """Exact mode multiplier: e^{2*pi*i*j*c} times the noise characteristic value.

    For U[0, sigma] noise the characteristic factor is
    (e^{2*pi*i*j*sigma} - 1) / (2*pi*i*j*sigma); it vanishes for all
    j != 0 once sigma = 1.
    """
    if j == 0:
        return 1.0 + 0.0j
    s = cfg.noise_sigma
    z = 2.0 * np.pi * 1j * j
    return complex(np.exp(z * cfg.c) * (np.exp(z * s) - 1.0) / (z * s))


def circle_variance(j: int, cfg: CircleMapConfig) -> float:
    """Integrated one-step variance of the j-th Fourier mode: 1 - |alpha_j|^2.

    Valid for any amp, since the deterministic phase factor has unit
    modulus.
    """
    return 1.0 - abs(circle_alpha(j, cfg)) ** 2


def circle_lipschitz(cfg: CircleMapConfig) -> float:
    """Joint Lipschitz constant of the step map in (x, tau)."""
    return float(np.hypot(1.0 + 2.0 * np.pi * cfg.amp, 1.0))


def circle_reference_matrices(cfg: CircleMapConfig, n: int) -> KoopmanMatrices:
    """Exact Galerkin matrices on the Fourier modes j = -n..n, amp = 0 only.

    With no deterministic forcing the modes diagonalize everything:
    G = L = I, A = diag(alpha_j), H = diag(|alpha_j|^2).
    """
    if cfg.amp != 0.0:
        raise ValueError("closed-form matrices require amp = 0")
    alphas = np.array([circle_alpha(j, cfg) for j in range(-n, n + 1)])
    N = 2 * n + 1
    eye = np.eye(N, dtype=complex)
    labels = tuple(f"fourier[j={j}]" for j in range(-n, n + 1))
    return KoopmanMatrices(
        G=eye,
        A=np.diag(alphas),
        L=eye.copy(),
        H=np.diag(np.abs(alphas) ** 2).astype(complex),
        meta={"labels": labels, "estimator": "analytic", "system": "circle"},
    )


def generate_circle_batched(
    cfg: CircleMapConfig, M1: int, M2: int
) -> BatchedSnapshotSet:
    """Equispaced states on [0,1) with M2 independent noisy images each.

    States carry periodic trapezoid weights; realization k draws its
    noise from its own Philox stream, so realizations are independent.
    """
    if M1 < 1 or M2 < 1:
        raise ValueError("M1 and M2 must be >= 1")
    x = (np.arange(M1, dtype=float) / M1)[:, None]
    weights = periodic_trapezoid_weights(M1, 1.0)
    streams = np.random.SeedSequence(cfg.seed).spawn(M2)
    reals = []
    for k in range(M2):
        tau = cfg.noise_sigma * _uniform01(_generator(streams[k]), M1)
        reals.append(circle_step(x[:, 0], tau, cfg)[:, None])
    return BatchedSnapshotSet(x, reals, weights)


def generate_circle_iid(cfg: CircleMapConfig, M: int) -> SnapshotSet:
    """M snapshot pairs with i.i.d. uniform states and uniform weights."""
    if M < 1:
        raise ValueError("M must be >= 1")
    ss_x, ss_tau = np.random.SeedSequence(cfg.seed).spawn(2)
    x = _uniform01(_generator(ss_x), M)
    tau = cfg.noise_sigma * _uniform01(_generator(ss_tau), M)
    y = circle_step(x, tau, cfg)
    return SnapshotSet(x[:, None], y[:, None], monte_carlo_weights(M))


# ---------------------------------------------------------------------------
# Stochastic Van der Pol oscillator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class VdpConfig:
    """Euler-Maruyama discretization of the noisy Van der Pol oscillator.

    dX1 = X2 dt,  dX2 = [mu (1 - X1^2) X2 - X1] dt + sqrt(2 delta) dB.
    ``koopman_dt`` must be an integer multiple of ``em_step``. ``burn_in``
    counts EM steps; None selects 50 revolutions of the deterministic
    limit cycle.
    """

    mu: float = 0.5
    delta: float = 0.02
    em_step: float = 3e-3
    koopman_dt: float = 0.3
    burn_in: int | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.delta < 0:
            raise ValueError("delta must be nonnegative")
        if not 0 < self.em_step <= self.koopman_dt:
            raise ValueError("need 0 < em_step <= koopman_dt")
        ratio = self.koopman_dt / self.em_step
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ValueError("koopman_dt must be an integer multiple of em_step")
        if self.burn_in is not None and self.burn_in < 0:
            raise ValueError("burn_in must be >= 0")

    @property
    def steps_per_sample(self) -> int:
        return int(round(self.koopman_dt / self.em_step))


def default_burn_in(cfg: VdpConfig, revolutions: float = 50.0) -> int:
    """EM steps covering the given number of deterministic limit-cycle periods."""
    omega0 = 1.0 - cfg.mu**2 / 16.0
    period = 2.0 * np.pi / omega0
    return int(math.ceil(revolutions * period / cfg.em_step))


def vdp_drift(state, mu: float):
    """Deterministic vector field (X2, mu (1 - X1^2) X2 - X1)."""
    x1, x2 = np.asarray(state, dtype=float)
    return np.array([x2, mu * (1.0 - x1**2) * x2 - x1])


def _em_steps_scalar(x1, x2, n_steps, cfg, noise):
    """Advance a single state n_steps; noise is a length-n_steps array or None."""
    h = cfg.em_step
    mu = cfg.mu
    for i in range(n_steps):
        d2 = mu * (1.0 - x1 * x1) * x2 - x1
        nx1 = x1 + h * x2
        nx2 = x2 + h * d2
        if noise is not None:
            nx2 += noise[i]
        x1, x2 = nx1, nx2
    if abs(x1) > _OVERFLOW_GUARD or abs(x2) > _OVERFLOW_GUARD:
        raise InstabilityError(
            "Van der Pol trajectory diverged; use a smaller em_step"
        )
    return x1, x2


def vdp_em_trajectory(cfg: VdpConfig, n_samples: int, x0=(2.0, 0.0)) -> np.ndarray:
    """Single trajectory sampled every koopman_dt after burn-in.

    Noise enters only the X2 component, scaled by sqrt(2 delta em_step).
    Returns an (n_samples, 2) array. With delta = 0 the scheme is the
    plain deterministic Euler method and no noise stream is consumed.
    """
    return _trajectory_with_stream(
        cfg, n_samples, np.random.SeedSequence(cfg.seed), x0=x0
    )


def _em_steps_vector(states: np.ndarray, n_steps: int, cfg: VdpConfig, gen):
    """Advance an (M, 2) state block n_steps with one shared stream."""
    h = cfg.em_step
    mu = cfg.mu
    scale = math.sqrt(2.0 * cfg.delta * cfg.em_step)
    x1 = states[:, 0].copy()
    x2 = states[:, 1].copy()
    for _ in range(n_steps):
        d2 = mu * (1.0 - x1 * x1) * x2 - x1
        nx1 = x1 + h * x2
        nx2 = x2 + h * d2
        if gen is not None:
            nx2 += scale * _standard_normal(gen, x1.shape[0])
        x1, x2 = nx1, nx2
    if np.max(np.abs(x1)) > _OVERFLOW_GUARD or np.max(np.abs(x2)) > _OVERFLOW_GUARD:
        raise InstabilityError(
            "Van der Pol batch evolution diverged; use a smaller em_step"
        )
    return np.column_stack([x1, x2])


def vdp_batched_from_trajectory(cfg: VdpConfig, M1: int) -> BatchedSnapshotSet:
    """Attractor samples from one long trajectory, two fresh images each.

    The trajectory supplies M1 states spaced koopman_dt apart; every
    state is then evolved one koopman_dt twice with independent noise
    streams, giving the M2 = 2 batched realizations. Weights are 1/M1.
    """
    if M1 < 1:
        raise ValueError("M1 must be >= 1")
    ss_traj, ss_r0, ss_r1 = np.random.SeedSequence(cfg.seed).spawn(3)
    x = _trajectory_with_stream(cfg, M1, ss_traj)
    reals = []
    for ss in (ss_r0, ss_r1):
        gen = _generator(ss) if cfg.delta > 0 else None
        reals.append(_em_steps_vector(x, cfg.steps_per_sample, cfg, gen))
    return BatchedSnapshotSet(x, reals, monte_carlo_weights(M1))


def vdp_unbatched_from_trajectory(cfg: VdpConfig, M: int) -> SnapshotSet:
    """Consecutive trajectory pairs (x_i, x_{i+1}) with uniform weights."""
    if M < 1:
        raise ValueError("M must be >= 1")
    samples = _trajectory_with_stream(cfg, M + 1, np.random.SeedSequence(cfg.seed))
    return SnapshotSet(samples[:-1], samples[1:], monte_carlo_weights(M))


def _trajectory_with_stream(
    cfg: VdpConfig, n_samples: int, ss: np.random.SeedSequence, x0=(2.0, 0.0)
) -> np.ndarray:
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    burn = cfg.burn_in if cfg.burn_in is not None else default_burn_in(cfg)
    stride = cfg.steps_per_sample
    gen = _generator(ss) if cfg.delta > 0 else None
    scale = math.sqrt(2.0 * cfg.delta * cfg.em_step)
    x1, x2 = float(x0[0]), float(x0[1])
    out = np.empty((n_samples, 2))
    if burn > 0:
        block = scale * _standard_normal(gen, burn) if gen is not None else None
        x1, x2 = _em_steps_scalar(x1, x2, burn, cfg, block)
    for s in range(n_samples):
        block = scale * _standard_normal(gen, stride) if gen is not None else None
        x1, x2 = _em_steps_scalar(x1, x2, stride, cfg, block)
        out[s, 0] = x1
        out[s, 1] = x2
    return out


@dataclass(frozen=True)
class LatticePoint:
    """One zero-noise Van der Pol Koopman eigenvalue exp((-m mu + i k w0) dt)."""

    m: int
    k: int
    value: complex

    @classmethod
    def make(cls, m: int, k: int, mu: float, dt: float) -> "LatticePoint":
        return cls(m=m, k=k, value=vdp_lattice(m, k, mu, dt))


def vdp_lattice(m: int, k: int, mu: float, dt: float) -> complex:
    """Lattice eigenvalue with base frequency w0 = 1 - mu^2/16."""
    if m < 0:
        raise ValueError("m must be >= 0")
    omega0 = 1.0 - mu**2 / 16.0
    return complex(np.exp((-m * mu + 1j * k * omega0) * dt))
