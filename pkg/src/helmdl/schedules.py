"""Noise schedules and closed-form forward-diffusion marginals.

Discrete schedules carry {beta_t, alpha_t, alpha_bar_t}; the continuous
variance-preserving scalings (mu(t), sigma(t)) are the closed-form
counterparts matched to the same schedule kind and parameters, with
mu(t) = exp(-0.5 * int_0^t beta(s) ds) and sigma = sqrt(1 - mu^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Canonical defaults; the schedules are named without parameters upstream,
# so these are recorded in every run config.
BETA_MIN = 1e-4
BETA_MAX = 0.02
COSINE_OFFSET = 0.008
BETA_CLIP = 0.999

# Keeps the t -> 1 endpoint of the continuous scalings divisible; the cosine
# closed form vanishes there.
MU_FLOOR = 1e-8


@dataclass(frozen=True)
class NoiseSchedule:
    kind: str
    T: int
    beta: np.ndarray
    alpha: np.ndarray
    alpha_bar: np.ndarray
    beta_min: float = BETA_MIN
    beta_max: float = BETA_MAX
    s_offset: float = COSINE_OFFSET

    def validate(self) -> None:
        if np.any(self.beta <= 0) or np.any(self.beta >= 1):
            raise ValueError("beta values must lie in (0, 1)")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")
        if self.T >= 1000 and self.alpha_bar[-1] > 0.01:
            raise ValueError(f"alpha_bar[T] = {self.alpha_bar[-1]:.4f} not near 0 at T={self.T}")


def _cosine_g(s, s_offset: float):
    return np.cos(((s + s_offset) / (1.0 + s_offset)) * np.pi / 2.0) ** 2


def make_schedule(
    kind: str,
    T: int,
    *,
    beta_min: float = BETA_MIN,
    beta_max: float = BETA_MAX,
    s_offset: float = COSINE_OFFSET,
) -> NoiseSchedule:
    """Build a discrete schedule of the given kind over T steps."""
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    if kind == "linear":
        if not (0 < beta_min <= beta_max < 1):
            raise ValueError(f"need 0 < beta_min <= beta_max < 1, got {beta_min}, {beta_max}")
        beta = np.linspace(beta_min, beta_max, T)
    elif kind == "cosine":
        if s_offset <= 0:
            raise ValueError(f"s_offset must be positive, got {s_offset}")
        ts = np.arange(T + 1) / T
        bar = _cosine_g(ts, s_offset) / _cosine_g(0.0, s_offset)
        beta = np.clip(1.0 - bar[1:] / bar[:-1], None, BETA_CLIP)
    else:
        raise ValueError(f"unknown schedule kind {kind!r}")
    alpha = 1.0 - beta
    sched = NoiseSchedule(
        kind=kind,
        T=T,
        beta=beta,
        alpha=alpha,
        alpha_bar=np.cumprod(alpha),
        beta_min=beta_min,
        beta_max=beta_max,
        s_offset=s_offset,
    )
    sched.validate()
    return sched


def forward_marginal(u0: np.ndarray, t, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Corrupt u0 to step t: sqrt(abar_t) u0 + sqrt(1 - abar_t) eps.

    ``t`` is a 1-based step index; an integer array selects per-sample steps
    along the leading axis of ``u0``.
    """
    t = np.asarray(t)
    if np.any(t < 1) or np.any(t > sched.T):
        raise ValueError(f"step index out of range 1..{sched.T}")
    abar = sched.alpha_bar[t - 1]
    if t.ndim:
        abar = abar.reshape((-1,) + (1,) * (u0.ndim - 1))
    return np.sqrt(abar) * u0 + np.sqrt(1.0 - abar) * eps


@dataclass(frozen=True)
class ContinuousVp:
    """Closed-form variance-preserving scalings for t in [0, 1]."""

    kind: str
    T: int
    beta_min: float
    beta_max: float
    s_offset: float

    def mu(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "linear":
            # beta(s) = T * (beta_min + s * (beta_max - beta_min))
            integral = self.T * (self.beta_min * t + 0.5 * (self.beta_max - self.beta_min) * t**2)
            mu2 = np.exp(-integral)
        else:
            mu2 = _cosine_g(t, self.s_offset) / _cosine_g(0.0, self.s_offset)
        return np.maximum(np.sqrt(mu2), MU_FLOOR)

    def sigma(self, t):
        return np.sqrt(np.maximum(1.0 - self.mu(t) ** 2, 0.0))


def vp_scalings(t, sched: NoiseSchedule) -> tuple[np.ndarray, np.ndarray]:
    """(mu(t), sigma(t)) for the continuous schedule matched to ``sched``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t > 1):
        raise ValueError("t must lie in [0, 1]")
    vp = ContinuousVp(
        kind=sched.kind,
        T=sched.T,
        beta_min=sched.beta_min,
        beta_max=sched.beta_max,
        s_offset=sched.s_offset,
    )
    return vp.mu(t), vp.sigma(t)
