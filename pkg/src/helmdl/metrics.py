"""Error norms and spectral diagnostics for wavefield predictions.

Discrete gradients are forward differences with a circular wrap on the
last point, matching the denoiser's circular padding, so H1 and energy
values are reproducible bit-for-bit across the package.  In 2D an
interior window can be supplied to exclude absorbing layers from norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def _check_pair(pred: np.ndarray, truth: np.ndarray) -> None:
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")


def grad_forward(v: np.ndarray, dx: float) -> list[np.ndarray]:
    """Forward-difference gradient along each axis, wrapping circularly."""
    return [(np.roll(v, -1, axis=ax) - v) / dx for ax in range(v.ndim)]


def rel_l2(pred: np.ndarray, truth: np.ndarray) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    _check_pair(pred, truth)
    denom = np.linalg.norm(truth.ravel())
    if denom == 0:
        raise ValueError("reference field has zero norm")
    return float(np.linalg.norm((pred - truth).ravel()) / denom)


def _h1_norm_sq(v: np.ndarray, dx: float) -> float:
    cell = dx**v.ndim
    total = np.sum(np.abs(v) ** 2)
    for g in grad_forward(v, dx):
        total += np.sum(np.abs(g) ** 2)
    return float(total * cell)


def rel_h1(pred: np.ndarray, truth: np.ndarray, dx: float) -> float:
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    _check_pair(pred, truth)
    denom = _h1_norm_sq(truth, dx)
    if denom == 0:
        raise ValueError("reference field has zero H1 norm")
    return float(np.sqrt(_h1_norm_sq(pred - truth, dx) / denom))


def energy(u: np.ndarray, c: np.ndarray, omega: float, dx: float) -> float:
    """Discrete wave energy: sum(|grad u|^2 + (omega/c)^2 |u|^2) * dx^d."""
    u = np.asarray(u)
    c = np.asarray(c, dtype=float)
    if np.any(c <= 0):
        raise ValueError("sound speed must be strictly positive")
    cell = dx**u.ndim
    total = np.sum((omega / c) ** 2 * np.abs(u) ** 2)
    for g in grad_forward(u, dx):
        total += np.sum(np.abs(g) ** 2)
    return float(total * cell)


def rel_energy_error(
    pred: np.ndarray, truth: np.ndarray, c: np.ndarray, omega: float, dx: float
) -> float:
    _check_pair(np.asarray(pred), np.asarray(truth))
    e_truth = energy(truth, c, omega, dx)
    if e_truth == 0:
        raise ValueError("reference field has zero energy")
    return abs(energy(pred, c, omega, dx) - e_truth) / e_truth


def power_spectrum(u: np.ndarray) -> np.ndarray:
    """Squared modulus of the DFT, shifted so DC sits at the grid center."""
    return np.abs(np.fft.fftshift(np.fft.fftn(np.asarray(u)))) ** 2


@dataclass
class ErrorReport:
    """Per-sample relative errors with mean/std aggregates over S samples."""

    rel_l2: list[float] = field(default_factory=list)
    rel_h1: list[float] = field(default_factory=list)
    rel_energy: list[float] = field(default_factory=list)

    def add(self, pred, truth, c, omega, dx) -> None:
        self.rel_l2.append(rel_l2(pred, truth))
        self.rel_h1.append(rel_h1(pred, truth, dx))
        self.rel_energy.append(rel_energy_error(pred, truth, c, omega, dx))

    def summary(self) -> dict[str, tuple[float, float]]:
        out = {}
        for name in ("rel_l2", "rel_h1", "rel_energy"):
            vals = np.asarray(getattr(self, name))
            out[name] = (float(vals.mean()), float(vals.std()))
        return out
