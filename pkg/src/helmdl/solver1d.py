"""Reference 1D variable-coefficient Helmholtz solver.

Second-order finite differences in the frequency domain give one complex
tridiagonal system per solve: interior rows discretize u'' + k(x)^2 u = 0,
the left end is a Dirichlet source of amplitude omega, and the right end
is a first-order outgoing (Sommerfeld) closure.

Banded storage convention: three length-N vectors where, in row j,
``sub[j]`` multiplies u[j-1], ``main[j]`` multiplies u[j], and ``sup[j]``
multiplies u[j+1].  ``sub[0]`` and ``sup[N-1]`` are unused and kept zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SingularSystemError
from .fields import CoefficientField

RESIDUAL_TOL = 1e-10
PIVOT_FLOOR = 1e-300


@dataclass(frozen=True)
class Wavefield1D:
    """Complex pressure field on the solver grid."""

    values: np.ndarray
    omega: float
    dx: float


@dataclass
class BandedSystem:
    sub: np.ndarray
    main: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    @property
    def n(self) -> int:
        return self.main.shape[0]


def assemble_1d(c: CoefficientField, omega: float) -> BandedSystem:
    """Build the tridiagonal system for one speed map at angular frequency omega."""
    values = np.asarray(c.values, dtype=float)
    n = values.shape[0]
    if n < 3:
        raise ValueError(f"need at least 3 grid points, got {n}")
    if omega <= 0:
        raise ValueError(f"omega must be positive, got {omega}")
    if np.any(values <= 0):
        raise ValueError("sound speed must be strictly positive")

    k = omega / values
    kdx = k * c.dx

    sub = np.zeros(n, dtype=complex)
    main = np.zeros(n, dtype=complex)
    sup = np.zeros(n, dtype=complex)
    rhs = np.zeros(n, dtype=complex)

    sub[1:-1] = 1.0
    main[1:-1] = -2.0 + kdx[1:-1] ** 2
    sup[1:-1] = 1.0

    # Dirichlet source on the left, outgoing closure on the right.
    main[0] = 1.0
    sup[0] = 0.0
    rhs[0] = omega
    main[-1] = 1j * kdx[-1] - 1.0
    sub[-1] = 1.0
    rhs[-1] = 0.0
    return BandedSystem(sub=sub, main=main, sup=sup, rhs=rhs)


def solve_banded(sys: BandedSystem) -> np.ndarray:
    """Thomas elimination over the complex field."""
    n = sys.n
    d = sys.main.astype(complex).copy()
    b = sys.rhs.astype(complex).copy()
    sup = sys.sup
    sub = sys.sub
    for i in range(1, n):
        piv = d[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            raise SingularSystemError(f"pivot magnitude {abs(piv):.3e} at row {i - 1}")
        w = sub[i] / piv
        d[i] = d[i] - w * sup[i - 1]
        b[i] = b[i] - w * b[i - 1]
    if abs(d[-1]) < PIVOT_FLOOR:
        raise SingularSystemError(f"pivot magnitude {abs(d[-1]):.3e} at row {n - 1}")
    u = np.empty(n, dtype=complex)
    u[-1] = b[-1] / d[-1]
    for i in range(n - 2, -1, -1):
        u[i] = (b[i] - sup[i] * u[i + 1]) / d[i]
    return u


def apply_system(sys: BandedSystem, u: np.ndarray) -> np.ndarray:
    """Matrix-vector product of the assembled tridiagonal operator."""
    out = sys.main * u
    out[1:] += sys.sub[1:] * u[:-1]
    out[:-1] += sys.sup[:-1] * u[1:]
    return out


def residual(sys: BandedSystem, u: np.ndarray) -> float:
    """Relative infinity-norm residual ||Au - b|| / ||b||."""
    r = apply_system(sys, u) - sys.rhs
    return float(np.abs(r).max() / np.abs(sys.rhs).max())


def solve_helmholtz_1d(c: CoefficientField, f: float) -> Wavefield1D:
    """Solve for the complex field at source frequency f (Hz)."""
    omega = 2.0 * np.pi * f
    sys = assemble_1d(c, omega)
    u = solve_banded(sys)
    res = residual(sys, u)
    if res > RESIDUAL_TOL:
        raise SingularSystemError(f"relative residual {res:.3e} exceeds {RESIDUAL_TOL}")
    return Wavefield1D(values=u, omega=omega, dx=c.dx)
