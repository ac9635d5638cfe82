"""Heterogeneous sound-speed fields and the conditioning stack.

Speed maps are stationary Gaussian random fields synthesized spectrally:
complex white noise is shaped by an exponential envelope in frequency
space, transformed back with an inverse real FFT, mean-centered and
mapped to physical speeds.  Draws are rejected until every grid value
lies strictly inside the admissible band.

Frequency grids use the plain real-FFT convention with unit sample
spacing (``numpy.fft.rfftfreq`` / ``fftfreq``); any physical wavenumber
scaling is absorbed into the correlation length parameter.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import GenerationError

REJECTION_CAP = 1000


def split_rng(root_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for one unit of work under a root seed.

    Streams are derived through ``SeedSequence`` spawn keys, so parallel
    generation is order-independent: record ``i`` sees the same stream no
    matter how many other records were drawn before it.
    """
    ss = np.random.SeedSequence(entropy=root_seed, spawn_key=tuple(key))
    return np.random.default_rng(ss)


@dataclass(frozen=True)
class GrfHyperParams:
    """Spectral-envelope and speed-map parameters for one field family."""

    alpha: float
    ell: float
    c_bg: float
    sigma_c: float
    c_min: float
    c_max: float
    alpha_range: tuple[float, float] = (0.5, 2.5)
    ell_range: tuple[float, float] = (0.35, 0.7)

    def validate(self) -> None:
        if not (self.alpha > 0 and self.ell > 0):
            raise ValueError(f"alpha and ell must be positive, got {self.alpha}, {self.ell}")
        if not (self.c_min < self.c_bg < self.c_max):
            raise ValueError(
                f"need c_min < c_bg < c_max, got {self.c_min}, {self.c_bg}, {self.c_max}"
            )
        if not self.sigma_c > 0:
            raise ValueError(f"sigma_c must be positive, got {self.sigma_c}")


@dataclass(frozen=True)
class CoefficientField:
    """Sound-speed map c(x) on a uniform grid."""

    values: np.ndarray
    dx: float
    seed: int = -1

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


@dataclass(frozen=True)
class ConditioningStack:
    """Clean model inputs: normalized speed, source mask, positional encodings.

    ``channels`` has shape (C, *grid) with channel 0 the normalized speed,
    channel 1 the binary source mask, and the rest sin/cos coordinate
    encodings at dyadic frequencies.
    """

    channels: np.ndarray
    encoding_levels: int


def spectral_envelope(kgrid: np.ndarray, alpha: float, ell: float) -> np.ndarray:
    """Envelope exp(-(ell*K)^alpha) evaluated on a nonnegative frequency grid."""
    kgrid = np.asarray(kgrid, dtype=float)
    if not (np.isfinite(alpha) and np.isfinite(ell)):
        raise ValueError("alpha and ell must be finite")
    if alpha <= 0 or ell <= 0:
        raise ValueError(f"alpha and ell must be positive, got {alpha}, {ell}")
    if not np.all(np.isfinite(kgrid)):
        raise ValueError("frequency grid contains non-finite values")
    return np.exp(-((ell * kgrid) ** alpha))


def _frequency_grid(shape: tuple[int, ...]) -> np.ndarray:
    """|K| on the half-spectrum grid matching a real FFT of ``shape``."""
    if len(shape) == 1:
        return np.abs(np.fft.rfftfreq(shape[0]))
    if len(shape) == 2:
        kx = np.fft.fftfreq(shape[0])[:, None]
        ky = np.fft.rfftfreq(shape[1])[None, :]
        return np.sqrt(kx**2 + ky**2)
    raise ValueError(f"only 1D and 2D grids are supported, got shape {shape}")


def draw_hyperparams(hp: GrfHyperParams, rng: np.random.Generator) -> GrfHyperParams:
    """Resample (alpha, ell) uniformly from their configured ranges."""
    alpha = rng.uniform(*hp.alpha_range)
    ell = rng.uniform(*hp.ell_range)
    return replace(hp, alpha=alpha, ell=ell)


def sample_grf(
    shape: tuple[int, ...],
    hp: GrfHyperParams,
    seed: int,
    *,
    dx: float = 1.0,
    max_attempts: int = REJECTION_CAP,
) -> CoefficientField:
    """Draw one admissible sound-speed field.

    Unit-variance complex white noise per half-spectrum mode is shaped by
    the spectral envelope, inverse-real-FFT'd, mean-centered, and mapped to
    ``c_bg + sigma_c * u``.  The draw is repeated until all values lie
    strictly inside (c_min, c_max); exceeding the attempt cap raises
    ``GenerationError`` rather than clamping, which would bias the family.
    """
    hp.validate()
    if any(n < 2 for n in shape):
        raise ValueError(f"grid must have at least 2 points per axis, got {shape}")
    rng = split_rng(seed)
    lam = spectral_envelope(_frequency_grid(shape), hp.alpha, hp.ell)
    for _ in range(max_attempts):
        eta = rng.standard_normal(lam.shape) + 1j * rng.standard_normal(lam.shape)
        if len(shape) == 1:
            u = np.fft.irfft(lam * eta, n=shape[0])
        else:
            u = np.fft.irfft2(lam * eta, s=shape)
        u -= u.mean()
        c = hp.c_bg + hp.sigma_c * u
        if c.min() > hp.c_min and c.max() < hp.c_max:
            return CoefficientField(values=c, dx=dx, seed=seed)
    raise GenerationError(
        f"no admissible field within {max_attempts} attempts (seed={seed})", hyperparams=hp
    )


def source_mask(shape: tuple[int, ...], center: tuple[int, ...], radius: float) -> np.ndarray:
    """Binary disk mask; the disk must sit strictly inside the grid."""
    center = tuple(int(c) for c in np.atleast_1d(center))
    if len(center) != len(shape):
        raise ValueError(f"center {center} does not match grid rank {len(shape)}")
    for c, n in zip(center, shape):
        if c - radius < 1 or c + radius > n - 2:
            raise ValueError(f"source disk (center={center}, radius={radius}) touches the boundary")
    axes = np.ogrid[tuple(slice(0, n) for n in shape)]
    dist2 = sum((ax - c) ** 2 for ax, c in zip(axes, center))
    return (dist2 <= radius**2).astype(float)


def positional_encodings(shape: tuple[int, ...], levels: int) -> np.ndarray:
    """Dyadic sin/cos encodings of normalized coordinates, shape (2*d*levels, *grid)."""
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    coords = []
    for axis, n in enumerate(shape):
        x = np.linspace(0.0, 1.0, n)
        expand = [None] * len(shape)
        expand[axis] = slice(None)
        coords.append(np.broadcast_to(x[tuple(expand)], shape))
    channels = []
    for lvl in range(levels):
        freq = 2.0**lvl * np.pi
        for x in coords:
            channels.append(np.sin(freq * x))
            channels.append(np.cos(freq * x))
    return np.stack(channels)


def build_conditioning(
    c: CoefficientField,
    source_center: tuple[int, ...],
    source_radius: float,
    levels: int,
    *,
    stats: tuple[float, float] | None = None,
) -> ConditioningStack:
    """Assemble the conditioning stack for one coefficient field.

    ``stats`` gives the (mean, std) used to normalize the speed channel;
    production pipelines pass dataset-level statistics from the manifest so
    train and test conditioning agree.  When omitted, the field's own
    statistics are used.
    """
    values = c.values
    if stats is None:
        mean, std = float(values.mean()), float(values.std())
    else:
        mean, std = stats
    if std <= 0:
        std = 1.0
    speed = (values - mean) / std
    mask = source_mask(values.shape, source_center, source_radius)
    enc = positional_encodings(values.shape, levels)
    return ConditioningStack(
        channels=np.concatenate([speed[None], mask[None], enc]),
        encoding_levels=levels,
    )
