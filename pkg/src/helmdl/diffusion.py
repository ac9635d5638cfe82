"""Conditional denoising training and reverse-time samplers.

Training minimizes ||eps - eps_hat(u_t, t, z)||^2 with t drawn uniformly
from the discrete grid {1..t_steps} and u_t from the closed-form forward
marginal; an EMA shadow of the parameters is maintained for sampling.
Reverse samplers: ancestral (stepwise Gaussian), implicit (deterministic
unless eta > 0), and the continuous-time update driven by the analytic
variance-preserving scalings.  A matched deterministic regressor trains
the same backbone to predict the field directly.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import nn
from .errors import TrainingFailure
from .fields import split_rng
from .schedules import NoiseSchedule, forward_marginal, make_schedule, vp_scalings

# Fixed spawn-key tags so training, validation, and init draws never collide.
_VAL_STREAM = 9001
_TRAIN_STREAM = 9002
_INIT_STREAM = 9003


@dataclass
class TrainConfig:
    epochs: int
    batch_size: int = 32
    learning_rate: float = 1e-3
    lr_decay_every: int = 0
    lr_decay_factor: float = 0.5
    ema_decay: float = 0.999
    seed: int = 0
    t_steps: int = 1000
    schedule_kind: str = "cosine"

    def validate(self) -> None:
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class SampleConfig:
    sampler: str = "ddpm"
    schedule: str = "cosine"
    steps: int = 1000
    eta: float = 0.0
    num_samples: int = 10
    seed: int = 0

    def validate(self) -> None:
        if self.sampler not in ("ddpm", "ddim", "sde"):
            raise ValueError(f"unknown sampler {self.sampler!r}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError("eta must lie in [0, 1]")


@dataclass
class Checkpoint:
    """In-memory trained model; serialized through the store module."""

    kind: str  # "diffusion" or "regressor"
    config: nn.DenoiserConfig
    params: dict[str, np.ndarray]
    ema: dict[str, np.ndarray]
    ema_decay: float
    schedule_kind: str
    t_steps: int
    train_log: list[dict] = field(default_factory=list)
    seeds: dict = field(default_factory=dict)


class NetDenoiser:
    """Checkpoint-backed noise predictor using the EMA weights."""

    def __init__(self, ckpt: Checkpoint, use_ema: bool = True):
        self.params = ckpt.ema if use_ema else ckpt.params
        self.cfg = ckpt.config

    def predict(self, u, z, t, signal_scale, noise_scale):
        return nn.denoise(self.params, self.cfg, u, z, np.full(u.shape[0], t))


class OptimalDenoiser:
    """Closed-form optimal predictor for a single-point conditional target."""

    def __init__(self, u_star: np.ndarray):
        self.u_star = np.asarray(u_star, dtype=float)

    def predict(self, u, z, t, signal_scale, noise_scale):
        return (u - signal_scale * self.u_star[None, :]) / noise_scale


def _lr_at(cfg: TrainConfig, step: int) -> float:
    if cfg.lr_decay_every <= 0:
        return cfg.learning_rate
    return cfg.learning_rate * cfg.lr_decay_factor ** (step // cfg.lr_decay_every)


def validation_loss(
    params,
    net_cfg: nn.DenoiserConfig,
    z_val,
    u_val,
    cfg: TrainConfig,
    epoch: int,
    sched: NoiseSchedule | None,
) -> float:
    """Deterministic validation loss; re-runnable from a stored checkpoint."""
    rng = split_rng(cfg.seed, _VAL_STREAM, epoch)
    n = u_val.shape[0]
    if sched is None:  # regressor: clean inputs, direct target
        u_t = np.zeros_like(u_val)
        t_cont = np.zeros(n)
        target = u_val
    else:
        t_idx = rng.integers(1, cfg.t_steps + 1, size=n)
        eps = rng.standard_normal(u_val.shape)
        u_t = forward_marginal(u_val, t_idx, eps, sched)
        t_cont = t_idx / cfg.t_steps
        target = eps
    total = 0.0
    for lo in range(0, n, 256):
        sl = slice(lo, min(lo + 256, n))
        out = nn.forward(params, net_cfg, u_t[sl], z_val[sl], t_cont[sl])
        total += float(np.sum((out - target[sl]) ** 2))
    return total / target.size


def _train_backbone(
    z_train,
    u_train,
    z_val,
    u_val,
    cfg: TrainConfig,
    kind: str,
    net_cfg: nn.DenoiserConfig | None = None,
) -> Checkpoint:
    cfg.validate()
    if u_train.shape[0] == 0:
        raise ValueError("empty training split")
    if net_cfg is None:
        net_cfg = nn.DenoiserConfig(cond_channels=z_train.shape[1])
    sched = make_schedule(cfg.schedule_kind, cfg.t_steps) if kind == "diffusion" else None

    params = nn.init_params(net_cfg, split_rng(cfg.seed, _INIT_STREAM))
    ema = {k: v.copy() for k, v in params.items()}
    opt = nn.adam_init(params)
    rng = split_rng(cfg.seed, _TRAIN_STREAM)

    ckpt = Checkpoint(
        kind=kind,
        config=net_cfg,
        params=params,
        ema=ema,
        ema_decay=cfg.ema_decay,
        schedule_kind=cfg.schedule_kind,
        t_steps=cfg.t_steps,
        seeds={"train": cfg.seed},
    )
    last_good: Checkpoint | None = None

    n = u_train.shape[0]
    step = 0
    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        losses = []
        for lo in range(0, n, cfg.batch_size):
            idx = perm[lo : lo + cfg.batch_size]
            u0 = u_train[idx]
            if kind == "diffusion":
                t_idx = rng.integers(1, cfg.t_steps + 1, size=idx.size)
                eps = rng.standard_normal(u0.shape)
                u_t = forward_marginal(u0, t_idx, eps, sched)
                loss, grads = nn.loss_and_grads(
                    params, net_cfg, u_t, z_train[idx], t_idx / cfg.t_steps, eps
                )
            else:
                loss, grads = nn.loss_and_grads(
                    params, net_cfg, np.zeros_like(u0), z_train[idx], np.zeros(idx.size), u0
                )
            if not np.isfinite(loss):
                raise TrainingFailure(
                    f"non-finite loss at epoch {epoch} step {step}", checkpoint=last_good
                )
            nn.adam_step(params, grads, opt, _lr_at(cfg, step))
            nn.ema_update(ema, params, cfg.ema_decay)
            losses.append(loss)
            step += 1
        val = validation_loss(params, net_cfg, z_val, u_val, cfg, epoch, sched)
        ckpt.train_log.append(
            {"epoch": epoch, "train_loss": float(np.mean(losses)), "val_loss": val}
        )
        last_good = copy.deepcopy(ckpt)
    return ckpt


def train(dataset_arrays, cfg: TrainConfig, net_cfg: nn.DenoiserConfig | None = None) -> Checkpoint:
    """Train the conditional denoiser on (z_train, u_train, z_val, u_val)."""
    return _train_backbone(*dataset_arrays, cfg, "diffusion", net_cfg)


def train_regressor(
    dataset_arrays, cfg: TrainConfig, net_cfg: nn.DenoiserConfig | None = None
) -> Checkpoint:
    """Train the deterministic baseline: same backbone, clean inputs, direct target."""
    return _train_backbone(*dataset_arrays, cfg, "regressor", net_cfg)


def predict_regressor(ckpt: Checkpoint, z: np.ndarray, *, use_ema: bool = True) -> np.ndarray:
    params = ckpt.ema if use_ema else ckpt.params
    n, n_grid = z.shape[0], z.shape[-1]
    out = np.empty((n, n_grid))
    for lo in range(0, n, 256):
        sl = slice(lo, min(lo + 256, n))
        out[sl] = nn.forward(params, ckpt.config, np.zeros((sl.stop - lo, n_grid)), z[sl], 0.0)
    return out


def posterior_variance(sched: NoiseSchedule, t: int) -> float:
    """Reverse-transition variance at step t, with the empty-product convention abar_0 = 1."""
    abar_t = sched.alpha_bar[t - 1]
    abar_prev = sched.alpha_bar[t - 2] if t > 1 else 1.0
    return float((1.0 - abar_prev) / (1.0 - abar_t) * sched.beta[t - 1])


def sample_ddpm(model, z: np.ndarray, sched: NoiseSchedule, seed: int) -> np.ndarray:
    """Ancestral sampling; one chain per row of z."""
    rng = split_rng(seed)
    b, n = z.shape[0], z.shape[-1]
    u = rng.standard_normal((b, n))
    for t in range(sched.T, 0, -1):
        abar = sched.alpha_bar[t - 1]
        eps_hat = model.predict(u, z, t / sched.T, np.sqrt(abar), np.sqrt(1.0 - abar))
        mean = (u - sched.beta[t - 1] / np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(
            sched.alpha[t - 1]
        )
        if t > 1:
            u = mean + np.sqrt(posterior_variance(sched, t)) * rng.standard_normal((b, n))
        else:
            u = mean
    return u


def ddim_taus(T: int, steps: int) -> np.ndarray:
    """Strictly decreasing step subsequence from T down, of length <= steps."""
    return np.unique(np.linspace(1, T, min(steps, T)).round().astype(int))[::-1]


def sample_ddim(
    model, z: np.ndarray, sched: NoiseSchedule, taus: np.ndarray, eta: float, seed: int
) -> np.ndarray:
    """Implicit sampling along a decreasing subsequence; deterministic at eta = 0."""
    taus = np.asarray(taus, dtype=int)
    if taus.ndim != 1 or taus.size == 0 or np.any(np.diff(taus) >= 0):
        raise ValueError("taus must be a strictly decreasing step sequence")
    if taus[0] > sched.T or taus[-1] < 1:
        raise ValueError(f"taus must lie within 1..{sched.T}")
    rng = split_rng(seed)
    b, n = z.shape[0], z.shape[-1]
    u = rng.standard_normal((b, n))
    for i, t in enumerate(taus):
        abar = sched.alpha_bar[t - 1]
        eps_hat = model.predict(u, z, t / sched.T, np.sqrt(abar), np.sqrt(1.0 - abar))
        z0_hat = (u - np.sqrt(1.0 - abar) * eps_hat) / np.sqrt(abar)
        t_next = taus[i + 1] if i + 1 < taus.size else 0
        abar_next = sched.alpha_bar[t_next - 1] if t_next > 0 else 1.0
        direction = np.sqrt(1.0 - abar_next)
        if eta > 0.0 and t_next > 0:
            mix = np.sqrt(1.0 - eta**2) * eps_hat + eta * rng.standard_normal((b, n))
            u = np.sqrt(abar_next) * z0_hat + direction * mix
        else:
            u = np.sqrt(abar_next) * z0_hat + direction * eps_hat
    return u


def sample_sde(model, z: np.ndarray, sched: NoiseSchedule, steps: int, seed: int) -> np.ndarray:
    """Continuous-time ancestral update using the analytic VP scalings."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    rng = split_rng(seed)
    b, n = z.shape[0], z.shape[-1]
    u = rng.standard_normal((b, n))
    for k in range(steps):
        t = (steps - k) / steps
        t_next = (steps - k - 1) / steps
        mu_t, sig_t = vp_scalings(t, sched)
        mu_n, sig_n = vp_scalings(t_next, sched)
        eps_hat = model.predict(u, z, t, mu_t, sig_t)
        ratio = mu_n / mu_t
        u = ratio * u + (sig_n - ratio * sig_t) * eps_hat
    return u


def sample_fields(
    model,
    z: np.ndarray,
    cfg: SampleConfig,
    *,
    trained_t_steps: int = 1000,
    chunk: int = 512,
) -> np.ndarray:
    """Draw cfg.num_samples fields per conditioning input; returns (n, S, N).

    Chains for all requested samples run in lockstep batches of at most
    ``chunk`` so large test sets stay within memory.
    """
    cfg.validate()
    n_in, n_grid = z.shape[0], z.shape[-1]
    s = cfg.num_samples
    if cfg.sampler == "ddpm":
        sched = make_schedule(cfg.schedule, cfg.steps)
    else:
        sched = make_schedule(cfg.schedule, trained_t_steps)
    out = np.empty((n_in * s, n_grid))
    z_rep = np.repeat(z, s, axis=0)
    for part, lo in enumerate(range(0, n_in * s, chunk)):
        sl = slice(lo, min(lo + chunk, n_in * s))
        if cfg.sampler == "ddpm":
            out[sl] = sample_ddpm(model, z_rep[sl], sched, cfg.seed + part)
        elif cfg.sampler == "ddim":
            taus = ddim_taus(sched.T, cfg.steps)
            out[sl] = sample_ddim(model, z_rep[sl], sched, taus, cfg.eta, cfg.seed + part)
        else:
            out[sl] = sample_sde(model, z_rep[sl], sched, cfg.steps, cfg.seed + part)
    return out.reshape(n_in, s, n_grid)
