"""Latent denoising diffusion: schedule, forward process, denoiser and sampler.

Steps are 1-based throughout (``t`` in ``1..T``); schedule arrays are stored
0-based, so step ``t`` lives at index ``t - 1``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .core import Conv1d, Linear, Module, ParamStore, Tensor, adam_step, no_grad, relu, sigmoid, tanh
from .core.tensor import concat, mean
from .errors import ConfigError, DimensionError, NumericError
from .tts import TokenSequence, TtsEncoder, duration_loss

SIGMA_MODES = ("beta", "beta_hat")


@dataclass(frozen=True)
class NoiseSchedule:
    beta: np.ndarray
    alpha: np.ndarray
    alpha_hat: np.ndarray
    beta_hat: np.ndarray

    @property
    def T(self) -> int:
        return len(self.beta)

    def check_step(self, t: int) -> int:
        if not 1 <= int(t) <= self.T:
            raise ConfigError(f"step {t} outside 1..{self.T}")
        return int(t) - 1

    def as_dict(self) -> dict[str, list[float]]:
        return {k: getattr(self, k).tolist() for k in ("beta", "alpha", "alpha_hat", "beta_hat")}

    @classmethod
    def from_dict(cls, d) -> "NoiseSchedule":
        return cls(*(np.asarray(d[k], dtype=np.float64) for k in ("beta", "alpha", "alpha_hat", "beta_hat")))


def make_schedule(T: int = 50, beta_start: float = 1e-4, beta_end: float = 0.2) -> NoiseSchedule:
    """Linear betas; cumulative products and posterior variances derived from them."""
    if T < 1:
        raise ConfigError(f"T must be >= 1, got {T}")
    if not 0 < beta_start <= beta_end < 1:
        raise ConfigError(f"need 0 < beta_start <= beta_end < 1, got {beta_start}, {beta_end}")
    beta = np.linspace(beta_start, beta_end, T)
    alpha = 1.0 - beta
    alpha_hat = np.empty(T)
    beta_hat = np.empty(T)
    alpha_hat[0] = alpha[0]
    beta_hat[0] = beta[0]
    for i in range(1, T):
        alpha_hat[i] = alpha_hat[i - 1] * alpha[i]
        beta_hat[i] = (1.0 - alpha_hat[i - 1]) / (1.0 - alpha_hat[i]) * beta[i]
    for arr in (beta, alpha, alpha_hat, beta_hat):
        arr.setflags(write=False)
    return NoiseSchedule(beta, alpha, alpha_hat, beta_hat)


def sinusoid(t, dim: int = 128) -> np.ndarray:
    """Interleaved ``sin(t / 10000^(2i/dim))``, ``cos(...)`` pairs; no range check."""
    t = np.asarray(t, dtype=np.float64)
    freq = 10000.0 ** (-np.arange(0, dim, 2) / dim)
    out = np.zeros(t.shape + (dim,))
    out[..., 0::2] = np.sin(t[..., None] * freq)
    out[..., 1::2] = np.cos(t[..., None] * freq)
    return out


def step_embedding(t: int, T: int, dim: int = 128) -> np.ndarray:
    if not 1 <= t <= T:
        raise ConfigError(f"step {t} outside 1..{T}")
    return sinusoid(t, dim)


def q_sample(sched: NoiseSchedule, z0, t, eps) -> np.ndarray:
    """Closed-form forward process ``sqrt(a_hat) z0 + sqrt(1 - a_hat) eps``.

    ``t`` may be an int or one step per leading item of ``z0``.
    """
    z0, eps = np.asarray(z0), np.asarray(eps)
    if z0.shape != eps.shape:
        raise DimensionError(f"noise shape {eps.shape} differs from latent shape {z0.shape}")
    t = np.asarray(t)
    if ((t < 1) | (t > sched.T)).any():
        raise ConfigError(f"steps must lie in 1..{sched.T}")
    ah = sched.alpha_hat[t - 1]
    if t.ndim:
        ah = ah.reshape(ah.shape + (1,) * (z0.ndim - t.ndim))
    return np.sqrt(ah) * z0 + np.sqrt(1.0 - ah) * eps


def q_step(sched: NoiseSchedule, z_prev, t: int, eps) -> np.ndarray:
    """One forward transition ``sqrt(alpha_t) z_{t-1} + sqrt(beta_t) eps``."""
    i = sched.check_step(t)
    return np.sqrt(sched.alpha[i]) * np.asarray(z_prev) + np.sqrt(sched.beta[i]) * np.asarray(eps)


@dataclass
class DenoiserConfig:
    n_lat: int = 16
    channels: int = 64
    blocks: int = 10
    cycle: int = 10
    kernel: int = 3
    emb_dim: int = 128


class ResidualBlock(Module):
    def __init__(self, cfg: DenoiserConfig, dilation: int, rng: np.random.Generator):
        c = cfg.channels
        self.dilation = dilation
        self.step = Linear(cfg.emb_dim, c, rng)
        self.conv = Conv1d(c, 2 * c, cfg.kernel, rng, dilation=dilation)
        self.cond = Conv1d(cfg.n_lat, 2 * c, 1, rng)
        self.res = Conv1d(c, c, 1, rng)
        self.skip = Conv1d(c, c, 1, rng)

    def __call__(self, x: Tensor, emb: Tensor, cond: Tensor) -> tuple[Tensor, Tensor]:
        c = x.shape[1]
        # the step embedding is C wide, so it joins before the conv doubles the width
        y = self.conv(x + self.step(emb).reshape(emb.shape[:1] + (c, 1))) + self.cond(cond)
        h = tanh(y[:, :c]) * sigmoid(y[:, c:])
        return (x + self.res(h)) * (1 / np.sqrt(2.0)), self.skip(h)


class Denoiser(Module):
    """Gated residual stack predicting the injected noise from ``(z_t, t, cond)``."""

    def __init__(self, cfg: DenoiserConfig | None = None, seed: int = 0):
        self.config = cfg = cfg or DenoiserConfig()
        rng = np.random.default_rng(seed)
        self.inp = Conv1d(cfg.n_lat, cfg.channels, 1, rng)
        self.blocks = [ResidualBlock(cfg, 2 ** (i % cfg.cycle), rng) for i in range(cfg.blocks)]
        self.head1 = Conv1d(cfg.channels, cfg.channels, 1, rng)
        self.head2 = Conv1d(cfg.channels, cfg.n_lat, 1, rng, zero_init=True)

    def __call__(self, z_t, t, cond) -> Tensor:
        """``z_t`` and ``cond`` are ``[n_lat, L]`` or ``[B, n_lat, L]``; ``t`` an int or one per item."""
        z_t = z_t if isinstance(z_t, Tensor) else Tensor(np.asarray(z_t))
        cond = cond if isinstance(cond, Tensor) else Tensor(np.asarray(cond))
        if z_t.shape != cond.shape:
            raise DimensionError(f"latent {z_t.shape} and conditioning {cond.shape} differ")
        single = z_t.ndim == 2
        if single:
            z_t, cond = z_t.reshape((1,) + z_t.shape), cond.reshape((1,) + cond.shape)
        if z_t.shape[1] != self.config.n_lat:
            raise DimensionError(f"expected {self.config.n_lat} latent channels, got {z_t.shape[1]}")
        steps = np.broadcast_to(np.asarray(t), (z_t.shape[0],))
        emb = Tensor(sinusoid(steps, self.config.emb_dim))
        x = relu(self.inp(z_t))
        skips = None
        for block in self.blocks:
            x, s = block(x, emb, cond)
            skips = s if skips is None else skips + s
        out = self.head2(relu(self.head1(skips * (1 / np.sqrt(len(self.blocks))))))
        return out.reshape(out.shape[1:]) if single else out


def denoiser_forward(model: Denoiser, z_t, t: int, cond, T: int | None = None) -> np.ndarray:
    if T is not None and not 1 <= t <= T:
        raise ConfigError(f"step {t} outside 1..{T}")
    with no_grad():
        return model(z_t, t, cond).data


def diffusion_loss(model: Denoiser, sched: NoiseSchedule, z0: np.ndarray, cond, t: np.ndarray, eps: np.ndarray) -> Tensor:
    """Mean squared error between the injected noise and its prediction."""
    z_t = q_sample(sched, z0, t, eps).astype(np.float32)
    diff = Tensor(eps.astype(np.float32)) - model(z_t, t, cond)
    return mean(diff * diff)


def train_step(
    model: Denoiser,
    store: ParamStore,
    sched: NoiseSchedule,
    z0: np.ndarray,
    cond,
    lr: float,
    rng: np.random.Generator,
) -> float:
    """One Adam step on a ``[B, n_lat, L]`` batch with fixed conditioning."""
    z0 = np.asarray(z0, dtype=np.float32)
    if z0.ndim == 2:
        z0, cond = z0[None], np.asarray(cond)[None]
    if len(z0) == 0:
        raise ValueError("empty batch")
    t = rng.integers(1, sched.T + 1, size=len(z0))
    eps = rng.standard_normal(z0.shape)
    store.zero_grad()
    loss = diffusion_loss(model, sched, z0, cond, t, eps)
    _check(loss)
    loss.backward()
    adam_step(store, store.grads(), lr)
    return float(loss.data)


@dataclass
class TrainItem:
    z0: np.ndarray  # standardized latent [n_lat, L]
    tokens: TokenSequence
    durations: Sequence[int]


def joint_loss(
    model: Denoiser,
    tts: TtsEncoder,
    sched: NoiseSchedule,
    items: Sequence[TrainItem],
    rng: np.random.Generator,
    duration_weight: float = 0.1,
) -> tuple[Tensor, Tensor, Tensor]:
    """Noise-prediction loss with teacher-forced conditioning plus weighted duration loss.

    Returns ``(total, diffusion, duration)``.
    """
    conds, dur = [], None
    for item in items:
        if sum(item.durations) != item.z0.shape[-1]:
            raise DimensionError(f"durations sum to {sum(item.durations)} but the latent has {item.z0.shape[-1]} frames")
        cond, pred = tts(item.tokens, item.durations)
        conds.append(cond)
        d = duration_loss(pred, item.durations)
        dur = d if dur is None else dur + d
    dur = dur * (1.0 / len(items))
    t = rng.integers(1, sched.T + 1, size=len(items))
    eps = [rng.standard_normal(item.z0.shape) for item in items]
    lengths = {item.z0.shape[-1] for item in items}
    if len(lengths) == 1:
        z0 = np.stack([item.z0 for item in items])
        stacked = concat([c.reshape((1,) + c.shape) for c in conds], axis=0)
        diff = diffusion_loss(model, sched, z0, stacked, t, np.stack(eps))
    else:
        diff = None
        for item, c, ti, e in zip(items, conds, t, eps):
            part = diffusion_loss(model, sched, item.z0, c, np.array(ti), e)
            diff = part if diff is None else diff + part
        diff = diff * (1.0 / len(items))
    return diff + dur * duration_weight, diff, dur


def joint_train_step(
    model: Denoiser,
    tts: TtsEncoder,
    store: ParamStore,
    sched: NoiseSchedule,
    items: Sequence[TrainItem],
    lr: float,
    rng: np.random.Generator,
    duration_weight: float = 0.1,
    lr_scale: Mapping[str, float] | None = None,
) -> tuple[float, float]:
    """One Adam step over denoiser and TTS encoder; returns (diffusion loss, duration loss)."""
    if not items:
        raise ValueError("empty batch")
    store.zero_grad()
    total, diff, dur = joint_loss(model, tts, sched, items, rng, duration_weight)
    _check(total)
    total.backward()
    adam_step(store, store.grads(), lr, lr_scale=lr_scale)
    return float(diff.data), float(dur.data)


def _check(loss: Tensor) -> None:
    if not np.isfinite(loss.data).all():
        raise NumericError(f"loss is {loss.data}")


def posterior_mean(sched: NoiseSchedule, z_t, t: int, eps_hat) -> np.ndarray:
    i = sched.check_step(t)
    coef = sched.beta[i] / np.sqrt(1.0 - sched.alpha_hat[i])
    return (np.asarray(z_t, dtype=np.float64) - coef * np.asarray(eps_hat)) / np.sqrt(sched.alpha[i])


def posterior_sigma(sched: NoiseSchedule, t: int, mode: str = "beta") -> float:
    i = sched.check_step(t)
    if mode == "beta":
        return float(np.sqrt(sched.beta[i]))
    if mode == "beta_hat":
        return float(np.sqrt(sched.beta_hat[i]))
    raise ConfigError(f"sigma mode must be one of {SIGMA_MODES}, got {mode!r}")


def posterior_step(model: Denoiser, sched: NoiseSchedule, z_t, t: int, cond, noise=None, sigma: str = "beta") -> np.ndarray:
    """``z_{t-1}`` from ``z_t``: the predicted mean plus ``sigma * noise``; no noise at ``t = 1``.

    The denoiser is evaluated at the current state ``z_t``.
    """
    z_t = np.asarray(z_t)
    eps_hat = denoiser_forward(model, z_t.astype(np.float32), t, cond, sched.T)
    mu = posterior_mean(sched, z_t, t, eps_hat)
    if t == 1 or noise is None:
        return mu
    noise = np.asarray(noise)
    if noise.shape != z_t.shape:
        raise DimensionError(f"noise shape {noise.shape} differs from {z_t.shape}")
    return mu + posterior_sigma(sched, t, sigma) * noise


def sample(model: Denoiser, sched: NoiseSchedule, cond, seed: int, sigma: str = "beta") -> np.ndarray:
    """Ancestral sampling from ``Z_T ~ N(0, I)`` down to ``Z_0``."""
    cond = np.asarray(cond, dtype=np.float32)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(cond.shape)
    for t in range(sched.T, 0, -1):
        noise = rng.standard_normal(cond.shape) if t > 1 else None
        z = posterior_step(model, sched, z, t, cond, noise, sigma)
    return z.astype(np.float32)
