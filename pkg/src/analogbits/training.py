"""Denoiser training: losses, optimizer, weight averaging, and the loop.

One training step draws a fresh batch, encodes it to soft bits, corrupts
each row at its own uniformly drawn time, and regresses the denoiser
output back onto the clean code. With probability ``self_cond_prob`` the
conditioning channel is filled with the network's own first-pass estimate
(computed with a zero condition and excluded from the gradient) instead
of zeros, so the network learns to run both with and without a hint.

Each loss returns its value together with the exact gradient w.r.t. the
raw network output, so the whole parameter gradient is assembled by one
backward pass through the network.
"""

import time
from dataclasses import dataclass, field

import numpy as np

from . import seeding
from .codec import CodecSpec, encode
from .errors import ConfigError
from .mlp import MlpDenoiser, sigmoid
from .schedule import Schedule, forward_diffuse

LOSS_L2 = "l2"
LOSS_SIGMOID_CE = "sigmoid_ce"
LOSS_SOFTMAX_CE = "softmax_ce"
LOSSES = (LOSS_L2, LOSS_SIGMOID_CE, LOSS_SOFTMAX_CE)


@dataclass(frozen=True)
class TrainConfig:
    total_steps: int
    batch_size: int = 128
    loss: str = LOSS_L2
    self_cond: bool = True
    self_cond_prob: float = 0.5
    learning_rate: float = 1e-3
    ema_decay: float = 0.9999
    rng_seed: int = 0

    def __post_init__(self):
        if self.loss not in LOSSES:
            raise ConfigError(f"unknown loss {self.loss!r}; known: {LOSSES}")
        if self.total_steps < 0 or self.batch_size <= 0:
            raise ConfigError("total_steps must be >= 0 and batch_size positive")
        if not 0.0 <= self.self_cond_prob <= 1.0:
            raise ConfigError("self_cond_prob must lie in [0, 1]")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ConfigError("ema_decay must lie in [0, 1)")
        if self.learning_rate <= 0.0:
            raise ConfigError("learning_rate must be positive")


def softplus(x: np.ndarray) -> np.ndarray:
    # max(x, 0) + log1p(exp(-|x|)) never overflows.
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def loss_l2(pred: np.ndarray, target: np.ndarray):
    """Mean squared error over every entry; returns (value, d value/d pred)."""
    diff = pred - target
    return float(np.mean(diff ** 2)), 2.0 * diff / diff.size


def loss_sigmoid_ce(logits: np.ndarray, target: np.ndarray):
    """Per-bit binary cross entropy against the sign of the target.

    Targets are soft bits in {-scale, +scale}; only their sign matters.
    Mean of softplus(-sign * logit) over all entries.
    """
    sign = np.sign(target)
    if not np.all(np.abs(sign) == 1.0):
        raise ValueError("sigmoid cross entropy needs strictly nonzero targets")
    value = float(np.mean(softplus(-sign * logits)))
    hot = (sign + 1.0) / 2.0
    grad = (sigmoid(logits) - hot) / logits.size
    return value, grad


def loss_softmax_ce(logits: np.ndarray, target_hot: np.ndarray, positions: int):
    """Per-position cross entropy for one-hot codes.

    ``logits`` has one entry per vocabulary item per position;
    ``target_hot`` is the same shape with a single 1 per position. Mean
    over batch * positions.
    """
    batch = len(logits)
    lg = logits.reshape(batch, positions, -1)
    hot = target_hot.reshape(batch, positions, -1)
    if not np.allclose(hot.sum(axis=-1), 1.0):
        raise ValueError("softmax cross entropy needs one-hot targets")
    z = lg - lg.max(axis=-1, keepdims=True)
    log_norm = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    log_probs = z - log_norm
    value = float(-np.mean((hot * log_probs).sum(axis=-1)))
    probs = np.exp(log_probs)
    grad = ((probs - hot) / (batch * positions)).reshape(logits.shape)
    return value, grad


@dataclass
class AdamState:
    """First/second moment accumulators, keyed like the parameter dict."""

    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray]) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in params.items()},
            v={k: np.zeros_like(p) for k, p in params.items()},
        )


def adam_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
              state: AdamState, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    c1 = 1.0 - beta1 ** state.step
    c2 = 1.0 - beta2 ** state.step
    for key, p in params.items():
        g = grads[key]
        state.m[key] = beta1 * state.m[key] + (1.0 - beta1) * g
        state.v[key] = beta2 * state.v[key] + (1.0 - beta2) * g * g
        p -= lr * (state.m[key] / c1) / (np.sqrt(state.v[key] / c2) + eps)


@dataclass
class EmaState:
    """Exponential moving average of the parameters ("shadow" copy)."""

    shadow: dict[str, np.ndarray]
    decay: float

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], decay: float) -> "EmaState":
        return cls(shadow={k: p.copy() for k, p in params.items()}, decay=decay)

    def update(self, params: dict[str, np.ndarray]) -> None:
        d = self.decay
        for key, p in params.items():
            self.shadow[key] = d * self.shadow[key] + (1.0 - d) * p


@dataclass
class StepInfo:
    t: np.ndarray
    noise: np.ndarray
    condition: np.ndarray
    self_conditioned: bool


def training_loss(values: np.ndarray, codec_spec: CodecSpec, denoiser: MlpDenoiser,
                  sched: Schedule, cfg: TrainConfig, rng: np.random.Generator):
    """Loss and parameter gradients for one batch of integer symbols.

    Returns (loss, grads, StepInfo). The first-pass estimate used for
    self-conditioning is treated as a constant: no gradient flows
    through it, which is why it is produced by a plain forward call with
    no cache.
    """
    x_bits = encode(values, codec_spec)
    batch = x_bits.shape[0]
    t = rng.uniform(0.0, 1.0, batch)
    noise = rng.standard_normal(x_bits.shape)
    x_crpt = forward_diffuse(x_bits, t, noise, sched)

    condition = np.zeros_like(x_bits)
    took_branch = False
    if cfg.self_cond and rng.uniform() < cfg.self_cond_prob:
        first_pass = denoiser.forward(x_crpt, condition, t)
        condition = denoiser.apply_output_map(first_pass)
        took_branch = True

    raw, cache = denoiser.forward(x_crpt, condition, t, want_cache=True)
    if cfg.loss == LOSS_L2:
        value, d_raw = loss_l2(raw, x_bits)
    elif cfg.loss == LOSS_SIGMOID_CE:
        value, d_raw = loss_sigmoid_ce(raw, x_bits)
    else:
        hot = (x_bits / codec_spec.scale + 1.0) / 2.0
        value, d_raw = loss_softmax_ce(raw, hot, denoiser.cfg.positions)
    grads = denoiser.backward(cache, d_raw)
    return value, grads, StepInfo(t, noise, condition, took_branch)


@dataclass
class TrainResult:
    losses: np.ndarray
    ema: EmaState
    records: list[dict] = field(default_factory=list)


def train(denoiser: MlpDenoiser, codec_spec: CodecSpec, sched: Schedule,
          cfg: TrainConfig, draw_batch, record_every: int = 100,
          with_timing: bool = False) -> TrainResult:
    """Run the full loop, updating ``denoiser.params`` in place.

    ``draw_batch(rng, n)`` supplies integer symbol batches. Metric
    records carry step, loss, and learning rate; wall-clock timing is
    off by default so that identical runs produce identical records.
    """
    rng = seeding.stream(cfg.rng_seed, "train")
    adam = AdamState.for_params(denoiser.params)
    ema = EmaState.for_params(denoiser.params, cfg.ema_decay)
    losses = np.empty(cfg.total_steps)
    records: list[dict] = []
    started = time.monotonic()
    for step in range(cfg.total_steps):
        values = draw_batch(rng, cfg.batch_size)
        value, grads, _ = training_loss(values, codec_spec, denoiser, sched, cfg, rng)
        adam_step(denoiser.params, grads, adam, cfg.learning_rate)
        ema.update(denoiser.params)
        losses[step] = value
        if (step + 1) % record_every == 0 or step + 1 == cfg.total_steps:
            rec = {"step": step + 1, "loss": value, "lr": cfg.learning_rate}
            if with_timing:
                rec["elapsed_s"] = time.monotonic() - started
            records.append(rec)
    return TrainResult(losses, ema, records)
