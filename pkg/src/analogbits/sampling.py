"""Reverse-time generation from a trained or exact denoiser.

The chain starts at pure Gaussian noise and walks the noise level down
over ``steps`` iterations. At iteration ``step``:

    t_now  = 1 - step / steps
    t_next = max(1 - (step + 1 + td) / steps, 0)

``td`` widens every jump beyond the symmetric grid, so the denoiser is
evaluated at a slightly higher time than the state actually carries;
small positive values trade a little bias for fresher predictions.

Self-conditioning strategies fill the denoiser's conditioning channel:

    none          always zeros
    default       previous iteration's prediction (zeros at the start)
    momentum      running average of predictions, weight ``momentum`` on
                  the past; momentum 0 reproduces ``default`` exactly
    self_guidance two denoiser calls per iteration; the final estimate is
                  guide_weight * conditioned + (1 - guide_weight) * plain

Randomness order is fixed: the starting state is drawn first, then (for
the stochastic rule only) one noise tensor per iteration, so a given
seed yields the same trajectory regardless of tracing or decoding.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .codec import CodecSpec, decode, encode
from .errors import ConfigError
from .schedule import Schedule, forward_diffuse, gamma

RULE_DDIM = "ddim"
RULE_DDPM = "ddpm"
RULES = (RULE_DDIM, RULE_DDPM)

STRATEGY_NONE = "none"
STRATEGY_DEFAULT = "default"
STRATEGY_MOMENTUM = "momentum"
STRATEGY_SELF_GUIDANCE = "self_guidance"
STRATEGIES = (STRATEGY_NONE, STRATEGY_DEFAULT, STRATEGY_MOMENTUM, STRATEGY_SELF_GUIDANCE)

# Variance floor keeps the stochastic rule's gamma ratio finite at t = 1.
GAMMA_FLOOR = 1e-12


@dataclass(frozen=True)
class SamplerConfig:
    steps: int
    rule: str = RULE_DDIM
    td: float = 0.0
    strategy: str = STRATEGY_DEFAULT
    momentum: float = 0.9
    guide_weight: float = 3.0
    scale: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(f"unknown step rule {self.rule!r}; known: {RULES}")
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"unknown strategy {self.strategy!r}; known: {STRATEGIES}")
        if self.steps < 1:
            raise ConfigError("steps must be at least 1")
        if self.td < 0.0:
            raise ConfigError("td must be nonnegative")
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError("momentum must lie in [0, 1]")
        if self.scale <= 0.0:
            raise ConfigError("scale must be positive")


def ddim_step(x_t, x_pred, t_now: float, t_next: float, sched: Schedule,
              scale: float = 1.0) -> np.ndarray:
    """Deterministic transition: re-noise the clipped prediction to t_next
    with the noise implied by the current state."""
    g_now = gamma(t_now, sched)
    g_next = gamma(t_next, sched)
    x_pred = np.clip(x_pred, -scale, scale)
    if g_now >= 1.0:
        # Noise-free state: nothing to infer, keep the prediction.
        return x_pred
    eps = (x_t - np.sqrt(g_now) * x_pred) / np.sqrt(1.0 - g_now)
    return np.sqrt(g_next) * x_pred + np.sqrt(1.0 - g_next) * eps


def ddpm_step(x_t, x_pred, t_now: float, t_next: float, sched: Schedule,
              noise, scale: float = 1.0) -> np.ndarray:
    """Stochastic transition: posterior mean plus matched fresh noise."""
    g_now = gamma(t_now, sched)
    g_next = max(gamma(t_next, sched), GAMMA_FLOOR)
    x_pred = np.clip(x_pred, -scale, scale)
    if g_now >= 1.0:
        return np.asarray(x_t, dtype=np.float64)
    alpha = g_now / g_next
    sigma = np.sqrt(max(1.0 - alpha, 0.0))
    eps = (x_t - np.sqrt(g_now) * x_pred) / np.sqrt(1.0 - g_now)
    mean = (x_t - (1.0 - alpha) / np.sqrt(1.0 - g_now) * eps) / np.sqrt(alpha)
    return mean + sigma * noise


@dataclass
class GenerateResult:
    values: np.ndarray                 # decoded integer symbols, [batch, positions]
    analog: np.ndarray                 # final clean-state prediction, pre-decode
    trace: list[tuple[float, np.ndarray]] | None = None


def _condition_and_predict(denoiser, x_t, x_pred, x_accu, t_now, cfg):
    """One denoiser evaluation under the configured strategy.

    Returns (prediction, updated accumulator).
    """
    zeros = np.zeros_like(x_t)
    if cfg.strategy == STRATEGY_NONE:
        return denoiser.predict(x_t, zeros, t_now), x_accu
    if cfg.strategy == STRATEGY_DEFAULT:
        return denoiser.predict(x_t, x_pred, t_now), x_accu
    if cfg.strategy == STRATEGY_MOMENTUM:
        x_accu = cfg.momentum * x_accu + (1.0 - cfg.momentum) * x_pred
        return denoiser.predict(x_t, x_accu, t_now), x_accu
    plain = denoiser.predict(x_t, zeros, t_now)
    conditioned = denoiser.predict(x_t, plain, t_now)
    w = cfg.guide_weight
    return w * conditioned + (1.0 - w) * plain, x_accu


def generate(denoiser, codec_spec: CodecSpec, sched: Schedule, cfg: SamplerConfig,
             batch: int, positions: int = 1, rng: np.random.Generator | None = None,
             record_trace: bool = False) -> GenerateResult:
    """Draw ``batch`` joint samples of ``positions`` symbols each.

    The decoded output comes from the final prediction clipped into the
    valid soft-bit box; ``analog`` keeps the unclipped values so callers
    can inspect how far outside the box the denoiser landed.
    """
    if batch < 0:
        raise ValueError("batch must be nonnegative")
    if rng is None:
        rng = seeding.stream(cfg.rng_seed, "sample")
    n = positions * codec_spec.n_bits
    x_t = rng.standard_normal((batch, n))
    x_pred = np.zeros_like(x_t)
    x_accu = np.zeros_like(x_t)
    trace: list[tuple[float, np.ndarray]] = []
    for step in range(cfg.steps):
        t_now = 1.0 - step / cfg.steps
        t_next = max(1.0 - (step + 1 + cfg.td) / cfg.steps, 0.0)
        x_pred, x_accu = _condition_and_predict(
            denoiser, x_t, x_pred, x_accu, t_now, cfg)
        if cfg.rule == RULE_DDPM:
            noise = rng.standard_normal(x_t.shape)
            x_t = ddpm_step(x_t, x_pred, t_now, t_next, sched, noise, cfg.scale)
        else:
            x_t = ddim_step(x_t, x_pred, t_now, t_next, sched, cfg.scale)
        if record_trace:
            trace.append((t_now, x_pred.copy()))
    clipped = np.clip(x_pred, -cfg.scale, cfg.scale)
    values = decode(clipped, codec_spec)
    return GenerateResult(values, x_pred, trace if record_trace else None)


def generate_sharded(denoiser, codec_spec: CodecSpec, sched: Schedule,
                     cfg: SamplerConfig, batch: int, positions: int = 1,
                     shards: int = 1, workers: int = 1) -> GenerateResult:
    """Split a big request into independently seeded shards.

    Output depends on the shard count but not on the worker count: each
    shard gets its own derived stream and the results are concatenated
    in shard order. One shard falls back to plain ``generate``.
    """
    if shards < 1:
        raise ConfigError("shards must be at least 1")
    if shards == 1:
        return generate(denoiser, codec_spec, sched, cfg, batch, positions)
    sizes = [batch // shards + (1 if i < batch % shards else 0) for i in range(shards)]

    def run(i: int) -> GenerateResult:
        rng = seeding.stream(cfg.rng_seed, "sample", shard=i)
        return generate(denoiser, codec_spec, sched, cfg, sizes[i], positions, rng=rng)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, range(shards)))
    else:
        parts = [run(i) for i in range(shards)]
    return GenerateResult(
        np.concatenate([p.values for p in parts]),
        np.concatenate([p.analog for p in parts]),
    )


def asymmetric_denoise_probe(denoiser, values: np.ndarray, codec_spec: CodecSpec,
                             sched: Schedule, t_from: float, t_to: float,
                             td_values, steps: int, rng: np.random.Generator,
                             scale: float = 1.0) -> dict[float, float]:
    """Bit-error rate of a short denoising ladder for each time offset.

    Known symbols are corrupted once to ``t_from``; the same corrupted
    state is then walked down to ``t_to`` in ``steps`` deterministic
    steps for every ``td`` in ``td_values``. The offset shifts only the
    evaluation times, exactly as in the generation loop, so the denoiser
    sees times slightly ahead of the state. Returned errors share one
    noise draw, making them directly comparable across offsets.
    """
    if not 0.0 <= t_to < t_from <= 1.0:
        raise ValueError("need 0 <= t_to < t_from <= 1")
    x_bits = encode(values, codec_spec)
    flat = x_bits.reshape(len(x_bits), -1)
    noise = rng.standard_normal(flat.shape)
    start = forward_diffuse(flat, t_from, noise, sched)
    span = (t_from - t_to) / steps
    errors: dict[float, float] = {}
    for td in td_values:
        x_t = start.copy()
        x_pred = np.zeros_like(x_t)
        for step in range(steps):
            t_now = t_from - step * span
            t_next = max(t_from - (step + 1 + td) * span, t_to)
            x_pred = denoiser.predict(x_t, np.zeros_like(x_t), t_now)
            x_t = ddim_step(x_t, x_pred, t_now, t_next, sched, scale)
        errors[float(td)] = float(np.mean((x_pred > 0) != (flat > 0)))
    return errors
