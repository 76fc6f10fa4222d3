"""Toy task distributions and the measurements run against samplers.

Everything here assumes the joint state space is small enough to
enumerate, which is the whole point of the toy setup: distributional
error is measured exactly instead of through proxy statistics.
"""

from dataclasses import dataclass, replace

import numpy as np

from . import seeding
from .codec import CodecSpec, encode
from .errors import ConfigError
from .mlp import MlpDenoiser
from .oracle import OracleDenoiser
from .sampling import SamplerConfig, generate, asymmetric_denoise_probe
from .schedule import Schedule
from .training import TrainConfig, train

MAX_JOINT_STATES = 2 ** 20


@dataclass(frozen=True)
class DiscreteDistribution:
    """A fully enumerated joint distribution over fixed-length symbol tuples.

    ``probs`` has one entry per joint state; state index is little-endian
    base ``vocab_size``, so index = sum_j value_j * K**j.
    """

    vocab_size: int
    positions: int
    probs: tuple[float, ...]

    def __post_init__(self):
        if self.vocab_size < 2 or self.positions < 1:
            raise ConfigError("need vocab_size >= 2 and positions >= 1")
        n = self.vocab_size ** self.positions
        if n > MAX_JOINT_STATES:
            raise ConfigError(f"joint space too large to enumerate ({n} states)")
        p = np.asarray(self.probs, dtype=np.float64)
        if p.shape != (n,):
            raise ConfigError(f"probs must have {n} entries, got {p.shape}")
        if p.min() < 0.0 or abs(p.sum() - 1.0) > 1e-12:
            raise ConfigError("probs must be nonnegative and sum to 1")

    @classmethod
    def from_marginal(cls, marginal, positions: int = 1) -> "DiscreteDistribution":
        """Independent positions sharing one marginal distribution."""
        m = np.asarray(marginal, dtype=np.float64)
        m = m / m.sum()
        joint = m
        for _ in range(positions - 1):
            # Prepending as the slow digit keeps index = sum_j v_j * K**j.
            joint = (m[:, None] * joint[None, :]).reshape(-1)
        return cls(len(m), positions, tuple(joint))

    @classmethod
    def uniform(cls, vocab_size: int, positions: int = 1) -> "DiscreteDistribution":
        n = vocab_size ** positions
        return cls(vocab_size, positions, tuple(np.full(n, 1.0 / n)))

    @property
    def n_states(self) -> int:
        return self.vocab_size ** self.positions

    def probs_array(self) -> np.ndarray:
        return np.asarray(self.probs, dtype=np.float64)

    def states(self) -> np.ndarray:
        """All joint states, [n_states, positions], in index order."""
        idx = np.arange(self.n_states)
        k_pow = self.vocab_size ** np.arange(self.positions)
        return (idx[:, None] // k_pow[None, :]) % self.vocab_size

    def state_index(self, values) -> np.ndarray:
        v = np.asarray(values)
        if v.shape[-1] != self.positions:
            raise ValueError(f"last axis must have {self.positions} entries")
        if v.size and (v.min() < 0 or v.max() >= self.vocab_size):
            raise ValueError("values outside the vocabulary")
        k_pow = self.vocab_size ** np.arange(self.positions)
        return (v * k_pow).sum(axis=-1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        idx = rng.choice(self.n_states, size=n, p=self.probs_array())
        k_pow = self.vocab_size ** np.arange(self.positions)
        return (idx[:, None] // k_pow[None, :]) % self.vocab_size


def oracle_support(dist: DiscreteDistribution, codec_spec: CodecSpec):
    """Soft-bit codewords and probabilities of every joint state.

    Feed these to the exact posterior-mean denoiser to get the gold
    reference sampler for the distribution.
    """
    if codec_spec.vocab_size != dist.vocab_size:
        raise ConfigError("codec and distribution disagree on vocabulary size")
    codewords = encode(dist.states(), codec_spec)
    return codewords, dist.probs_array()


def exact_denoiser(dist: DiscreteDistribution, codec_spec: CodecSpec,
                   sched: Schedule) -> OracleDenoiser:
    codewords, probs = oracle_support(dist, codec_spec)
    return OracleDenoiser(codewords, probs, sched)


def total_variation(samples, dist: DiscreteDistribution) -> float:
    """Exact total variation distance between the empirical distribution
    of ``samples`` ([n, positions] integer array) and ``dist``."""
    s = np.asarray(samples)
    if s.ndim == 1:
        s = s[:, None]
    if len(s) == 0:
        raise ValueError("cannot measure an empty sample set")
    counts = np.bincount(dist.state_index(s), minlength=dist.n_states)
    empirical = counts / len(s)
    return 0.5 * float(np.abs(empirical - dist.probs_array()).sum())


@dataclass
class HistogramReport:
    counts: np.ndarray
    edges: np.ndarray
    concentration: float        # fraction of entries with |v| > threshold * scale


def bit_histogram(analog, bins: int = 50, scale: float = 1.0,
                  threshold: float = 0.5) -> HistogramReport:
    """Distribution of raw soft-bit values across a sample batch.

    A well-trained chain ends nearly saturated: most mass near the two
    code levels, so ``concentration`` should approach 1.
    """
    flat = np.asarray(analog, dtype=np.float64).ravel()
    counts, edges = np.histogram(flat, bins=bins)
    concentration = float(np.mean(np.abs(flat) > threshold * scale))
    return HistogramReport(counts, edges, concentration)


@dataclass
class RunReport:
    tv: float
    concentration: float
    losses: np.ndarray
    denoiser: MlpDenoiser          # carries the averaged weights used to sample
    records: list


def train_and_evaluate(dist: DiscreteDistribution, codec_spec: CodecSpec,
                       sched: Schedule, denoiser: MlpDenoiser, train_cfg: TrainConfig,
                       sampler_cfg: SamplerConfig, n_samples: int,
                       use_ema: bool = True) -> RunReport:
    """Train on draws from ``dist``, then sample and score in one go."""
    result = train(denoiser, codec_spec, sched, train_cfg,
                   lambda rng, n: dist.sample(rng, n))
    sampler = denoiser.with_params(result.ema.shadow) if use_ema else denoiser
    out = generate(sampler, codec_spec, sched, sampler_cfg, n_samples,
                   positions=dist.positions)
    report = bit_histogram(out.analog, scale=codec_spec.scale)
    return RunReport(total_variation(out.values, dist), report.concentration,
                     result.losses, sampler, result.records)


@dataclass
class AblationRow:
    self_cond: bool
    tv: float
    final_loss: float


def self_cond_ablation(dist: DiscreteDistribution, codec_spec: CodecSpec,
                       sched: Schedule, make_denoiser, train_cfg: TrainConfig,
                       sampler_cfg: SamplerConfig, n_samples: int) -> list[AblationRow]:
    """Identical runs with the conditioning branch on and off.

    ``make_denoiser()`` must build a fresh, identically initialized
    network each call so the comparison starts from the same weights.
    Sampling for the "off" run uses the zero-condition strategy.
    """
    rows = []
    for flag in (True, False):
        t_cfg = replace(train_cfg, self_cond=flag)
        s_cfg = sampler_cfg if flag else replace(sampler_cfg, strategy="none")
        report = train_and_evaluate(dist, codec_spec, sched, make_denoiser(),
                                    t_cfg, s_cfg, n_samples)
        rows.append(AblationRow(flag, report.tv, float(report.losses[-1])))
    return rows


@dataclass
class TdSweepCell:
    steps: int
    td: float
    value: float


def td_sweep(denoiser, dist: DiscreteDistribution, codec_spec: CodecSpec,
             sched: Schedule, base_cfg: SamplerConfig, td_values, steps_values,
             n_samples: int, metric: str = "tv", probe_t_from: float = 0.8,
             probe_t_to: float = 0.0, probe_seed: int = 0) -> list[TdSweepCell]:
    """Grid evaluation of the time offset against the step budget.

    ``metric="tv"`` generates fresh samples per cell and scores total
    variation; ``metric="bit_error"`` corrupts known symbols and scores
    the short-ladder denoising error instead. td = 0 cells are plain
    symmetric runs, so the sweep doubles as a regression anchor.
    """
    cells: list[TdSweepCell] = []
    if metric == "tv":
        for steps in steps_values:
            for td in td_values:
                cfg = replace(base_cfg, steps=int(steps), td=float(td))
                out = generate(denoiser, codec_spec, sched, cfg, n_samples,
                               positions=dist.positions)
                cells.append(TdSweepCell(int(steps), float(td),
                                         total_variation(out.values, dist)))
    elif metric == "bit_error":
        for steps in steps_values:
            rng = seeding.stream(probe_seed, "eval")
            values = dist.sample(rng, n_samples)
            errors = asymmetric_denoise_probe(
                denoiser, values, codec_spec, sched, probe_t_from, probe_t_to,
                td_values, int(steps), rng, scale=codec_spec.scale)
            cells.extend(TdSweepCell(int(steps), td, err)
                         for td, err in errors.items())
    else:
        raise ConfigError(f"unknown sweep metric {metric!r}")
    return cells


def format_td_table(cells: list[TdSweepCell]) -> str:
    """Render sweep cells as a text grid, steps down the side, td across."""
    steps_values = sorted({c.steps for c in cells})
    td_values = sorted({c.td for c in cells})
    lookup = {(c.steps, c.td): c.value for c in cells}
    header = "steps\\td " + " ".join(f"{td:>8g}" for td in td_values)
    lines = [header]
    for s in steps_values:
        row = [f"{s:>8d}"] + [f"{lookup[(s, td)]:8.4f}" for td in td_values]
        lines.append(" ".join(row))
    return "\n".join(lines)
