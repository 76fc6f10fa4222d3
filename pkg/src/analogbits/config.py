"""Run configuration: flat dotted keys, strict schema, explicit defaults.

Config files are plain text, one ``section.key = value`` per line, with
``#`` comments and blank lines ignored. Every key must be in the schema
below: unknown keys, duplicate keys, and unparseable values are hard
errors, never warnings. Command-line overrides use the same ``key=value``
syntax and win over the file, which wins over the defaults.

Two environment variables are honored (nothing else is):

    ANALOGBITS_OUTPUT_DIR   replaces io.output_dir
    ANALOGBITS_THREADS      worker threads for sharded sampling; never
                            affects results, only wall-clock time
"""

import os
from dataclasses import dataclass

import numpy as np

from .codec import (KINDS, ONEHOT, PERMUTED_BASE2, CodecSpec, encode,
                    load_permutation_table, uint8_rand_permutation)
from .errors import ConfigError
from .evaluation import DiscreteDistribution
from .mlp import (HEAD_LINEAR, HEAD_SOFTMAX, MAP_IDENTITY, MAP_SIGMOID,
                  MAP_SOFTMAX, MlpConfig)
from .sampling import SamplerConfig
from .schedule import Schedule
from .training import LOSS_L2, LOSS_SIGMOID_CE, LOSS_SOFTMAX_CE, TrainConfig

ENV_OUTPUT_DIR = "ANALOGBITS_OUTPUT_DIR"
ENV_THREADS = "ANALOGBITS_THREADS"

# key -> (type tag, default). Type tags: int, float, bool, str, ints, floats.
SCHEMA: dict[str, tuple[str, object]] = {
    "run.seed": ("int", 0),
    "codec.kind": ("str", "base2"),
    "codec.vocab_size": ("int", 2),
    "codec.scale": ("float", 1.0),
    "codec.permutation_file": ("str", ""),
    "schedule.ns": ("float", 0.0002),
    "schedule.ds": ("float", 0.00025),
    "model.hidden": ("ints", (128, 128)),
    "model.time_features": ("int", 16),
    "model.head": ("str", HEAD_LINEAR),
    "task.kind": ("str", "categorical"),
    "task.probs": ("floats", ()),
    "task.positions": ("int", 1),
    "task.path": ("str", ""),
    "train.loss": ("str", LOSS_L2),
    "train.self_cond": ("bool", True),
    "train.self_cond_prob": ("float", 0.5),
    "train.learning_rate": ("float", 1e-3),
    "train.batch_size": ("int", 128),
    "train.total_steps": ("int", 1000),
    "train.ema_decay": ("float", 0.9999),
    "sample.rule": ("str", "ddim"),
    "sample.steps": ("int", 100),
    "sample.td": ("float", 0.0),
    "sample.strategy": ("str", "default"),
    "sample.momentum": ("float", 0.9),
    "sample.guide_weight": ("float", 3.0),
    "sample.count": ("int", 1000),
    "sample.shards": ("int", 1),
    "eval.samples": ("int", 20000),
    "eval.bins": ("int", 50),
    "eval.concentration_threshold": ("float", 0.5),
    "eval.td_values": ("floats", (0.0, 1.0, 2.0, 3.0, 4.0)),
    "eval.steps_values": ("ints", (5, 10, 20)),
    "eval.metric": ("str", "tv"),
    "eval.probe_t_from": ("float", 0.8),
    "eval.probe_t_to": ("float", 0.0),
    "io.output_dir": ("str", "out"),
    "io.checkpoint": ("str", ""),
    "io.metrics": ("str", ""),
    "io.samples": ("str", ""),
}


def _parse_value(key: str, kind: str, text: str):
    text = text.strip()
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            return float(text)
        if kind == "bool":
            if text in ("true", "false"):
                return text == "true"
            raise ValueError("expected true or false")
        if kind == "ints":
            return tuple(int(p) for p in text.split(",") if p.strip()) if text else ()
        if kind == "floats":
            return tuple(float(p) for p in text.split(",") if p.strip()) if text else ()
        return text
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {text!r} ({exc})") from exc


def parse_config_text(text: str, source: str = "<config>") -> dict[str, object]:
    """Parse file contents into typed values; schema-checked, no defaults."""
    out: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, _, value = stripped.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = _parse_value(key, SCHEMA[key][0], value)
    return out


def merge_settings(file_values: dict[str, object],
                   overrides: list[str] | None = None) -> dict[str, object]:
    """defaults < file < command-line overrides."""
    merged = {key: default for key, (_, default) in SCHEMA.items()}
    merged.update(file_values)
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"override must look like key=value, got {item!r}")
        key, _, value = item.partition("=")
        key = key.strip()
        if key not in SCHEMA:
            raise ConfigError(f"unknown override key {key!r}")
        merged[key] = _parse_value(key, SCHEMA[key][0], value)
    return merged


def load_settings(path, overrides: list[str] | None = None) -> dict[str, object]:
    with open(path, "r", encoding="utf-8") as fh:
        file_values = parse_config_text(fh.read(), source=str(path))
    return merge_settings(file_values, overrides)


@dataclass
class EvalOptions:
    samples: int
    bins: int
    concentration_threshold: float
    td_values: tuple[float, ...]
    steps_values: tuple[int, ...]
    metric: str
    probe_t_from: float
    probe_t_to: float


@dataclass
class IoPaths:
    output_dir: str
    checkpoint: str
    metrics: str
    samples: str


@dataclass
class Run:
    """Everything a command needs, built and cross-validated once."""

    seed: int
    codec: CodecSpec
    sched: Schedule
    dist: DiscreteDistribution
    mlp_cfg: MlpConfig
    train_cfg: TrainConfig
    sampler_cfg: SamplerConfig
    eval_opts: EvalOptions
    io: IoPaths
    settings: dict[str, object]


def _build_codec(s: dict[str, object]) -> CodecSpec:
    kind = s["codec.kind"]
    if kind not in KINDS:
        raise ConfigError(f"unknown codec kind {kind!r}; known: {KINDS}")
    vocab = s["codec.vocab_size"]
    perm = None
    if kind == PERMUTED_BASE2:
        path = s["codec.permutation_file"]
        if path:
            perm = load_permutation_table(path)
        elif vocab == 256:
            perm = uint8_rand_permutation()
        else:
            raise ConfigError(
                "permuted codec needs codec.permutation_file unless vocab_size is 256")
        if len(perm) != vocab:
            raise ConfigError(
                f"permutation table has {len(perm)} entries, vocabulary has {vocab}")
    return CodecSpec(kind, vocab, scale=s["codec.scale"], permutation=perm)


def _build_distribution(s: dict[str, object], codec: CodecSpec) -> DiscreteDistribution:
    kind = s["task.kind"]
    positions = s["task.positions"]
    if kind == "uniform":
        return DiscreteDistribution.uniform(codec.vocab_size, positions)
    if kind == "categorical":
        probs = s["task.probs"]
        if len(probs) != codec.vocab_size:
            raise ConfigError(
                f"task.probs needs {codec.vocab_size} entries, got {len(probs)}")
        total = sum(probs)
        if total <= 0.0 or min(probs) < 0.0:
            raise ConfigError("task.probs must be nonnegative with positive sum")
        return DiscreteDistribution.from_marginal(
            [p / total for p in probs], positions)
    if kind == "dataset":
        path = s["task.path"]
        if not path:
            raise ConfigError("task.kind=dataset requires task.path")
        rows = np.loadtxt(path, dtype=np.int64, ndmin=2)
        if rows.shape[1] != positions:
            raise ConfigError(
                f"dataset rows have {rows.shape[1]} columns, task.positions is {positions}")
        if rows.min() < 0 or rows.max() >= codec.vocab_size:
            raise ConfigError("dataset contains values outside the vocabulary")
        dist = DiscreteDistribution.uniform(codec.vocab_size, positions)
        counts = np.bincount(dist.state_index(rows), minlength=dist.n_states)
        return DiscreteDistribution(codec.vocab_size, positions,
                                    tuple(counts / counts.sum()))
    raise ConfigError(f"unknown task kind {kind!r}")


def _build_model(s: dict[str, object], codec: CodecSpec,
                 positions: int) -> MlpConfig:
    loss = s["train.loss"]
    head = s["model.head"]
    if head not in (HEAD_LINEAR, HEAD_SOFTMAX):
        raise ConfigError(f"unknown model head {head!r}")
    if loss == LOSS_SOFTMAX_CE:
        if codec.kind != ONEHOT:
            raise ConfigError("softmax_ce loss requires the onehot codec")
        if head != HEAD_LINEAR:
            raise ConfigError("softmax_ce loss requires the linear head")
        output_map = MAP_SOFTMAX
    elif loss == LOSS_SIGMOID_CE:
        if head != HEAD_LINEAR:
            raise ConfigError("sigmoid_ce loss requires the linear head")
        output_map = MAP_SIGMOID
    else:
        output_map = MAP_IDENTITY
    codebook = None
    if head == HEAD_SOFTMAX:
        table = encode(np.arange(codec.vocab_size)[:, None], codec)
        codebook = tuple(tuple(row) for row in table)
    return MlpConfig(
        n_features=positions * codec.n_bits,
        hidden=s["model.hidden"],
        n_time_features=s["model.time_features"],
        head=head,
        positions=positions,
        codebook=codebook,
        output_map=output_map,
        scale=codec.scale,
    )


def build_run(settings: dict[str, object]) -> Run:
    codec = _build_codec(settings)
    sched = Schedule(ns=settings["schedule.ns"], ds=settings["schedule.ds"])
    dist = _build_distribution(settings, codec)
    seed = settings["run.seed"]
    mlp_cfg = _build_model(settings, codec, dist.positions)
    train_cfg = TrainConfig(
        total_steps=settings["train.total_steps"],
        batch_size=settings["train.batch_size"],
        loss=settings["train.loss"],
        self_cond=settings["train.self_cond"],
        self_cond_prob=settings["train.self_cond_prob"],
        learning_rate=settings["train.learning_rate"],
        ema_decay=settings["train.ema_decay"],
        rng_seed=seed,
    )
    sampler_cfg = SamplerConfig(
        steps=settings["sample.steps"],
        rule=settings["sample.rule"],
        td=settings["sample.td"],
        strategy=settings["sample.strategy"],
        momentum=settings["sample.momentum"],
        guide_weight=settings["sample.guide_weight"],
        scale=codec.scale,
        rng_seed=seed,
    )
    if settings["eval.metric"] not in ("tv", "bit_error"):
        raise ConfigError("eval.metric must be tv or bit_error")
    eval_opts = EvalOptions(
        samples=settings["eval.samples"],
        bins=settings["eval.bins"],
        concentration_threshold=settings["eval.concentration_threshold"],
        td_values=settings["eval.td_values"],
        steps_values=settings["eval.steps_values"],
        metric=settings["eval.metric"],
        probe_t_from=settings["eval.probe_t_from"],
        probe_t_to=settings["eval.probe_t_to"],
    )
    output_dir = os.environ.get(ENV_OUTPUT_DIR) or settings["io.output_dir"]
    io = IoPaths(
        output_dir=output_dir,
        checkpoint=settings["io.checkpoint"] or os.path.join(output_dir, "checkpoint.bin"),
        metrics=settings["io.metrics"] or os.path.join(output_dir, "metrics.jsonl"),
        samples=settings["io.samples"] or os.path.join(output_dir, "samples.jsonl"),
    )
    return Run(seed, codec, sched, dist, mlp_cfg, train_cfg, sampler_cfg,
               eval_opts, io, settings)


def load_run(path, overrides: list[str] | None = None) -> Run:
    return build_run(load_settings(path, overrides))


def worker_threads() -> int:
    """Sharded-sampling worker count; results never depend on it."""
    raw = os.environ.get(ENV_THREADS, "1")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigError(f"{ENV_THREADS} must be an integer, got {raw!r}") from exc
    return max(n, 1)
