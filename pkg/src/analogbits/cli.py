"""Command-line front end.

Subcommands:

    train            fit the denoiser on the configured task
    sample           generate symbols from a checkpoint or the exact denoiser
    eval             score a sample dump against the configured task
    codec-check      exhaustive codec self-tests plus correlation report
    probe-td         grid of sample quality over time offset and step count
    ablate-selfcond  paired training runs with conditioning on and off

Every subcommand takes a config file plus repeatable ``--set key=value``
overrides. Outputs are deterministic for a fixed config and seed: no
timestamps, no machine info, stable key order, so identical invocations
produce byte-identical files. Exit codes: 0 success, 2 configuration
error, 3 violated invariant or corrupt data, 4 I/O failure.
"""

import argparse
import json
import os
import sys

import numpy as np

from . import checkpoint as ckpt
from . import seeding
from .codec import (BIT_KINDS, GRAY, ONEHOT, CodecSpec, decode, encode,
                    hamming_correlation, uint8_rand_spec)
from .config import Run, load_run, worker_threads
from .errors import ConfigError, InvariantViolation
from .evaluation import (bit_histogram, exact_denoiser, format_td_table,
                         self_cond_ablation, td_sweep, total_variation)
from .mlp import MlpDenoiser
from .sampling import generate_sharded
from .training import train


def _write_jsonl(path, records) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def _ensure_output_dir(run: Run) -> None:
    os.makedirs(run.io.output_dir, exist_ok=True)


def _load_denoiser(run: Run, path, use_live: bool):
    bundle = ckpt.load(path)
    if bundle.codec_hash != ckpt.codec_fingerprint(run.codec):
        raise InvariantViolation(
            "checkpoint was written for a different codec than the config names")
    if bundle.cfg != run.mlp_cfg:
        raise InvariantViolation(
            "checkpoint network shape does not match the configured model")
    params = bundle.params if use_live or bundle.ema_params is None else bundle.ema_params
    return MlpDenoiser(bundle.cfg, params)


def cmd_train(args) -> int:
    run = load_run(args.config, args.set)
    _ensure_output_dir(run)
    denoiser = MlpDenoiser.initialize(run.mlp_cfg, seeding.stream(run.seed, "init"))
    result = train(denoiser, run.codec, run.sched, run.train_cfg,
                   lambda rng, n: run.dist.sample(rng, n),
                   with_timing=args.timing)
    ckpt.save(run.io.checkpoint, run.mlp_cfg, denoiser.params,
              ckpt.codec_fingerprint(run.codec), ema_params=result.ema.shadow)
    _write_jsonl(run.io.metrics, result.records)
    final = f", final loss {result.losses[-1]:.6f}" if run.train_cfg.total_steps else ""
    print(f"trained {run.train_cfg.total_steps} steps{final}")
    print(f"checkpoint -> {run.io.checkpoint}")
    print(f"metrics -> {run.io.metrics}")
    return 0


def _sample_header(run: Run, count: int, source: str) -> dict:
    return {
        "kind": "samples",
        "source": source,
        "codec": run.codec.kind,
        "vocab_size": run.codec.vocab_size,
        "positions": run.dist.positions,
        "count": count,
        "seed": run.seed,
        "rule": run.sampler_cfg.rule,
        "steps": run.sampler_cfg.steps,
        "td": run.sampler_cfg.td,
        "strategy": run.sampler_cfg.strategy,
    }


def cmd_sample(args) -> int:
    run = load_run(args.config, args.set)
    _ensure_output_dir(run)
    if args.oracle:
        denoiser = exact_denoiser(run.dist, run.codec, run.sched)
        source = "oracle"
    else:
        denoiser = _load_denoiser(run, args.checkpoint or run.io.checkpoint, args.live)
        source = "checkpoint"
    count = args.count if args.count is not None else run.settings["sample.count"]
    shards = run.settings["sample.shards"]
    result = generate_sharded(denoiser, run.codec, run.sched, run.sampler_cfg,
                              count, positions=run.dist.positions,
                              shards=shards, workers=worker_threads())
    records = [_sample_header(run, count, source)]
    for i in range(count):
        rec = {"v": result.values[i].tolist()}
        if args.with_analog:
            rec["analog"] = result.analog[i].tolist()
        records.append(rec)
    out_path = args.out or run.io.samples
    _write_jsonl(out_path, records)
    print(f"wrote {count} samples -> {out_path}")
    return 0


def _read_samples(path):
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise InvariantViolation("sample dump is empty (missing header line)")
    try:
        header = json.loads(lines[0])
        rows = [json.loads(line) for line in lines[1:] if line]
    except json.JSONDecodeError as exc:
        raise InvariantViolation(f"sample dump is not valid JSONL: {exc}") from exc
    if header.get("kind") != "samples":
        raise InvariantViolation("sample dump header is missing or malformed")
    return header, rows


def cmd_eval(args) -> int:
    run = load_run(args.config, args.set)
    _ensure_output_dir(run)
    header, rows = _read_samples(args.samples or run.io.samples)
    if (header["vocab_size"] != run.codec.vocab_size
            or header["positions"] != run.dist.positions):
        raise InvariantViolation(
            "sample dump was generated for a different task shape than the config")
    if len(rows) != header["count"]:
        raise InvariantViolation(
            f"sample dump promises {header['count']} rows, found {len(rows)}")
    values = np.array([r["v"] for r in rows])
    tv = total_variation(values, run.dist)
    report = {"tv": tv, "n": len(rows)}
    analogs = [r["analog"] for r in rows if "analog" in r]
    if analogs:
        hist = bit_histogram(np.array(analogs), bins=run.eval_opts.bins,
                             scale=run.codec.scale,
                             threshold=run.eval_opts.concentration_threshold)
        report["concentration"] = hist.concentration
        report["histogram_counts"] = hist.counts.tolist()
        report["histogram_edges"] = hist.edges.tolist()
    out_path = os.path.join(run.io.output_dir, "eval.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, sort_keys=True) + "\n")
    print(f"tv {tv:.6f} over {len(rows)} samples")
    if "concentration" in report:
        print(f"concentration {report['concentration']:.4f}")
    print(f"report -> {out_path}")
    return 0


def _builtin_codec_specs() -> list[CodecSpec]:
    return [
        CodecSpec("base2", 256),
        CodecSpec("gray", 256),
        uint8_rand_spec(),
        CodecSpec("onehot", 16),
    ]


def _check_one_codec(spec: CodecSpec) -> list[str]:
    lines = []
    symbols = np.arange(spec.vocab_size)[:, None]
    decoded = decode(encode(symbols, spec), spec)
    if not np.array_equal(decoded, symbols):
        bad = int(symbols[(decoded != symbols).ravel()][0, 0])
        raise InvariantViolation(
            f"round-trip failed for {spec.kind} K={spec.vocab_size} at symbol {bad}")
    lines.append(f"ok {spec.kind} K={spec.vocab_size} round-trip")
    if spec.kind == GRAY and spec.vocab_size & (spec.vocab_size - 1) == 0:
        codes = encode(symbols, spec) > 0
        flips = np.abs(codes.astype(int) - np.roll(codes.astype(int), -1, axis=0)).sum(axis=1)
        if not np.all(flips == 1):
            raise InvariantViolation(
                f"adjacent symbols must differ in exactly one bit for {spec.kind}")
        lines.append(f"ok {spec.kind} K={spec.vocab_size} unit-step adjacency")
    if spec.kind in BIT_KINDS and spec.vocab_size <= 4096:
        r = hamming_correlation(spec)
        lines.append(f"corr {spec.kind} K={spec.vocab_size} value-vs-code-distance r={r:+.4f}")
    return lines


def cmd_codec_check(args) -> int:
    run = load_run(args.config, args.set)
    specs = [run.codec] + [s for s in _builtin_codec_specs() if s != run.codec]
    for spec in specs:
        for line in _check_one_codec(spec):
            print(line)
    return 0


def cmd_probe_td(args) -> int:
    run = load_run(args.config, args.set)
    _ensure_output_dir(run)
    if args.oracle:
        denoiser = exact_denoiser(run.dist, run.codec, run.sched)
    else:
        denoiser = _load_denoiser(run, args.checkpoint or run.io.checkpoint, args.live)
    cells = td_sweep(denoiser, run.dist, run.codec, run.sched, run.sampler_cfg,
                     run.eval_opts.td_values, run.eval_opts.steps_values,
                     run.eval_opts.samples, metric=run.eval_opts.metric,
                     probe_t_from=run.eval_opts.probe_t_from,
                     probe_t_to=run.eval_opts.probe_t_to,
                     probe_seed=run.seed)
    out_path = os.path.join(run.io.output_dir, "td_sweep.jsonl")
    _write_jsonl(out_path, [{"steps": c.steps, "td": c.td, "metric": run.eval_opts.metric,
                             "value": c.value} for c in cells])
    print(f"metric: {run.eval_opts.metric}")
    print(format_td_table(cells))
    print(f"table -> {out_path}")
    return 0


def cmd_ablate_selfcond(args) -> int:
    run = load_run(args.config, args.set)
    _ensure_output_dir(run)
    rows = self_cond_ablation(
        run.dist, run.codec, run.sched,
        lambda: MlpDenoiser.initialize(run.mlp_cfg, seeding.stream(run.seed, "init")),
        run.train_cfg, run.sampler_cfg, run.eval_opts.samples)
    out_path = os.path.join(run.io.output_dir, "ablation.jsonl")
    _write_jsonl(out_path, [{"self_cond": r.self_cond, "tv": r.tv,
                             "final_loss": r.final_loss} for r in rows])
    for r in rows:
        state = "on " if r.self_cond else "off"
        print(f"self-conditioning {state}: tv {r.tv:.4f}, final loss {r.final_loss:.6f}")
    print(f"table -> {out_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="analogbits",
        description="Discrete generation via diffusion over soft binary codes.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, fn, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.set_defaults(func=fn)
        return p

    p = add("train", cmd_train, "fit the denoiser on the configured task")
    p.add_argument("--timing", action="store_true",
                   help="include wall-clock seconds in metrics (breaks rerun identity)")

    p = add("sample", cmd_sample, "generate symbols and write a JSONL dump")
    p.add_argument("--checkpoint", help="weights to load (default: io.checkpoint)")
    p.add_argument("--oracle", action="store_true",
                   help="use the exact posterior-mean denoiser instead of weights")
    p.add_argument("--live", action="store_true",
                   help="use raw weights instead of the averaged shadow copy")
    p.add_argument("--count", type=int, help="number of samples (default: sample.count)")
    p.add_argument("--with-analog", action="store_true",
                   help="also record pre-decode soft-bit vectors")
    p.add_argument("--out", help="dump path (default: io.samples)")

    p = add("eval", cmd_eval, "score a sample dump against the configured task")
    p.add_argument("--samples", help="dump to score (default: io.samples)")

    add("codec-check", cmd_codec_check,
        "round-trip and structure checks for the configured and built-in codecs")

    p = add("probe-td", cmd_probe_td, "sweep time offset against step count")
    p.add_argument("--checkpoint", help="weights to load (default: io.checkpoint)")
    p.add_argument("--oracle", action="store_true",
                   help="use the exact posterior-mean denoiser instead of weights")
    p.add_argument("--live", action="store_true",
                   help="use raw weights instead of the averaged shadow copy")

    add("ablate-selfcond", cmd_ablate_selfcond,
        "train twice, with and without self-conditioning, and compare")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"invalid data: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
