"""Command-line entry point: ``subact <command> --config run.json --seed 0 --out runs/x``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import harness as H
from .data import generate_splits, write_dataset
from .errors import SubactError
from .labels import Vocabulary
from .oracle import make_oracle

log = logging.getLogger("subact")


def _setup_logging(out: Path) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="w")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("subact")
    root.setLevel(logging.INFO)
    root.addHandler(handler)
    return handler


def _load_config(args) -> H.RunConfig:
    cfg = H.RunConfig.load(Path(args.config)) if args.config else H.RunConfig()
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.out is not None:
        cfg = replace(cfg, out_dir=str(args.out))
    return cfg


def cmd_gen_data(cfg: H.RunConfig, out: Path, args) -> None:
    train_set, test_set = generate_splits(cfg.generator, cfg.seed)
    write_dataset(train_set, out / "train.jsonl", out / "labels.json")
    write_dataset(test_set, out / "test.jsonl", out / "labels.json")
    log.info("wrote %d train and %d test samples", len(train_set.samples), len(test_set.samples))


def cmd_preprocess(cfg: H.RunConfig, out: Path, args) -> None:
    splits, merged = H.merge_sub_labels(list(H.load_splits(cfg)), cfg.merge_threshold)
    merged.write_report(out / "merge_report.csv")
    oracle = make_oracle(cfg.oracle, splits[0].labels.sub_classes())
    l_max = max(cfg.model.l_max, *(d.max_segments() for d in splits))
    for name, ds in zip(("train", "test"), splits):
        write_dataset(ds, out / f"{name}.jsonl", out / "labels.json")
        prep = H.prepare(ds, cfg.train_ratio, oracle, cfg.model.frames, l_max)
        np.savez(out / f"{name}_prepared.npz", motion=prep.motion, sub_ids=prep.sub_ids, y=prep.y, ids=np.array(prep.ids))
    log.info("merged %d sub-action labels into %d groups", len(merged.group), len(merged.groups()))


def cmd_train(cfg: H.RunConfig, out: Path, args) -> None:
    train_set, test_set = H.load_splits(cfg)
    H.run_train(cfg, train_set, test_set, out)


def cmd_eval(cfg: H.RunConfig, out: Path, args) -> None:
    _, test_set = H.load_splits(cfg)
    model, manifest = H.load_checkpoint(Path(args.checkpoint), test_set)
    oracle = make_oracle(cfg.oracle, test_set.labels.sub_classes())
    ratios = [args.ratio] if args.ratio is not None else list(cfg.ratios)
    rows = [H.evaluate(model, test_set, r, oracle) for r in ratios]
    H.write_metrics(out / "metrics.csv", rows, manifest["config_hash"], model.num_parameters())


def cmd_or_protocol(cfg: H.RunConfig, out: Path, args) -> None:
    train_set, test_set = H.load_splits(cfg)
    H.run_or_protocol(cfg, train_set, test_set, out)


def cmd_ablate(cfg: H.RunConfig, out: Path, args) -> None:
    train_set, test_set = H.load_splits(cfg)
    H.run_ablation(cfg, args.which, train_set, test_set, out)


def cmd_export_attention(cfg: H.RunConfig, out: Path, args) -> None:
    _, test_set = H.load_splits(cfg)
    model, manifest = H.load_checkpoint(Path(args.checkpoint), test_set)
    oracle = make_oracle(cfg.oracle, test_set.labels.sub_classes())
    ids = args.sample_id or [test_set.samples[0].sample_id]
    for sid in ids:
        H.export_attention(model, test_set, sid, out, args.ratio or 1.0, oracle, manifest["config_hash"])


def cmd_bench(cfg: H.RunConfig, out: Path, args) -> None:
    if args.checkpoint:
        model, manifest = H.load_checkpoint(Path(args.checkpoint))
        run_hash = manifest["config_hash"]
    else:
        train_set, _ = generate_splits(replace(cfg.generator, n_train=cfg.generator.n_holistic, n_test=1), cfg.seed)
        cfg = H.resolve_config(cfg, train_set)
        model = H.build_model(cfg, Vocabulary.from_labels(train_set.labels), train_set.labels)
        run_hash = cfg.hash()
    report = H.measure_throughput(model, args.length, args.repetitions)
    H.write_csv(
        out / "metrics.csv",
        ["sequence_length", "repetitions", "median_seconds", "sequences_per_second", "parameter_count", "reference_hz", "config_hash"],
        [[*report.values(), run_hash]],
    )
    print(f"{report['sequences_per_second']:.2f} sequences/s at length {args.length}, "
          f"{report['parameter_count']} parameters (reference figure {report['reference_hz']} Hz, not compared)")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "preprocess": cmd_preprocess,
    "train": cmd_train,
    "eval": cmd_eval,
    "or-protocol": cmd_or_protocol,
    "ablate": cmd_ablate,
    "export-attention": cmd_export_attention,
    "bench": cmd_bench,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="subact")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="run config JSON; defaults apply when omitted")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", type=Path, required=True)
        if name in ("eval", "export-attention", "bench"):
            p.add_argument("--checkpoint", required=name != "bench", help="directory holding checkpoint.bin")
        if name in ("eval", "export-attention"):
            p.add_argument("--ratio", type=float)
        if name == "ablate":
            p.add_argument("--which", choices=H.ABLATIONS, required=True)
        if name == "export-attention":
            p.add_argument("--sample-id", action="append")
        if name == "bench":
            p.add_argument("--length", type=int, default=500)
            p.add_argument("--repetitions", type=int, default=10)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    handler = _setup_logging(out)
    try:
        cfg = _load_config(args)
        (out / "config.json").write_text(json.dumps(cfg.to_json(), indent=2, sort_keys=True) + "\n")
        log.info("%s config_hash=%s seed=%d", args.command, cfg.hash(), cfg.seed)
        COMMANDS[args.command](cfg, out, args)
        return 0
    except SubactError as exc:
        log.error("%s: %s", type(exc).__name__, exc)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    finally:
        logging.getLogger("subact").removeHandler(handler)
        handler.close()


if __name__ == "__main__":
    sys.exit(main())
