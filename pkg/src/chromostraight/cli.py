"""Command-line front end.

Subcommands cover the dataset lifecycle: `fixtures` writes demo bars,
`synth` bends straight sources, `preprocess` straightens onto the
canvas, `prepare` builds masked training bundles, and `evaluate`
scores straightened outputs (CSV plus rendered figures).  Flags
override values from --config, which overrides the defaults.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys

from .fixtures import write_fixture_set
from .manifest import RunConfig, load_manifest
from .pipeline import (
    SampleError,
    evaluate_pairs,
    load_pairs,
    prepare_batch,
    preprocess_batch,
    synth_batch,
)


def _parse_patch_size(value: str) -> tuple[int, int]:
    try:
        h, w = value.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"patch size must look like 8x16, got {value!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chromostraight",
        description="Chromosome straightening pipeline and metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", required=True, help="output directory")
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="run seed")
    common.add_argument("--keep-going", action="store_true",
                        help="record per-sample failures instead of aborting")

    p = sub.add_parser("fixtures", parents=[common],
                       help="write synthetic straight demo bars")
    p.add_argument("--count", type=int, default=10)

    p = sub.add_parser("synth", parents=[common],
                       help="generate bent variants of straight sources")
    p.add_argument("--manifest", required=True)
    p.add_argument("--variants", type=int, help="bent variants per source")

    p = sub.add_parser("preprocess", parents=[common],
                       help="straighten every sample onto the canvas")
    p.add_argument("--manifest", required=True)
    p.add_argument("--patch-size", type=_parse_patch_size, metavar="HxW")
    p.add_argument("--prune-ratio", type=float)
    p.add_argument("--workers", type=int)

    p = sub.add_parser("prepare", parents=[common],
                       help="build masked training bundles")
    p.add_argument("--manifest", required=True)
    p.add_argument("--mask-ratio", type=float)
    p.add_argument("--threshold-t", type=float)
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--val-fold", type=int, default=0)

    p = sub.add_parser("evaluate", parents=[common],
                       help="score straightened outputs against bent inputs")
    p.add_argument("--pairs", required=True,
                   help="JSON list of {id, input, output[, method]}")

    return parser


def _build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig.from_json(args.config) if args.config else RunConfig()
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    patch_size = getattr(args, "patch_size", None)
    if patch_size is not None:
        overrides["patch_h"], overrides["patch_w"] = patch_size
    for flag, field in (("prune_ratio", "prune_ratio"),
                        ("mask_ratio", "mask_ratio"),
                        ("threshold_t", "threshold_t"),
                        ("workers", "workers"),
                        ("variants", "synth_variants")):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field] = value
    return cfg.replace(**overrides) if overrides else cfg


def _write_report(out_dir: str, command: str, processed: int, failures: dict,
                  extra: dict | None = None) -> None:
    payload = {"command": command, "processed": processed,
               "failed": dict(sorted(failures.items()))}
    payload.update(extra or {})
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = _build_config(args)
    os.makedirs(args.out, exist_ok=True)

    try:
        if args.command == "fixtures":
            records = write_fixture_set(args.out, count=args.count,
                                        seed=cfg.seed)
            print(f"wrote {len(records)} fixtures to {args.out}")
            _write_report(args.out, "fixtures", len(records), {})
            return 0

        if args.command == "synth":
            records, _ = load_manifest(args.manifest)
            out_records, failures = synth_batch(
                records, cfg, os.path.dirname(args.manifest) or ".",
                args.out, keep_going=args.keep_going)
            made = sum(1 for rec in out_records if rec.kind == "synthetic")
            print(f"wrote {made} bent variants to {args.out} "
                  f"({len(failures)} failed)")
            _write_report(args.out, "synth", made, failures)
            return 0

        if args.command == "preprocess":
            records, _ = load_manifest(args.manifest)
            out_records, failures, scale = preprocess_batch(
                records, cfg, os.path.dirname(args.manifest) or ".",
                args.out, keep_going=args.keep_going)
            print(f"straightened {len(out_records)} samples to {args.out} "
                  f"at scale {scale:.3f} ({len(failures)} failed)")
            _write_report(args.out, "preprocess", len(out_records), failures,
                          {"scale": scale})
            return 0

        if args.command == "prepare":
            records, _ = load_manifest(args.manifest)
            out_records, failures = prepare_batch(
                records, cfg, os.path.dirname(args.manifest) or ".",
                args.out, keep_going=args.keep_going,
                n_folds=args.folds, val_fold=args.val_fold)
            print(f"prepared {len(out_records)} bundles in {args.out} "
                  f"({len(failures)} failed)")
            _write_report(args.out, "prepare", len(out_records), failures)
            return 0

        if args.command == "evaluate":
            pairs = load_pairs(args.pairs)
            reports, failures = evaluate_pairs(
                pairs, cfg, os.path.dirname(args.pairs) or ".",
                args.out, keep_going=args.keep_going)
            print(f"scored {len(reports)} pairs -> "
                  f"{os.path.join(args.out, 'scores.csv')} "
                  f"({len(failures)} failed)")
            _write_report(args.out, "evaluate", len(reports), failures)
            return 0
    except SampleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    raise AssertionError(f"unhandled command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
