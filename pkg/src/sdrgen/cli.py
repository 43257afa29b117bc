"""Command-line interface: ``sdrgen generate | preview | stats``.

Exit codes: 0 success, 2 usage or configuration error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import WORKERS_ENV, load_config
from .errors import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def _nonneg(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {v}")
    return v


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdrgen", description="Seeded synthetic road-scene dataset generator.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("generate", help="generate (or resume) a dataset")
    g.add_argument("--config", required=True, help="YAML config file")
    g.add_argument("--seed", type=_nonneg, help="master seed override")
    g.add_argument("--frames", type=_positive, help="frame count override")
    g.add_argument("--out", help="output directory override")
    g.add_argument("--mode", choices=("sdr", "dr"), help="scene mode override")
    g.add_argument("--workers", type=_positive, help=f"worker processes (else ${WORKERS_ENV}, else config)")
    g.add_argument("--ablation", help="comma-separated flags: C, SR[=setting], HC, RS, RL, MP")
    g.add_argument("--quiet", action="store_true", help="no per-frame progress")

    v = sub.add_parser("preview", help="render one frame with boxes drawn")
    v.add_argument("--config", required=True)
    v.add_argument("--seed", type=_nonneg, required=True)
    v.add_argument("--frame", type=int, required=True)
    v.add_argument("--out", required=True, help="annotated PNG path")

    s = sub.add_parser("stats", help="dataset statistics")
    s.add_argument("dir", help="dataset directory")
    s.add_argument("--json", help="where to write the machine-readable report (default DIR/stats.json)")
    return p


def cmd_generate(args) -> int:
    from .dataset import generate_dataset, resolve_workers

    overrides = {"master_seed": args.seed, "frame_count": args.frames, "output_dir": args.out, "mode": args.mode,
                 "ablation": None if args.ablation is None else args.ablation.split(",")}
    cfg = load_config(args.config, overrides)
    workers = resolve_workers(args.workers, cfg)

    def progress(rec):
        if not args.quiet:
            print(f"frame {rec['frame_index']:06d}  {rec['scenario']:<58} objects {rec['object_count']:>3}"
                  f"  labels {rec['label_count']:>3}  {rec['wall_time']:.2f}s", flush=True)

    summary = generate_dataset(cfg, cfg.output_dir, workers=workers, progress=progress)
    print(f"generated {len(summary.generated)} frames, skipped {len(summary.skipped)} complete frames"
          + (f", removed {len(summary.removed_partial)} partial frames" if summary.removed_partial else "")
          + f" -> {cfg.output_dir}")
    return EXIT_OK


def cmd_preview(args) -> int:
    from .dataset import preview

    if args.frame < 0:
        raise ConfigError(f"--frame must be >= 0, got {args.frame}")
    cfg = load_config(args.config, {"master_seed": args.seed})
    _, text = preview(cfg, args.frame, args.out)
    sys.stdout.write(text)
    return EXIT_OK


def cmd_stats(args) -> int:
    from pathlib import Path

    from .dataset import compute_stats, format_stats
    from .labels import atomic_write

    try:
        stats = compute_stats(args.dir)
    except FileNotFoundError as exc:
        raise ConfigError(str(exc)) from None
    sys.stdout.write(format_stats(stats))
    atomic_write(args.json or Path(args.dir) / "stats.json", (json.dumps(stats, indent=2) + "\n").encode())
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"generate": cmd_generate, "preview": cmd_preview, "stats": cmd_stats}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"sdrgen: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"sdrgen: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    raise SystemExit(main())
