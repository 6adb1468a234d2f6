"""``snlslab`` command line.

Exit codes: 0 on success, 2 for configuration or I/O errors, 3 when a
simulation aborts on a non-finite or exploding state.
"""

from __future__ import annotations

import argparse
import logging
import sys

from ..errors import ConfigError, NumericalAbort
from .config import EXPERIMENTS, ExperimentConfig
from .runner import run

log = logging.getLogger("snlslab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="snlslab", description="Numerical experiments for quintic SNLS on T^3.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="JSON config file (defaults are used for missing keys)")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", help="output directory (overrides out_dir)")
        p.add_argument("--force", action="store_true", help="replace an existing output directory")
    dump = sub.add_parser("default-config", help="print a default config for an experiment")
    dump.add_argument("kind", choices=EXPERIMENTS)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "default-config":
            sys.stdout.write(ExperimentConfig(kind=args.kind).to_json())
            return 0
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg.kind = args.command
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out_dir = args.out
        log.info("running %s (config %s)", cfg.kind, cfg.config_hash()[:12])
        manifest = run(cfg, force=args.force)
    except NumericalAbort as exc:
        print(f"snlslab: numerical abort: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, ValueError, OSError) as exc:
        print(f"snlslab: error: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.kind}: wrote {len(manifest.outputs)} files to {cfg.out_dir} in {manifest.wall_clock:.2f}s")
    return 0


if __name__ == "__main__":
    sys.exit(main())
