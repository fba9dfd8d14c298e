"""Command-line driver for the batch pipeline.

    tablenet --config fixtures/synthetic.json --stage all
    tablenet featurize --config cfg.json --workers 4

Exit codes: 0 ok, 1 usage, 2 data error, 3 integrity or config-hash error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .pipeline import STAGES, PipelineConfig, PipelineError, run_all, run_stage

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTEGRITY = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tablenet", description="Candidate generation and table alignment pipeline.")
    p.add_argument("stage_arg", nargs="?", metavar="STAGE", choices=STAGES + ("all",),
                   help="stage to run (same as --stage)")
    p.add_argument("--config", required=True, help="pipeline configuration (JSON)")
    p.add_argument("--stage", choices=STAGES + ("all",), help="stage to run; 'all' runs every stage in order")
    p.add_argument("--workdir", help="override the working directory")
    p.add_argument("--tau", type=float, help="relevance confidence threshold")
    p.add_argument("--mode", choices=("desc", "val", "type", "+val", "+type"), help="column representation")
    p.add_argument("--seed", type=int, help="global seed")
    p.add_argument("--workers", type=int, help="worker threads (never changes outputs)")
    p.add_argument("--force", action="store_true", help="rerun even if up to date; accept mismatched hashes")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.stage and args.stage_arg and args.stage != args.stage_arg:
        parser.error(f"conflicting stages {args.stage_arg!r} and {args.stage!r}")
    stage = args.stage or args.stage_arg
    if stage is None:
        parser.error("no stage given")
    overrides = {"workdir": args.workdir, "tau": args.tau, "mode": args.mode, "seed": args.seed,
                 "workers": args.workers}
    try:
        config = PipelineConfig.load(args.config, overrides)
        results = run_all(config, args.force) if stage == "all" else [run_stage(stage, config, args.force)]
    except PipelineError as exc:
        print(f"tablenet: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ValueError, OSError) as exc:
        print(f"tablenet: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for r in results:
        print(f"{r.stage}: {'up to date' if r.skipped else 'done'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
