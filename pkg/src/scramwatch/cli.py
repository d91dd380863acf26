"""Command-line front end.

Thin argument handling over the workflow functions: every subcommand reads
its inputs from files, writes its outputs to files, and exits. Exit codes
are scriptable: 0 success, 1 usage or configuration problem, 2 data
problem, 3 benchmark gates failed.
"""

from __future__ import annotations

import argparse
import sys

from . import workflow
from .config import RunConfig, parse_config
from .errors import ConfigError, DataError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_GATES = 3


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value configuration file")
    common.add_argument("--data-dir", metavar="DIR", help="series and manifest directory")
    common.add_argument("--out-dir", metavar="DIR", help="checkpoints, timelines, reports")
    common.add_argument("--seed", type=int, help="master seed override")
    common.add_argument("--metric", choices=("mae", "mse"), help="window error metric")
    common.add_argument("--threshold", type=float, help="detection threshold override")
    common.add_argument("--desk-scale", action="store_const", const=True, default=None,
                        help="use the reduced architecture")

    parser = argparse.ArgumentParser(
        prog="scramwatch",
        description="Replay-attack detection and localization for reactor telemetry.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    sub.add_parser("simulate", parents=[common],
                   help="generate the synthetic corpus and its manifest")
    p = sub.add_parser("inject", parents=[common],
                       help="falsify a scram series with a numbered replay scenario")
    p.add_argument("--level", type=int, required=True, help="scenario number, 1..6")
    p.add_argument("--source", metavar="NAME", help="manifest entry to attack (default: held-out scram)")
    sub.add_parser("train", parents=[common], help="fit the model on full-cycle data")
    sub.add_parser("finetune", parents=[common], help="continue training on event data")
    sub.add_parser("calibrate", parents=[common],
                   help="set detection and attribution thresholds from clean validation data")
    p = sub.add_parser("detect", parents=[common], help="scan a series for anomalies")
    p.add_argument("input", nargs="?", metavar="FILE", help="series CSV inside the data directory")
    p.add_argument("--name", help="artifact name prefix (default: input stem)")
    p.add_argument("--sweep", action="store_true",
                   help="emit the threshold-sweep table over the standard scenario set")
    p = sub.add_parser("explain", parents=[common],
                       help="attribute flagged windows and localize the replay")
    p.add_argument("input", metavar="FILE", help="series CSV inside the data directory")
    p.add_argument("--name", help="artifact name prefix (default: input stem)")
    p.add_argument("--onset", type=int, help="event onset override (seconds)")
    sub.add_parser("report", parents=[common],
                   help="aggregate all scenarios into the benchmark report")
    p = sub.add_parser("serve", parents=[common], help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def _load_config(args: argparse.Namespace) -> RunConfig:
    config = parse_config(args.config) if args.config else RunConfig()
    overrides = dict(
        data_dir=args.data_dir,
        out_dir=args.out_dir,
        seed=args.seed,
        metric=args.metric,
        threshold=args.threshold,
        desk_scale=args.desk_scale,
    )
    if getattr(args, "onset", None) is not None:
        overrides["onset_override"] = args.onset
    return config.override(**overrides)


def _artifact_name(args: argparse.Namespace) -> str:
    if args.name:
        return args.name
    stem = args.input.rsplit("/", 1)[-1]
    return stem[:-4] if stem.endswith(".csv") else stem


def _run(args: argparse.Namespace) -> int:
    config = _load_config(args)
    data_dir, out_dir = config.data_dir, config.out_dir
    log = print

    if args.command == "simulate":
        workflow.simulate_corpus(config, data_dir, log=log)
    elif args.command == "inject":
        workflow.inject_scenario(config, data_dir, args.level, source=args.source, log=log)
    elif args.command == "train":
        workflow.train_model(config, data_dir, out_dir, log=log)
    elif args.command == "finetune":
        workflow.finetune_model(config, data_dir, out_dir, log=log)
    elif args.command == "calibrate":
        workflow.calibrate_thresholds(config, data_dir, out_dir, log=log)
    elif args.command == "detect":
        if args.sweep:
            result = workflow.run_report(config, data_dir, out_dir, log=None)
            log(f"sweep written for {len(result.sweep.labels)} datasets")
        elif args.input:
            workflow.detect_file(config, data_dir, out_dir, args.input, _artifact_name(args), log=log)
        else:
            raise ConfigError("detect needs an input file or --sweep")
    elif args.command == "explain":
        result = workflow.explain_file(config, data_dir, out_dir, args.input,
                                       _artifact_name(args), log=log)
        if not result.attributions:
            log("nothing to explain: no windows were flagged")
    elif args.command == "report":
        result = workflow.run_report(config, data_dir, out_dir, log=log)
        if not result.passed:
            return EXIT_GATES
    elif args.command == "serve":
        import uvicorn

        from .service import create_app
        uvicorn.run(create_app(config), host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits 2 on usage errors; remap
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return _run(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
