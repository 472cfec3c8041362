"""
Horseshoe Recurrence Lab - command line
One subcommand per pipeline stage (its dependencies run first) plus
``pipeline`` for an explicit stage list. Reports land in --out-dir as
JSON summaries and CSV plot data.

Exit codes: 0 success, 2 verify-k found a counterexample, 1 error.
"""
import argparse
import logging
from typing import List, Optional

from config import ConfigError, ExperimentSpec, load_config, parse_config, settings
from pipeline.stages import stage_registry, run_pipeline

logger = logging.getLogger("horseshoe")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COUNTEREXAMPLE = 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment JSON file")
    common.add_argument("--seed", type=int, default=None, help="override the config seed")
    common.add_argument("--rho", type=float, default=None, help="override scales.rho")
    common.add_argument("--out-dir", default=settings.OUT_DIR, help="report directory")
    common.add_argument("--threads", type=int, default=None, help="cap on intra-stage workers")
    common.add_argument("--log-level", default=settings.LOG_LEVEL, help="DEBUG, INFO, WARNING, ...")

    parser = argparse.ArgumentParser(
        prog="horseshoe",
        description="Computational lab for 3D model horseshoes with sharp splitting",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in stage_registry.names:
        sub.add_parser(name, parents=[common], help=f"run {name} (and the stages it needs)")
    pipe = sub.add_parser("pipeline", parents=[common], help="run an explicit stage list")
    pipe.add_argument(
        "--stages",
        default=",".join(stage_registry.names),
        help="comma-separated stages; dependencies must be listed too",
    )
    return parser


def resolve_spec(args: argparse.Namespace) -> ExperimentSpec:
    """Config file plus command-line overrides, validated again as a whole"""
    spec = load_config(args.config)
    if args.seed is None and args.rho is None and args.threads is None:
        return spec
    data = spec.model_dump(mode="json")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.rho is not None:
        data["scales"]["rho"] = args.rho
    if args.threads is not None:
        data["threads"] = args.threads
    return parse_config(data)


def stages_for(args: argparse.Namespace) -> List[str]:
    if args.command == "pipeline":
        return [s.strip() for s in args.stages.split(",") if s.strip()]
    return stage_registry.closure([args.command])


def run(args: argparse.Namespace) -> int:
    spec = resolve_spec(args)
    bundle = run_pipeline(spec, stages_for(args))
    bundle.write(args.out_dir)
    if bundle.counterexample:
        logger.warning("verify-k returned a counterexample; see %s/verify-k.json", args.out_dir)
        return EXIT_COUNTEREXAMPLE
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, str(args.log_level).upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return run(args)
    except ConfigError as e:
        logger.error("config error: %s", e)
        return EXIT_ERROR
    except Exception as e:
        logger.error("%s: %s", type(e).__name__, e)
        logger.debug("traceback", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
