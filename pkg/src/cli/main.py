"""
viewfix command line: curate | train-fixer | reconstruct | update | enhance | evaluate | report | experiment
"""

import argparse
import sys
from pathlib import Path

import torch

from src.cli.commands import (
    cmd_compare,
    cmd_curate,
    cmd_enhance,
    cmd_evaluate,
    cmd_experiment,
    cmd_reconstruct,
    cmd_report,
    cmd_train_fixer,
    cmd_update,
)
from src.cli.config import load_config, log_level, num_threads
from src.cli.handlers import handle_command_errors
from src.cli.logging_setup import configure_logging
from src.cli.workspace import RunDirectory
from src.errors import ConfigError

STAGES = {
    "curate": cmd_curate,
    "train-fixer": cmd_train_fixer,
    "reconstruct": cmd_reconstruct,
    "update": cmd_update,
    "enhance": cmd_enhance,
    "evaluate": cmd_evaluate,
}


def _run_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, help="Run config (TOML)")
    parser.add_argument("--seed", type=int, help="Override the root seed")
    parser.add_argument("--force", action="store_true", help="Redo the stage even if it already completed")
    parser.add_argument("--runs-root", help="Output root (default: DIFIX_RUNS_ROOT, then the config)")
    parser.add_argument("--quiet", "-q", action="store_true", help="Only warnings and errors; no progress bars")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="difix", description="Single-step artifact fixing and progressive 3D distillation")
    sub = parser.add_subparsers(dest="command", required=True)

    for name in STAGES:
        stage = sub.add_parser(name, help=f"Run the {name} stage")
        _run_options(stage)
        if name == "enhance":
            stage.add_argument("--scene", choices=["progressive", "baseline"], default="progressive", help="Scene checkpoint to render and fix")
        if name == "evaluate":
            stage.add_argument("--renders", type=Path, help="Compare this PNG directory against --truth instead of the run layout")
            stage.add_argument("--truth", type=Path, help="Ground-truth PNG directory for --renders")
            stage.add_argument("--output", type=Path, help="Report path stem for --renders (default: <run>/metrics/compare)")

    experiment = sub.add_parser("experiment", help="Fixer-side ablations that retrain the denoiser")
    experiment.add_argument("kind", choices=["noise-level", "fixer-components"])
    _run_options(experiment)

    report = sub.add_parser("report", help="Consolidate completed runs into a markdown report")
    report.add_argument("runs", nargs="+", type=Path, help="Run directories")
    report.add_argument("--output", "-o", type=Path, help="Output directory (default: <first run>/../report)")
    report.add_argument("--quiet", "-q", action="store_true")
    return parser


@handle_command_errors
def dispatch(args: argparse.Namespace) -> None:
    if args.command == "report":
        path = cmd_report(args.runs, args.output)
        print(f"Report written to: {path}", file=sys.stderr)
        return

    config = load_config(args.config, seed=args.seed, runs_root=args.runs_root)
    progress = not args.quiet and sys.stderr.isatty()
    with RunDirectory(config) as run:
        if args.command == "experiment":
            cmd_experiment(run, args.kind, force=args.force, progress=progress)
        elif args.command == "enhance":
            cmd_enhance(run, force=args.force, progress=progress, source=args.scene)
        elif args.command == "evaluate" and args.renders is not None:
            if args.truth is None:
                raise ConfigError("--renders needs --truth", {"renders": str(args.renders)})
            cmd_compare(args.renders, args.truth, args.output or run.metrics / "compare", config)
        else:
            STAGES[args.command](run, force=args.force, progress=progress)
        print(f"{args.command} done: {run.root}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(log_level(), quiet=args.quiet)
    torch.set_num_threads(num_threads())
    return dispatch(args)


if __name__ == "__main__":
    sys.exit(main())
