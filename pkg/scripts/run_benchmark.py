"""
Run the full command chain for several seeds and consolidate the runs into one report.

Example:
    uv run python scripts/run_benchmark.py --config evaluation/configs/smoke.toml --seeds 0 1 2 3 4
"""

import argparse
import sys
from pathlib import Path

from dotenv import load_dotenv

load_dotenv()

from src.cli.config import load_config  # noqa: E402
from src.cli.main import main as viewfix  # noqa: E402

CHAIN = ["curate", "train-fixer", "reconstruct", "update", "enhance", "evaluate"]


def run_chain(config: str, seed: int, extra: list[str]) -> int:
    for command in CHAIN:
        print(f"[seed {seed}] {command}", file=sys.stderr)
        code = viewfix([command, "--config", config, "--seed", str(seed), *extra])
        if code != 0:
            print(f"[seed {seed}] {command} failed with exit code {code}", file=sys.stderr)
            return code
    return 0


def main():
    parser = argparse.ArgumentParser(description="Run the viewfix chain for several seeds and write a seed-median report")
    parser.add_argument("--config", "-c", required=True, help="Run config (TOML)")
    parser.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4], help="Root seeds (default: 0 1 2 3 4)")
    parser.add_argument("--runs-root", help="Output root (default: DIFIX_RUNS_ROOT, then the config)")
    parser.add_argument("--experiments", action="store_true", help="Also run the noise-level and fixer-component experiments")
    parser.add_argument("--force", action="store_true", help="Redo completed stages")
    parser.add_argument("--quiet", "-q", action="store_true")
    parser.add_argument("--output", "-o", help="Report directory (default: <runs root>/<name>-report)")
    args = parser.parse_args()

    extra = [flag for flag, on in (("--force", args.force), ("--quiet", args.quiet)) if on]
    if args.runs_root:
        extra += ["--runs-root", args.runs_root]

    run_dirs = []
    for seed in args.seeds:
        code = run_chain(args.config, seed, extra)
        if code == 0 and args.experiments:
            for kind in ("noise-level", "fixer-components"):
                code = code or viewfix(["experiment", kind, "--config", args.config, "--seed", str(seed), *extra])
        if code != 0:
            sys.exit(code)
        config = load_config(args.config, seed=seed, runs_root=args.runs_root)
        run_dirs.append(Path(config.output_root) / f"{config.name}-seed{seed}")

    output = args.output or str(run_dirs[0].parent / f"{config.name}-report")
    sys.exit(viewfix(["report", *map(str, run_dirs), "--output", output]))


if __name__ == "__main__":
    main()
