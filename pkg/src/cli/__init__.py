from src.cli.config import load_config
from src.cli.handlers import exit_code_for, handle_command_errors
from src.cli.main import build_parser, main
from src.cli.report import build_report, check_compatible, seed_summary
from src.cli.workspace import RunDirectory, require, validate_outputs

__all__ = [
    "load_config",
    "exit_code_for",
    "handle_command_errors",
    "build_parser",
    "main",
    "build_report",
    "check_compatible",
    "seed_summary",
    "RunDirectory",
    "require",
    "validate_outputs",
]
