#!/usr/bin/env python3
"""
elm-adapt CLI - Batch front end for the adaptive solver

Commands:
- run <config>     run the configured mode (adaptive, uniform, ...)
- study <config>   fixed-step convergence study
- trace <config>   characteristic tracing diagnostics
- version          show version information
"""

import argparse
import logging
import sys
from typing import List, Optional

from rich.console import Console
from rich.logging import RichHandler
from rich.panel import Panel
from rich.table import Table

from .__version__ import get_version_info
from .config import apply_environment, load_config
from .errors import ElmError
from .monitor import RunMonitor
from .runner import RunResult, run

console = Console()
logger = logging.getLogger("elm_adapt")

FORCED_MODES = {"study": "convergence", "trace": "trace-diagnostics"}


def setup_logging(level: int = logging.INFO):
    """Route library logging through rich."""
    handler = RichHandler(console=Console(stderr=True), show_path=False, rich_tracebacks=True)
    handler.setFormatter(logging.Formatter("%(name)s: %(message)s"))
    root = logging.getLogger("elm_adapt")
    root.handlers[:] = [handler]
    root.setLevel(level)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elm-adapt",
        description="Adaptive Eulerian-Lagrangian finite elements for convection-diffusion",
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    subparsers = parser.add_subparsers(dest="command", help="Commands")

    for name, help_text in (("run", "Run the configured mode"),
                            ("study", "Convergence study"),
                            ("trace", "Characteristic tracing diagnostics")):
        sub = subparsers.add_parser(name, help=help_text)
        sub.add_argument("config", help="Config file (key = value, or .yaml)")
        sub.add_argument("--output-dir", "-o", help="Output directory (overrides config and environment)")
        verbosity = sub.add_mutually_exclusive_group()
        verbosity.add_argument("--verbose", "-v", action="store_true", help="Debug logging")
        verbosity.add_argument("--quiet", "-q", action="store_true", help="Warnings only")

    subparsers.add_parser("version", help="Show version")
    return parser


def print_summary(result: RunResult):
    table = Table(title=f"{result.summary.get('benchmark', result.summary.get('field', ''))} ({result.mode})")
    table.add_column("Metric", style="cyan")
    table.add_column("Value", style="green")
    for key, value in result.summary.items():
        if isinstance(value, dict):
            continue
        if isinstance(value, float):
            value = f"{value:.6g}"
        table.add_row(key, str(value))
    console.print(table)

    phases = result.summary.get("phases")
    if phases:
        timing = Table(title="Time per phase")
        timing.add_column("Phase", style="cyan")
        timing.add_column("Time", style="green")
        for phase, text in phases.items():
            timing.add_row(phase, text)
        console.print(timing)
    console.print(f"[green]✓[/green] artifacts written to {result.output_dir}")


def version_command():
    info = get_version_info()
    console.print(f"[bold cyan]{info['title']} v{info['version']}[/bold cyan]")
    console.print(info["description"])


def run_command(args: argparse.Namespace) -> int:
    if args.verbose:
        setup_logging(logging.DEBUG)
    elif args.quiet:
        setup_logging(logging.WARNING)
    else:
        setup_logging(logging.INFO)

    try:
        config = apply_environment(load_config(args.config))
        if args.output_dir:
            config.output_dir = args.output_dir
        if args.command in FORCED_MODES:
            config.mode = FORCED_MODES[args.command]
            config.validate()
        result = run(config, RunMonitor())
    except ElmError as e:
        console.print(Panel(str(e), title=f"{type(e).__name__} ({e.severity.value})", border_style="red"))
        return e.exit_code
    except OSError as e:
        console.print(Panel(str(e), title="Cannot read config", border_style="red"))
        return 1

    print_summary(result)
    return 0


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_help()
        return 1
    if args.command == "version":
        version_command()
        return 0
    return run_command(args)


if __name__ == "__main__":
    sys.exit(main())
