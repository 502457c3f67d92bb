"""Command Line Interface for the sub-linear strong-law toolkit."""

import logging
import sys
from typing import Dict, Optional, Sequence

import click
from colorama import Fore, Style, init
from tabulate import tabulate

from . import __version__
from .config import config
from .errors import SllnError
from .experiments import EXPERIMENT_KINDS, RunResult, execute, parse_config, parse_value
from .fixtures import fixture_rows
from .reports import format_number, heading, render_table

# Initialize colorama for cross-platform colored output
init()

logger = logging.getLogger(__name__)

KIND_HELP = {
    "expect": "Exact upper/lower expectation of a payoff, with optional engine checks.",
    "capacity": "Upper and lower capacity of an event {X >= level}.",
    "choquet": "Choquet integral, extended expectation and finiteness diagnostics.",
    "blocking": "Weights, blocking scheme and block domination chains.",
    "inequalities": "Kolmogorov-type and lower-capacity maximal inequalities.",
    "mean-bounds": "Exact E[S_n]/n and e[S_n]/n with a convergence trend.",
    "cluster": "Steer the running mean across [a, b] and measure the visited set.",
    "divergence": "Heavy-tailed law: does max |S_k|/k keep growing?",
    "theorem1": "Weighted strong law along a battery of adversary strategies.",
    "tracking": "Follow a target mean sequence by per-step law mixing.",
}


def setup_logging(log_level: str = "WARNING", log_file: Optional[str] = None):
    """Setup logging configuration."""
    level = getattr(logging, log_level.upper(), logging.WARNING)

    # Configure logging format
    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
    )

    root = logging.getLogger()
    for handler in [h for h in root.handlers if getattr(h, "_slln", False)]:
        root.removeHandler(handler)

    # Console handler on stderr so tables on stdout stay clean
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setFormatter(formatter)
    console_handler._slln = True
    root.setLevel(level)
    root.addHandler(console_handler)

    if log_file:
        try:
            file_handler = logging.FileHandler(log_file)
            file_handler.setFormatter(formatter)
            file_handler._slln = True
            root.addHandler(file_handler)
        except PermissionError:
            click.echo(f"{Fore.YELLOW}Cannot write log file {log_file}, logging to stderr only{Style.RESET_ALL}",
                       err=True)


def parse_overrides(args: Sequence[str]) -> Dict[str, object]:
    """``key=value`` arguments as config overrides."""
    overrides = {}
    for arg in args:
        key, sep, value = arg.partition("=")
        if not sep or not key:
            raise click.BadParameter(f"expected key=value, got '{arg}'", param_hint="ARGS")
        overrides[key.strip()] = parse_value(value.strip())
    return overrides


def show_fixtures():
    click.echo(heading("Built-in fixtures"))
    rows = fixture_rows()
    table = [[r["fixture"], r["kind"], r["laws"], r["description"]] for r in rows]
    click.echo(tabulate(table, headers=["Fixture", "Kind", "Laws", "Description"], tablefmt="grid"))


def show_result(result: RunResult, output_format: str):
    if output_format == "plain":
        for row in result.rows:
            parameter = f"[{row['parameter']}]" if row.get("parameter") else ""
            click.echo(f"{row['quantity']}{parameter}={format_number(row['value'])}")
    else:
        click.echo(heading(f"{result.kind} on {result.fixture}"))
        click.echo(render_table(result.rows, limit=60))
        for path in result.artifacts:
            click.echo(f"Wrote: {path}")
    if result.ok:
        click.echo(f"{Fore.GREEN}✓{Style.RESET_ALL} All hard assertions hold")
    else:
        click.echo(f"{Fore.RED}✗{Style.RESET_ALL} A hard assertion failed", err=True)


@click.group()
@click.version_option(version=__version__)
@click.option("--log-level", default=config.LOG_LEVEL, show_default=True,
              type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
              help="Logging verbosity")
@click.option("--log-file", type=str, default=config.LOG_FILE, help="Also write logs to this file")
def main(log_level, log_file):
    """Sub-linear expectations, capacities and strong laws of large numbers."""
    setup_logging(log_level, log_file)


@main.command()
def fixtures():
    """List the built-in fixtures."""
    show_fixtures()


def _experiment_command(kind: str) -> click.Command:
    @click.command(name=kind, help=KIND_HELP[kind] + " Extra settings are given as key=value arguments.")
    @click.option("--config", "-c", "config_path", type=click.Path(exists=True, dir_okay=False),
                  help="JSON experiment config")
    @click.option("--seed", type=int, help="Seed for stochastic experiments")
    @click.option("--out", "-o", "out_dir", type=click.Path(file_okay=False),
                  help=f"Directory for CSV artifacts (default: {config.get_output_dir()})")
    @click.option("--format", "output_format", type=click.Choice(["table", "plain"]), default="table",
                  show_default=True, help="Console output format")
    @click.option("--list-fixtures", is_flag=True, help="List the built-in fixtures and exit")
    @click.argument("args", nargs=-1)
    def command(config_path, seed, out_dir, output_format, list_fixtures, args):
        if list_fixtures:
            show_fixtures()
            return
        try:
            overrides = parse_overrides(args)
            overrides["kind"] = kind
            if seed is not None:
                overrides["seed"] = seed
            text = ""
            if config_path:
                with open(config_path) as fh:
                    text = fh.read()
            cfg = parse_config(text, overrides)
            result = execute(cfg, out_dir)
            show_result(result, output_format)
        except click.BadParameter:
            raise
        except SllnError as e:
            click.echo(f"{Fore.RED}✗{Style.RESET_ALL} Error: {e}", err=True)
            sys.exit(e.exit_code)
        except Exception as e:
            logger.debug("unexpected failure", exc_info=True)
            click.echo(f"{Fore.RED}✗{Style.RESET_ALL} Unexpected error: {e}", err=True)
            sys.exit(1)
        sys.exit(result.exit_code)

    return command


for _kind in EXPERIMENT_KINDS:
    main.add_command(_experiment_command(_kind))


if __name__ == "__main__":
    main()
