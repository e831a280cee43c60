#!/usr/bin/env python3
"""CLI interface for the counterfactual locality checker."""

import logging
import sys
from pathlib import Path

import click

from src.commands import cmd_all, cmd_histories, cmd_lemmas, cmd_proof, cmd_quantum, cmd_worlds
from src.config import Config
from src.errors import CapacityError, ConfigInvalid, SearchIncomplete
from src.runconfig import load_run_config

EXIT_CONFIG, EXIT_CAPACITY = 2, 3


@click.group()
def cli():
    """Model checker for the Hardy-experiment locality argument."""
    pass


_RUN_OPTIONS = (
    click.option('--config', 'config_path', type=click.Path(path_type=Path), default=None,
                 help='Run configuration (INI). Defaults to the Hardy preset.'),
    click.option('--tolerance', type=float, default=None, help='Override the null tolerance'),
    click.option('--machine', is_flag=True, help='Print VERDICT lines only'),
    click.option('--verbose', is_flag=True, help='Log progress to stderr'),
    click.option('--export', is_flag=True, help=f'Write attached tables as CSV to {Config.OUTPUT_DIR}'),
)


def run_options(func):
    """Options shared by every command."""
    for option in reversed(_RUN_OPTIONS):
        func = option(func)
    return func


def _run(build, config_path, tolerance, machine, verbose, export):
    """Load the config, build the reports and exit with the worst code."""
    if verbose:
        logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                            format='%(levelname)s %(name)s: %(message)s')
    try:
        Config.validate()
    except ValueError as e:
        click.echo(f"❌ {e}", err=True)
        sys.exit(EXIT_CONFIG)

    try:
        rc = load_run_config(config_path, tolerance)
        reports = build(rc)
    except ConfigInvalid as e:
        click.echo(f"❌ Invalid configuration: {e}", err=True)
        sys.exit(EXIT_CONFIG)
    except (CapacityError, SearchIncomplete) as e:
        click.echo(f"❌ Search incomplete: {e}", err=True)
        sys.exit(EXIT_CAPACITY)

    if export:
        Config.init_dirs()
    for report in reports:
        lines = report.machine_lines() if machine else report.human_lines()
        for line in lines:
            click.echo(line)
        if export:
            for path in report.export_csv(Config.OUTPUT_DIR):
                click.echo(f"📁 Exported {path}", err=True)

    code = max(report.exit_code() for report in reports)
    if not machine:
        failed = sum(len(report.failed) for report in reports)
        click.echo(f"\n{'❌' if failed else '✅'} {failed} failing check(s)")
    sys.exit(code)


@cli.command()
@run_options
def worlds(config_path, tolerance, machine, verbose, export):
    """List logical and physically possible worlds."""
    _run(lambda rc: [cmd_worlds(rc)], config_path, tolerance, machine, verbose, export)


@cli.command()
@run_options
def quantum(config_path, tolerance, machine, verbose, export):
    """Check the quantum predictions, no-signalling and microcausality."""
    _run(lambda rc: [cmd_quantum(rc)], config_path, tolerance, machine, verbose, export)


@cli.command()
@run_options
@click.option('--seed', type=int, default=0, help='Seed for the random formulas')
def lemmas(config_path, tolerance, machine, verbose, export, seed):
    """Check Eq. (2.1), vacuity, LOC1c-f and the set identities."""
    _run(lambda rc: [cmd_lemmas(rc, seed)], config_path, tolerance, machine, verbose, export)


@cli.command()
@run_options
@click.option('--script', type=str, default=None,
              help="'builtin' or a script file; defaults to the config's [script], then builtin")
def proof(config_path, tolerance, machine, verbose, export, script):
    """Replay a proof script and search the accessibility constraints.

    Example: python cli.py proof --script builtin --machine
    """
    _run(lambda rc: [cmd_proof(rc, script)], config_path, tolerance, machine, verbose, export)


@cli.command()
@run_options
@click.option('--seed', type=int, default=0, help='Seed for the random choice policies')
def histories(config_path, tolerance, machine, verbose, export, seed):
    """Build the history tree and trace line 5 and (5.4)."""
    _run(lambda rc: [cmd_histories(rc, seed)], config_path, tolerance, machine, verbose, export)


@cli.command(name='all')
@run_options
@click.option('--seed', type=int, default=0, help='Seed for lemmas and histories')
@click.option('--script', type=str, default=None, help="'builtin' or a script file")
def run_all(config_path, tolerance, machine, verbose, export, seed, script):
    """Run every check suite in order."""
    _run(lambda rc: cmd_all(rc, seed, script), config_path, tolerance, machine, verbose, export)


if __name__ == '__main__':
    cli()
