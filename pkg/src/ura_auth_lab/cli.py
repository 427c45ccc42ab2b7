"""``ura-auth-lab`` command line.

Exit codes: 0 success, 1 selftest failure, 2 usage error, 3 infeasible
configuration.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path

import click

from .channels import PfpRangeError, PfpTable
from .experiment import (
    ExperimentSpec,
    UsageError,
    cmd_analytic,
    cmd_compare_schemes,
    cmd_simulate,
    preset,
)
from .model import ConfigurationError, InfeasibleConfigurationError

EXIT_OK, EXIT_SELFTEST, EXIT_USAGE, EXIT_INFEASIBLE = 0, 1, 2, 3


def _resolve(config: str | None, preset_name: str | None, seed, trials, out) -> tuple[ExperimentSpec, Path | None]:
    if config and preset_name:
        raise UsageError("give either --config or --preset, not both")
    if config:
        spec, base = ExperimentSpec.load(config), Path(config).resolve().parent
    elif preset_name:
        spec, base = preset(preset_name), None
    else:
        raise UsageError("one of --config or --preset is required")
    spec = spec.with_overrides(masterSeed=seed, trials=trials, outputPath=out)
    return spec, base


def _emit(text: str, spec: ExperimentSpec) -> None:
    if spec.outputPath is None:
        click.echo(text, nl=False)
    else:
        click.echo(f"wrote {spec.outputPath}", err=True)


def _guard(fn):
    """Map library errors onto the documented exit codes."""

    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (InfeasibleConfigurationError, PfpRangeError) as exc:
            click.echo(f"infeasible: {exc}", err=True)
            sys.exit(EXIT_INFEASIBLE)
        except (ConfigurationError, FileNotFoundError) as exc:
            click.echo(f"usage error: {exc}", err=True)
            sys.exit(EXIT_USAGE)

    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


_common = [
    click.option("--config", "config", type=click.Path(dir_okay=False), help="ExperimentSpec JSON file."),
    click.option("--preset", "preset_name", help="Named preset, e.g. fig3."),
    click.option("--seed", type=click.IntRange(0, 2**64 - 1), help="Master seed override."),
    click.option("--trials", type=click.IntRange(min=1), help="Trial count override."),
    click.option("--out", type=click.Path(dir_okay=False), help="Output file (default stdout)."),
]


def common(fn):
    for opt in reversed(_common):
        fn = opt(fn)
    return fn


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
def main(verbose: int) -> None:
    """MAC-based identification and authentication for unsourced random access."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")


@main.command()
@common
@_guard
def analytic(config, preset_name, seed, trials, out):
    """Evaluate the closed forms over the sweep grid (CSV)."""
    spec, _ = _resolve(config, preset_name, seed, trials, out)
    _emit(cmd_analytic(spec), spec)


@main.command()
@common
@click.option("--workers", type=click.IntRange(min=1), default=1, show_default=True,
              help="Worker processes; output does not depend on this.")
@_guard
def simulate(config, preset_name, seed, trials, out, workers):
    """Run the Monte Carlo pipeline over the sweep grid (JSON)."""
    spec, base = _resolve(config, preset_name, seed, trials, out)
    _emit(cmd_simulate(spec, workers=workers, base_dir=base), spec)


@main.command("compare-schemes")
@common
@click.option("--table-bare", type=click.Path(exists=True, dir_okay=False), help="pFP table for B=D.")
@click.option("--table-mac", type=click.Path(exists=True, dir_okay=False), help="pFP table for B=D+L.")
@click.option("--table-addr", type=click.Path(exists=True, dir_okay=False), help="pFP table for B=D+L+A.")
@_guard
def compare_schemes(config, preset_name, seed, trials, out, table_bare, table_mac, table_addr):
    """Total mis-authentication of Bare / MacOnly / AddressMac versus energy (CSV)."""
    spec, base = _resolve(config, preset_name, seed, trials, out)
    paths = dict(spec.tables or {})
    for scheme, p in (("Bare", table_bare), ("MacOnly", table_mac), ("AddressMac", table_addr)):
        if p:
            paths[scheme] = p
    missing = {"Bare", "MacOnly", "AddressMac"} - set(paths)
    if missing:
        raise UsageError(f"missing pFP tables for {sorted(missing)} (use --table-* or spec 'tables')")
    resolved = {}
    for s, p in paths.items():
        pp = Path(p)
        if base is not None and not pp.is_absolute() and not pp.exists():
            pp = base / pp
        resolved[s] = pp
    tables = {s: PfpTable.from_csv(p) for s, p in resolved.items()}
    _emit(cmd_compare_schemes(spec, tables, {s: str(p) for s, p in paths.items()}), spec)


@main.command()
@click.option("--quick", is_flag=True, help="Skip the Monte Carlo agreement block.")
def selftest(quick):
    """Run the built-in consistency checks; exit 1 if any fails."""
    from .selftest import run_selftest

    ok = run_selftest(click.echo, quick=quick)
    sys.exit(EXIT_OK if ok else EXIT_SELFTEST)


if __name__ == "__main__":
    main()
