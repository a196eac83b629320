"""CLI."""
from __future__ import annotations

import os
import sys
from pathlib import Path
from typing import Any

import click
from click import Context, Parameter
from click_params import FloatListParamType
from loguru import logger

from .__init__ import __version__
from .click_opt.click_custom import key_value
from .click_opt.run_config import RunConfig, apply_overrides, parse_config
from .constant import DEFAULT_CONFIG, EXIT_VALIDATION, HYPOTHESES, VARIANTS
from .exceptions import ConfigError
from .itelab import run_command
from .strings import cli_version

float_list = FloatListParamType(separator=",")


def print_version(ctx: Context, _: Parameter, value: bool) -> None:  # noqa: FBT001
    """Print Version information."""
    if not value or ctx.resilient_parsing:
        return
    click.echo(cli_version.format(__version__=__version__))
    ctx.exit()


def configure_logging(*, quiet: bool, debug: bool) -> None:
    """Single stderr sink; quiet also silences progress bars."""
    logger.remove()
    level = "DEBUG" if debug else "WARNING" if quiet else "INFO"
    logger.add(sys.stderr, level=level)
    if quiet:
        os.environ["TQDM_DISABLE"] = "1"


def _dispatch(ctx: Context, command: str, changes: dict[str, Any]) -> None:
    cfg: RunConfig = ctx.obj
    cfg = cfg.updated({key: value for key, value in changes.items() if value is not None})
    ctx.exit(run_command(command, cfg))


@click.group(context_settings={"show_default": True})
@click.option(
    "-c",
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Config file of key = value lines.",
)
@click.option(
    "-o",
    "--out",
    type=click.Path(file_okay=False),
    default=None,
    help=f"Output directory [default: {DEFAULT_CONFIG['output.dir']}].",
)
@click.option("-n", "--mesh-n", type=click.IntRange(min=1), default=None, help="Mesh resolution.")
@click.option("-r", "--refine", type=click.IntRange(min=0), default=None, help="Uniform refinements after meshing.")
@click.option(
    "-s",
    "--set",
    "overrides",
    type=key_value,
    multiple=True,
    help="Override a config key, section.key=value.",
)
@click.option("-q", "--quiet", is_flag=True, help="Warnings only, no progress bars.")
@click.option("--debug", is_flag=True, help="Debug mode on.")
@click.option(
    "-v",
    "--version",
    is_flag=True,
    callback=print_version,
    expose_value=False,
    help="Show version and exit.",
)
@click.pass_context
def cli(  # noqa: PLR0913
    ctx: Context,
    config_path: Path | None,
    out: str | None,
    mesh_n: int | None,
    refine: int | None,
    overrides: tuple[tuple[str, str], ...],
    quiet: bool,  # noqa: FBT001
    debug: bool,  # noqa: FBT001
) -> None:
    """Interior transmission eigenvalue toolkit."""
    try:
        cfg = parse_config(config_path.read_text(encoding="utf-8")) if config_path else RunConfig()
        cfg = apply_overrides(cfg, list(overrides))
    except ConfigError as e:
        click.echo(str(e), err=True)
        ctx.exit(EXIT_VALIDATION)
    flags = {"output.dir": out, "mesh.n": mesh_n, "mesh.refine": refine}
    if quiet:
        flags["output.quiet"] = True
    if debug:
        flags["output.debug"] = True
    cfg = cfg.updated({key: value for key, value in flags.items() if value is not None})
    configure_logging(quiet=cfg.output_quiet, debug=cfg.output_debug)
    ctx.obj = cfg


@cli.command()
@click.option("--hypothesis", type=click.Choice(HYPOTHESES), default=None, help="Hypothesis to certify.")
@click.option("--alpha-or-beta", type=float, default=None, help="Weight exponent.")
@click.option("--tau", type=float, default=None, help="Boundary band width.")
@click.pass_context
def check(ctx: Context, hypothesis: str | None, alpha_or_beta: float | None, tau: float | None) -> None:
    """Certify a hypothesis on the media by sampling."""
    changes = {"hypothesis.name": hypothesis, "hypothesis.alpha_or_beta": alpha_or_beta, "hypothesis.tau": tau}
    _dispatch(ctx, "check", changes)


@cli.command()
@click.option("--deltas", type=float_list, default=None, help="Absorption schedule, decreasing.")
@click.option("--lambda0", type=float, default=None, help="Real shift (0 picks 25/h).")
@click.pass_context
def solve(ctx: Context, deltas: list[float] | None, lambda0: float | None) -> None:
    """Limiting absorption sweep for a constant load."""
    _dispatch(ctx, "solve", {"solver.deltas": deltas, "solver.lambda0": lambda0})


@cli.command()
@click.option("--variant", type=click.Choice(VARIANTS), default=None, help="Operator to diagonalize.")
@click.option("-k", "--k", "k", type=click.IntRange(min=1), default=None, help="Number of eigenvalues.")
@click.option("--extrapolate", is_flag=True, default=None, help="Also extrapolate over the absorption schedule.")
@click.option("--discreteness", is_flag=True, default=None, help="Also count Ritz values above spectral.eps at n and 2n.")
@click.pass_context
def eigs(  # noqa: PLR0913
    ctx: Context,
    variant: str | None,
    k: int | None,
    extrapolate: bool | None,  # noqa: FBT001
    discreteness: bool | None,  # noqa: FBT001
) -> None:
    """Eigenvalues through the shift-invert operators."""
    changes = {
        "spectral.variant": variant,
        "spectral.k": k,
        "spectral.extrapolate": extrapolate or None,
        "spectral.discreteness": discreteness or None,
    }
    _dispatch(ctx, "eigs", changes)


@cli.command()
@click.option("--lam-grid", type=float_list, default=None, help="Spectral parameters to sweep.")
@click.pass_context
def halfspace(ctx: Context, lam_grid: list[float] | None) -> None:
    """Norm scaling of the flat-interface problem."""
    _dispatch(ctx, "halfspace", {"halfspace.lam_grid": lam_grid})


@cli.command()
@click.option("--lam-grid", type=float_list, default=None, help="Spectral parameters to fit.")
@click.option("--band", "s", type=float, default=None, help="Boundary band width s.")
@click.option("--imaginary", is_flag=True, default=None, help="Use the shift i lambda.")
@click.pass_context
def decay(ctx: Context, lam_grid: list[float] | None, s: float | None, imaginary: bool | None) -> None:  # noqa: FBT001
    """Exponential decay away from the boundary and the multiplier constants."""
    _dispatch(ctx, "decay", {"decay.lam_grid": lam_grid, "decay.s": s, "decay.imaginary": imaginary or None})


@cli.command()
@click.option("--lam-max", type=float, default=None, help="Largest root to report.")
@click.option("--m-max", type=click.IntRange(min=0), default=None, help="Largest angular order.")
@click.pass_context
def oracle(ctx: Context, lam_max: float | None, m_max: int | None) -> None:
    """Disk transmission eigenvalues from Bessel functions."""
    _dispatch(ctx, "oracle", {"oracle.lam_max": lam_max, "oracle.m_max": m_max})


@cli.command()
@click.pass_context
def verify(ctx: Context) -> None:
    """Run every diagnostics suite."""
    _dispatch(ctx, "verify", {})


if __name__ == "__main__":
    cli()
