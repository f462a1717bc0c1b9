import sys

import click
from dotenv import load_dotenv

from Experiments.commands import cmd_bound_sweep, cmd_certify, cmd_run
from Experiments.config import SUITES, load_config
from Utils.helpers import BlindSimError, ConfigError, TOOL_VERSION, log_message

# ---- Load .env ----
load_dotenv()

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _execute(handler, config_path, **flags):
    """Build the config, run the command and map errors onto exit codes."""
    try:
        config = load_config(config_path, **flags)
    except BlindSimError as e:
        log_message("error", f"Invalid configuration: {e}")
        sys.exit(EXIT_CONFIG)
    try:
        code = handler(config)
    except ConfigError as e:
        log_message("error", f"Invalid configuration: {e}")
        sys.exit(EXIT_CONFIG)
    except BlindSimError as e:
        log_message("error", f"{type(e).__name__}: {e}")
        sys.exit(EXIT_FAIL)
    sys.exit(code)


# ---- Shared options ----
def common_options(f):
    options = [
        click.option("--config", "config_path", type=click.Path(dir_okay=False), help="JSON file mirroring the flags."),
        click.option("--seed", type=int, help="64-bit seed (falls back to BLINDSIM_SEED)."),
        click.option("--trials", type=int, help="Trial count for randomized parts."),
        click.option("--out", type=click.Path(dir_okay=False), help="Output file."),
    ]
    for option in reversed(options):
        f = option(f)
    return f


@click.group()
@click.version_option(TOOL_VERSION, prog_name="blindsim")
def cli():
    """Measuring-client blind computation simulator."""


# ---- Commands ----
@cli.command()
@click.option("--variant", type=click.Choice(["noverify", "verify"]))
@click.option("--N", "N", type=int, help="Positions (verify) or resource sites (noverify).")
@click.option("--angles", type=str, help="Comma-separated wire angles.")
@click.option("--bob", type=str, help="'honest' or an attack JSON file.")
@click.option("--device", type=str, help="'honest', a cheating kind, or a device JSON file.")
@common_options
def run(config_path, variant, N, angles, bob, device, seed, trials, out):
    """Execute one protocol instance and write its transcript."""
    parsed = None
    if angles:
        try:
            parsed = [float(a) for a in angles.split(",")]
        except ValueError:
            log_message("error", f"Invalid configuration: cannot parse angles {angles!r}")
            sys.exit(EXIT_CONFIG)
    _execute(cmd_run, config_path, command="run", variant=variant, N=N, angles=parsed, bob=bob,
             device=device, seed=seed, trials=trials, out=out)


@cli.command("bound-sweep")
@click.option("--N", "N", type=int, help="Number of positions.")
@click.option("--d", "d", type=int, multiple=True, help="Code distance; repeat to sweep.")
@click.option("--strategies", type=click.Choice(["single", "pair", "none"]))
@common_options
def bound_sweep(config_path, N, d, strategies, seed, trials, out):
    """Brute-force and Monte Carlo undetected-error probabilities as CSV."""
    _execute(cmd_bound_sweep, config_path, command="bound-sweep", N=N, d=list(d) or None,
             strategies=strategies, seed=seed, trials=trials, out=out)


@cli.command()
@click.argument("suite", type=click.Choice(list(SUITES) + ["all"]), required=False)
@click.option("--planted", is_flag=True, default=None, help="Swap the honest no-signaling backend for a signaling one.")
@common_options
def certify(config_path, suite, planted, seed, trials, out):
    """Run a certification suite and write its JSON report."""
    _execute(cmd_certify, config_path, command="certify", suite=suite, planted=planted,
             seed=seed, trials=trials, out=out)


if __name__ == "__main__":
    cli()
