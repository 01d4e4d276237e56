"""
errbound/main.py

Purpose: Command-line entry point

- Configures logging and validates settings
- Runs the typer app and maps every outcome to an exit code
- No analysis logic should be written here
"""

import sys
from typing import List, Optional

import click
import typer

from errbound.api.commands import app
from errbound.core.config import validate_settings
from errbound.core.logging import get_logger, setup_logging
from errbound.utils.constants import EXIT_OK, EXIT_USAGE

# Initialize logging first
setup_logging()
logger = get_logger(__name__)


def run_cli(argv: Optional[List[str]] = None) -> int:
    """
    Runs one command and returns its exit code instead of exiting.

    Args:
        argv: Arguments without the program name (default: sys.argv[1:])

    Returns:
        0 holds/passed, 1 usage or IO error, 2 no error bound/failed,
        3 hypotheses violated, 4 inconclusive
    """
    argv = sys.argv[1:] if argv is None else list(argv)

    try:
        validate_settings()
    except ValueError as e:
        typer.echo(f"error: {e}", err=True)
        return EXIT_USAGE

    command = typer.main.get_command(app)
    try:
        result = command.main(args=argv, prog_name="errbound", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_USAGE
    except click.exceptions.Abort:
        typer.echo("aborted", err=True)
        return EXIT_USAGE
    except Exception as e:
        logger.error(f"Unhandled exception: {str(e)}", exc_info=True)
        typer.echo(f"error: {e}", err=True)
        return EXIT_USAGE

    # --help and commands that return normally yield None
    return result if isinstance(result, int) else EXIT_OK


def main() -> None:
    sys.exit(run_cli())


if __name__ == "__main__":
    main()
