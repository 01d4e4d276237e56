"""
Writes every built-in instance as a problem file:
    python scripts/regenerate_problems.py [out_dir]

The files use the writer's 17-digit format, so parsing them back gives the
same instances (and the same reports for the same seed).
"""

import sys
from pathlib import Path
from typing import Optional

import typer

# Add project root to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from errbound.core.logging import get_logger, setup_logging
from errbound.services.problem_service import BUILTIN_INSTANCES, builtin_instance, write_problem

setup_logging("INFO")
logger = get_logger("scripts.regenerate_problems")


def regenerate(out_dir: Optional[Path] = typer.Argument(None, help="Target directory (default: problems/builtin)")):
    out_dir = out_dir or Path(__file__).parent.parent / "problems" / "builtin"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in sorted(BUILTIN_INSTANCES):
        path = out_dir / f"{name.replace('-', '_')}.ini"
        path.write_text(write_problem(builtin_instance(name)), encoding="utf-8")
        logger.info(f"Wrote {path}")


if __name__ == "__main__":
    typer.run(regenerate)
