#!/usr/bin/env python3
"""
hauslab
Main entry point for the Hausdorff-metric command-line tool.
"""

import sys
import logging
from pathlib import Path
from typing import Optional, Sequence

from src.cli.app import CommandRunner, RunConfig, build_parser
from src.core.config import Config
from src.core.errors import HauslabError


def setup_logging(level: int = logging.INFO, log_file: Optional[Path] = None):
    """Configure logging; stdout is reserved for command results."""
    handlers = [logging.StreamHandler(sys.stderr)]
    if log_file is not None:
        Path(log_file).parent.mkdir(parents=True, exist_ok=True)
        handlers.append(logging.FileHandler(log_file))
    logging.basicConfig(
        level=level,
        format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        handlers=handlers,
        force=True
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run one command and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors, which matches the malformed-input code
        return int(e.code or 0)

    setup_logging(logging.DEBUG if args.verbose else logging.INFO)
    logger = logging.getLogger(__name__)

    try:
        config = Config()
        run = RunConfig.from_args(args, config)
        logger.debug(f"Running '{run.command}' with seed {run.seed}")
        return CommandRunner(run).execute()

    except HauslabError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        if e.details:
            logger.error(f"Details: {e.to_dict()}")
        return e.exit_code
    except Exception as e:
        logger.exception(f"Command failed with error: {str(e)}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
