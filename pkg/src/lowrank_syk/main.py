"""lowrank_syk command-line tool."""

# Standard Python Libraries
import argparse
import asyncio
import json
import logging
import sys
from typing import Optional, Sequence

# Third-Party Libraries
from cyhy_config import get_config
from cyhy_logging import CYHY_ROOT_LOGGER, setup_logging
from pydantic import ValidationError

from ._version import __version__
from .commands import COMMANDS, run_command
from .errors import ExitCode, LowRankSykError
from .models import LowRankSykConfig

DEFAULT_LOG_LEVEL = "info"


def apply_overrides(
    config: LowRankSykConfig,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output_dir: Optional[str] = None,
    assignments: Sequence[str] = (),
) -> LowRankSykConfig:
    """
    Merge command-line values into a configuration and validate it again.

    Args:
        config (LowRankSykConfig): The configuration read from file.
        seed (Optional[int]): Replaces run.seed when given.
        workers (Optional[int]): Replaces run.workers when given.
        output_dir (Optional[str]): Replaces run.output_dir when given.
        assignments (Sequence[str]): "section.key=value" strings; the value is
            parsed as JSON and kept as a string when that fails.

    Returns:
        LowRankSykConfig: The merged and validated configuration.

    Raises:
        ValueError: If an assignment is malformed.
        ValidationError: If the merged configuration is invalid.
    """
    document = config.model_dump()
    for key, value in (("seed", seed), ("workers", workers)):
        if value is not None:
            document["run"][key] = value
    if output_dir is not None:
        document["run"]["output_dir"] = output_dir
    for assignment in assignments:
        target, separator, raw = assignment.partition("=")
        section, dot, key = target.partition(".")
        if not separator or not dot or not section or not key:
            raise ValueError(f"Override {assignment!r} is not section.key=value")
        if not isinstance(document.get(section), dict):
            raise ValueError(f"Unknown configuration section {section!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        document[section][key] = value
    return LowRankSykConfig.model_validate(document)


async def do_command(
    command: str,
    config_file: Optional[str] = None,
    arg_log_level: Optional[str] = None,
    seed: Optional[int] = None,
    workers: Optional[int] = None,
    output_dir: Optional[str] = None,
    assignments: Sequence[str] = (),
) -> None:
    """Load the configuration and run one subcommand."""
    logger = logging.getLogger(f"{CYHY_ROOT_LOGGER}.{__name__}")
    setup_logging(arg_log_level or DEFAULT_LOG_LEVEL)

    # Get the configuration
    try:
        config = get_config(file_path=config_file, model=LowRankSykConfig)
    except ValidationError:
        sys.exit(ExitCode.VALIDATION)
    except FileNotFoundError:
        sys.exit(ExitCode.IO)

    if not arg_log_level and config.run.log_level:
        # Update log levels from config if they were not set by an argument
        setup_logging(config.run.log_level)

    try:
        config = apply_overrides(config, seed, workers, output_dir, assignments)
    except (ValidationError, ValueError) as e:
        logger.error("Invalid command-line override: %s", e)
        sys.exit(ExitCode.VALIDATION)

    logger.info("Starting %s with seed %d", command, config.run.seed)
    try:
        run = await run_command(command, config)
    except LowRankSykError as e:
        logger.error("%s failed: %s", command, e)
        sys.exit(e.exit_code)
    logger.info("%s complete, results in %s", command, run.path)


async def main_async() -> None:
    """Set up logging and call the process function."""
    parser = argparse.ArgumentParser(
        description="Simulate dense cSYK dynamics with Trotterized low-rank couplings",
    )
    parser.add_argument(
        "command",
        help="the pipeline to run",
        choices=list(COMMANDS),
    )
    parser.add_argument(
        "--config-file",
        help="path to the configuration file",
        metavar="config-file",
        type=str,
    )
    parser.add_argument(
        "--log-level",
        "-l",
        help="set the logging level",
        choices=["debug", "info", "warning", "error", "critical"],
    )
    parser.add_argument("--seed", help="override run.seed", type=int)
    parser.add_argument("--workers", help="override run.workers", type=int)
    parser.add_argument(
        "--output-dir", help="override run.output_dir", metavar="output-dir"
    )
    parser.add_argument(
        "--set",
        help="override a configuration value, e.g. sff.n_sites=8",
        action="append",
        default=[],
        dest="assignments",
        metavar="section.key=value",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )

    args = parser.parse_args()

    await do_command(
        args.command,
        args.config_file,
        args.log_level,
        args.seed,
        args.workers,
        args.output_dir,
        args.assignments,
    )

    # Stop logging and clean up
    logging.shutdown()


def main():
    """Run the main function."""
    asyncio.run(main_async())
