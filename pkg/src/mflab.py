"""
Entry point for the mflab command line.
Loads the environment and lab configuration, validates an experiment document,
dispatches it to the matching command and writes config.echo.json, the
command's CSV files and summary.json (or error.json) into the output directory.
"""
import argparse
import json
import os
import sys
from typing import Any, Dict, Optional, Sequence

from dotenv import load_dotenv

from .commands import get_command
from .mflab_config import LabConfig, config_manager, get_lab_config, init_lab_config
from .mflab_logging import get_logger, handle_exception, setup_logging
from .mflab_potentials import build_spec
from .mflab_process import init_pool
from .mflab_reports import ReportWriter, open_report
from .mflab_validation import InputError, dump_experiment, load_experiment

logger = get_logger("cli")


def create_lab(config_override: Optional[Dict[str, Any]] = None) -> LabConfig:
    """Creates and configures the lab runtime."""
    # Load environment variables from .env file first
    load_dotenv()

    try:
        config = init_lab_config()
    except ValueError as e:
        print(f"Error loading configuration: {e}")
        config = config_manager.load_from_dict({})

    # Override config with provided dictionary (for testing)
    if config_override:
        merged = {**config.__dict__, **config_override}
        config = config_manager.load_from_dict(merged)
        config_manager.validate_config()

    setup_logging(level=config.log_level, log_file=config.log_file, max_bytes=config.log_max_size,
                  backup_count=config.log_backup_count)
    logger.info("Configuration loaded successfully")
    return config


def _read_document(config_path: str) -> Dict[str, Any]:
    try:
        with open(config_path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except FileNotFoundError:
        raise InputError(f"experiment document not found: {config_path}", "cli.run")
    except json.JSONDecodeError as e:
        raise InputError(f"experiment document is not valid JSON: {e}", "cli.run")


def _all_passed(summary: Dict[str, Any]) -> bool:
    return all(check["passed"] for check in summary.get("checks", []))


def run(config_path: str, output: Optional[str] = None, workers: Optional[int] = None,
        seed: Optional[int] = None) -> int:
    """
    Run one experiment document.

    Args:
        config_path: Path of the JSON experiment document
        output: Output directory, overriding the document
        workers: Worker count, overriding the document
        seed: Master seed, overriding the document

    Returns:
        Exit status: 0 all checks passed, 1 some check failed,
        2 configuration error, 3 numeric error
    """
    lab = get_lab_config()
    target = output or lab.output_dir
    try:
        document = _read_document(config_path)
        if isinstance(document, dict):
            if seed is not None:
                document["seed"] = seed
            if workers is not None:
                document["workers"] = workers
            if output is not None:
                document["output"] = output
        config = load_experiment(document)
        target = config["output"] or os.path.join(lab.output_dir, config["command"])
        config["output"] = target

        command = get_command(config["command"])
        init_pool(config["workers"])
        spec = build_spec(config["potential"])
        logger.info(f"Running {command.name} on {spec.kind} with seed {config['seed']}")

        with open_report(target) as writer:
            writer.write_json("config.echo.json", dump_experiment(config))
            summary = command.handler(spec, config["params"], config["seed"], writer)
            summary = {"command": command.name, "seed": config["seed"], **summary}
            summary["passed"] = _all_passed(summary)
            writer.write_json("summary.json", summary)
    except Exception as e:
        report = handle_exception(e, logger, "cli.run")
        try:
            ReportWriter(target).write_json("error.json", report)
        except OSError as io_error:
            logger.error(f"Could not write error.json to {target}: {io_error}")
        return report["error"]["exit_code"]

    failed = [check["name"] for check in summary.get("checks", []) if not check["passed"]]
    if failed:
        logger.warning(f"{command.name}: failed checks {', '.join(failed)}")
        return 1
    logger.info(f"{command.name}: all {len(summary.get('checks', []))} checks passed")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mflab", description="Mean-field Langevin numerical lab")
    parser.add_argument("--config", required=True, help="experiment document (JSON)")
    parser.add_argument("--output", help="output directory")
    parser.add_argument("--workers", type=int, help="worker count")
    parser.add_argument("--seed", type=int, help="master seed")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    create_lab()
    return run(args.config, output=args.output, workers=args.workers, seed=args.seed)


if __name__ == '__main__':
    sys.exit(main())
