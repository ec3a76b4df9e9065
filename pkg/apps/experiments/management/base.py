"""
Shared plumbing for the experiment management commands.

Exit codes: 0 success, 1 user error (bad arguments, invalid scenario, missing
artifact, any ``NfceError``), 2 internal error.
"""

from __future__ import annotations

import logging
import math
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError

from apps.experiments.scenario import LABEL_MODES, MODES, load_scenario
from apps.utils.exceptions import NfceError

logger = logging.getLogger(__name__)

USER_ERROR = 1
INTERNAL_ERROR = 2


def parse_snr_grid(text: str) -> tuple[float, ...]:
    values = [part.strip() for part in text.split(",") if part.strip()]
    if not values:
        raise CommandError("--snr-grid must list at least one SNR", returncode=1)
    try:
        grid = tuple(float(value) for value in values)
    except ValueError as exc:
        raise CommandError(f"--snr-grid: {exc}", returncode=1) from exc
    if any(math.isnan(value) for value in grid):
        raise CommandError("--snr-grid must not contain NaN", returncode=1)
    return grid


def parse_sizes(text: str) -> list[int]:
    try:
        sizes = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as exc:
        raise CommandError(f"--size-sweep: {exc}", returncode=1) from exc
    if not sizes or any(size < 1 for size in sizes):
        raise CommandError("--size-sweep needs positive sizes", returncode=1)
    return sizes


class ExperimentCommand(BaseCommand):
    """Base command: maps library failures onto exit codes 1 and 2."""

    def create_parser(self, prog_name, subcommand, **kwargs):
        parser = super().create_parser(prog_name, subcommand, **kwargs)
        argparse_exit = parser.exit

        def exit_with_user_error(status=0, message=None):
            # argparse reports usage errors with status 2
            argparse_exit(USER_ERROR if status == 2 else status, message)

        parser.exit = exit_with_user_error
        return parser

    def add_output_argument(self, parser):
        parser.add_argument(
            "--out",
            type=str,
            default=str(settings.NFCE_OUTPUT_DIR),
            help="Experiment output directory",
        )

    def add_scenario_arguments(self, parser):
        parser.add_argument(
            "--scenario",
            type=str,
            default=str(settings.NFCE_DEFAULT_SCENARIO),
            help="Scenario key-value file",
        )
        parser.add_argument(
            "--seed", type=int, default=None, help="Override the scenario seed"
        )
        parser.add_argument(
            "--mode", choices=MODES, default=None, help="Near or far field channels"
        )
        parser.add_argument(
            "--labels",
            choices=LABEL_MODES,
            default=None,
            help="Train on true channels or on full-overhead LS estimates",
        )
        parser.add_argument(
            "--snr-grid",
            type=str,
            default=None,
            help="Comma separated SNR values in dB (e.g. -10,-5,0,5,10)",
        )

    def add_async_argument(self, parser):
        parser.add_argument(
            "--async",
            dest="run_async",
            action="store_true",
            help="Queue the work as a Celery task instead of running it here",
        )

    def load_scenario(self, options):
        scenario = load_scenario(options["scenario"])
        overrides = self.scenario_overrides(options)
        return scenario.with_overrides(**overrides) if overrides else scenario

    def scenario_overrides(self, options) -> dict:
        overrides = {
            "seed": options.get("seed"),
            "mode": options.get("mode"),
            "labels": options.get("labels"),
        }
        if options.get("snr_grid") is not None:
            overrides["snr_grid_db"] = list(parse_snr_grid(options["snr_grid"]))
        return {key: value for key, value in overrides.items() if value is not None}

    def output_dir(self, options) -> Path:
        return Path(options["out"])

    def handle(self, *args, **options):
        try:
            return self.run(**options)
        except CommandError:
            raise
        except NfceError as exc:
            raise CommandError(str(exc), returncode=USER_ERROR) from exc
        except Exception as exc:
            logger.exception(f"❌ {type(self).__module__} failed")
            raise CommandError(
                f"internal error: {exc}", returncode=INTERNAL_ERROR
            ) from exc

    def run(self, **options):
        raise NotImplementedError
