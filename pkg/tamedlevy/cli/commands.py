import logging
from pathlib import Path

from django.core.management.base import BaseCommand, CommandError
from rest_framework.exceptions import ValidationError

from tamedlevy.cli.models import Command
from tamedlevy.cli.utils import parse_config, run
from tamedlevy.core.errors import (ConfigurationError, TamedLevyError,
                                   format_report, get_formatted_exception)

logger = logging.getLogger(__name__)

IO_EXIT_CODE = 2


class RunCommand(BaseCommand):
    """
    Shared front end of the run subcommands. Subclasses set ``command``.
    Exit codes: 0 success, 1 invalid config, 2 runtime or scheme
    compatibility error, 3 failed structural check.
    """

    command: Command

    def add_arguments(self, parser):
        parser.add_argument(
            "--config",
            required=True,
            help="Path to the JSON run config.",
        )
        parser.add_argument(
            "--seed", type=int, help="Master seed; overrides the config."
        )
        parser.add_argument(
            "--threads",
            type=int,
            help="Worker processes, 0 for one per CPU; overrides the config.",
        )
        parser.add_argument(
            "--out", help="Output path prefix; overrides the config."
        )

    def handle(self, *args, **options):
        try:
            text = Path(options["config"]).read_text()
        except OSError as exc:
            raise CommandError(
                f"Cannot read config {options['config']}: {exc}",
                returncode=ConfigurationError.exit_code,
            )

        try:
            config = parse_config(
                text,
                overrides={
                    "command": self.command.value,
                    "seed": options.get("seed"),
                    "worker_count": options.get("threads"),
                    "output": options.get("out"),
                },
            )
            outcome = run(config)
        except (ValidationError, TamedLevyError) as exc:
            report = get_formatted_exception(exc)
            raise CommandError(
                format_report(report), returncode=report["exit_code"]
            )
        except OSError as exc:
            raise CommandError(
                f"Cannot write output: {exc}", returncode=IO_EXIT_CODE
            )

        for path in outcome.files:
            logger.info("Output written to %s", path)
        if outcome.report:
            self.stdout.write(outcome.report)
        if outcome.exit_code:
            raise CommandError(
                "The structural check found violations.",
                returncode=outcome.exit_code,
            )
