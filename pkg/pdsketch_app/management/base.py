"""
Shared base for the PDSketch management commands.

Subclasses implement `run(**options)` instead of `handle`. Any
`PDSketchError` escaping `run` becomes a `CommandError` carrying the exit
code of the error (1 input, 2 limit, 3 unsolvable); unreadable files exit 1.
"""

from django.core.management.base import BaseCommand, CommandError

from ..conf import default_seed, get_section, load_json_config, merge_with_flags
from ..exceptions import PDSketchError
from ..run_utils import EXIT_INPUT, as_command_error


class PDSketchCommand(BaseCommand):
    def add_arguments(self, parser):
        parser.add_argument("--config", help="JSON file of settings sections, merged below the flags")
        parser.add_argument("--seed", type=int, default=None, help="seed (default: settings.PDSKETCH['SEED'])")

    def handle(self, *args, **options):
        try:
            self.file_config = load_json_config(options.get("config"))
            return self.run(**options)
        except PDSketchError as exc:
            raise as_command_error(exc) from exc
        except OSError as exc:
            raise CommandError(f"{exc.strerror or exc}: {exc.filename}", returncode=EXIT_INPUT) from exc

    def run(self, **options):
        raise NotImplementedError

    def section(self, name, **flags):
        """Effective section: settings, then the --config file, then the flags."""
        return get_section(name, merge_with_flags(self.file_config.get(name), flags))

    def seed(self, options):
        """--seed, else SEED of the --config file, else the settings default."""
        if options.get("seed") is not None:
            return int(options["seed"])
        return int(self.file_config.get("SEED", default_seed()))

    def say(self, message):
        self.stdout.write(message)

    def ok(self, message):
        self.stdout.write(self.style.SUCCESS(message))

    def warn(self, message):
        self.stderr.write(self.style.WARNING(message))
