"""
Parse and validate a PDSketch domain file and print its slot inventory.

Typical usage:
    python manage.py validate_domain pdsketch_app/domains/babyai_abs.pds
    python manage.py validate_domain --domain my.pds --params model.params
"""

from django.core.management.base import CommandError

from ...domain_model import check_complete
from ...neural_slots import arch_for, load_into
from ...pds_validation import load_domain_file
from ..base import PDSketchCommand


class Command(PDSketchCommand):
    help = "Parse and validate a .pds domain; list its slots and which are unbound."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("path", nargs="?", help="domain file")
        parser.add_argument("--domain", help="domain file (alternative to the positional path)")
        parser.add_argument("--params", help="parameter file to bind before reporting unbound slots")
        parser.add_argument("--arch", help="architecture file used to train --params")

    def run(self, **options):
        path = options["path"] or options["domain"]
        if not path:
            raise CommandError("a domain file is required", returncode=1)

        domain = load_domain_file(path)
        if options["params"]:
            load_into(domain, options["params"], arch_for(options["params"], options["arch"]))

        self.ok(f"{path}: domain {domain.name} is valid")
        self.say(
            f"  {len(domain.object_types)} object types, {len(domain.value_types)} value types, "
            f"{len(domain.predicates)} predicates ({len(domain.derived)} derived), "
            f"{len(domain.actions)} actions, {len(domain.slots)} slots"
        )
        if domain.slots:
            width = max(len(n) for n in domain.slots)
            self.say("slots:")
            for name, sig in domain.slots.items():
                self.say(f"  {name.ljust(width)}  {sig.describe()}")
        unbound = check_complete(domain)
        if unbound:
            self.say(f"unbound: {len(unbound)}")
            for name in unbound:
                self.say(f"  {name}")
        else:
            self.say("unbound: 0")
