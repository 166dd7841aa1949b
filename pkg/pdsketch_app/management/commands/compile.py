"""
Compile a domain into a delete-relaxed domain for hFF guidance.

`--mode opt` needs the domain only. `--mode ao` also fits codebooks and
learns first-order rules from the latent states of a dataset; targets whose
rule cannot be learned fall back to the optimistic treatment and are
reported as warnings.

Outputs the readable text form at `--out` and a JSON companion at
`<out>.json` that `plan` and `bench` reload.

Typical usage:
    python manage.py compile --domain pdsketch_app/domains/babyai_abs.pds --mode opt --out runs/abs.opt
    python manage.py compile --domain ... --params runs/abs.params --dataset data/train.jsonl \
        --mode ao --out runs/abs.ao
"""

from django.core.management.base import CommandError

from ...discretize import build_codebooks
from ...relaxed import compile_ao, compile_opt
from ...rule_learning import extract_all_rules
from ...run_utils import EXIT_INPUT, RunClock, write_manifest, write_text_atomic
from ...tasks import load_model
from ...trainer import load_dataset
from ..base import PDSketchCommand


class Command(PDSketchCommand):
    help = "Compile a relaxed (OPT or AO) domain."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--domain", required=True)
        parser.add_argument("--params", help="trained parameters (default: ground-truth slots)")
        parser.add_argument("--arch")
        parser.add_argument("--dataset", help="episodes to discretize (required for --mode ao)")
        parser.add_argument("--mode", choices=("opt", "ao"), default="opt")
        parser.add_argument("--out", required=True, help="relaxed domain text file")
        parser.add_argument("--size", type=int, default=None, help="grid size for ground-truth slots")
        parser.add_argument("--bins", type=int, default=None)
        parser.add_argument("--max-states", type=int, default=None)
        parser.add_argument("--min-precision", type=float, default=None)
        parser.add_argument("--max-clause-length", type=int, default=None)
        parser.add_argument("--strict", action="store_true", help="fail instead of falling back to OPT")

    def run(self, **options):
        clock = RunClock()
        seed = self.seed(options)
        domain, params = load_model(options["domain"], options["params"], options["arch"], options["size"])
        settings_used = {"mode": options["mode"]}

        if options["mode"] == "opt":
            relaxed = compile_opt(domain)
        else:
            if not options["dataset"]:
                raise CommandError("--mode ao needs --dataset", returncode=EXIT_INPUT)
            disc = self.section("DISCRETIZE", bins=options["bins"], max_states=options["max_states"])
            foil = self.section(
                "FOIL", min_precision=options["min_precision"], max_clause_length=options["max_clause_length"],
            )
            settings_used.update({"discretize": disc, "foil": foil, "strict": options["strict"]})
            episodes = load_dataset(options["dataset"], domain)
            codebooks = build_codebooks(domain, params, episodes, disc, seed)
            for name, book in sorted(codebooks.items()):
                self.say(f"codebook {name}: k={book.k}")
            rules = extract_all_rules(domain, params, episodes, codebooks, foil, disc["max_states"])
            for key in sorted(k for k, r in rules.items() if r is None):
                self.warn(f"no separable rule for {key}; compiled optimistically")
            relaxed = compile_ao(domain, codebooks, rules, strict=options["strict"])

        companion = f"{options['out']}.json"
        write_text_atomic(options["out"], relaxed.to_text())
        relaxed.dump_json(companion)
        write_manifest(
            options["out"], "compile", settings_used, {"seed": seed},
            {"domain": options["domain"], "params": options["params"], "dataset": options["dataset"],
             "arch": options["arch"]},
            {"relaxed": options["out"], "relaxed_json": companion},
            clock,
        )
        self.ok(
            f"compiled {domain.name} ({relaxed.mode}): {len(relaxed.actions)} actions, "
            f"{len(relaxed.axioms)} axioms, {len(relaxed.fallbacks)} optimistic fallbacks -> {options['out']}"
        )
