"""
Generate grid-world demonstrations as a JSON-lines dataset.

Typical usage:
    python manage.py gen_data --out data/train.jsonl --n-success 1000 --n-fail 1000
    python manage.py gen_data --out data/big.jsonl --n-doors 6 --n-objects 8 --seed 7
"""

import json

from ...exceptions import DatasetIOError
from ...gridworld import generate_dataset, grid_config
from ...run_utils import RunClock, write_manifest, write_text_atomic
from ..base import PDSketchCommand


class Command(PDSketchCommand):
    help = "Generate successful and unsuccessful grid-world demonstrations."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--out", required=True, help="dataset file to write (JSON lines)")
        parser.add_argument("--n-success", type=int, default=100)
        parser.add_argument("--n-fail", type=int, default=100)
        parser.add_argument("--size", type=int, default=None, help="grid side length including walls")
        parser.add_argument("--n-doors", type=int, default=None)
        parser.add_argument("--n-objects", type=int, default=None)

    def run(self, **options):
        clock = RunClock()
        seed = self.seed(options)
        grid = self.section("GRID", size=options["size"], n_doors=options["n_doors"], n_objects=options["n_objects"])
        config = grid_config(grid, seed)
        if options["n_success"] < 0 or options["n_fail"] < 0:
            raise DatasetIOError("episode counts must be non-negative")

        records = generate_dataset(config, options["n_success"], options["n_fail"], seed)
        text = "".join(json.dumps(r, separators=(",", ":")) + "\n" for r in records)
        try:
            write_text_atomic(options["out"], text)
        except OSError as exc:
            raise DatasetIOError(f"cannot write {options['out']}: {exc}") from exc

        write_manifest(
            options["out"], "gen_data",
            {"grid": grid, "n_success": options["n_success"], "n_fail": options["n_fail"]},
            {"seed": seed}, {}, {"dataset": options["out"]}, clock,
        )
        self.ok(f"wrote {len(records)} episodes to {options['out']}")
