"""
Plan one task with A* in the latent space of a domain.

The task is the first state of a dataset episode (`--dataset` with
`--episode`) or a grid layout drawn from `--seed`. Prints one action per
line, then a stats line. Exit code 2 when a search limit is hit, 3 when the
task is unsolvable.

Typical usage:
    python manage.py plan --domain pdsketch_app/domains/babyai_abs.pds --seed 3 --heuristic hff-opt
    python manage.py plan --domain ... --params runs/abs.params --relaxed runs/abs.ao.json \
        --heuristic hff-ao --goal "pickup red ball" --seed 11
"""

from django.core.management.base import CommandError

from ...exceptions import LimitExceeded, Unsolvable
from ...run_utils import EXIT_INPUT, RunClock, write_manifest, write_text_atomic
from ...search import HEURISTICS, astar
from ...tasks import dataset_task, grid_task, load_heuristic, load_model
from ...trainer import load_dataset
from ..base import PDSketchCommand


class Command(PDSketchCommand):
    help = "Plan one task with A*."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--domain", required=True)
        parser.add_argument("--params", help="trained parameters (default: ground-truth slots)")
        parser.add_argument("--arch")
        parser.add_argument("--heuristic", choices=HEURISTICS, default="blind")
        parser.add_argument("--relaxed", help="JSON companion of a compiled domain")
        parser.add_argument("--dataset", help="take the task from this dataset")
        parser.add_argument("--episode", help="episode id within --dataset (default: first)")
        parser.add_argument("--goal", help='"verb color shape" or a goal formula')
        parser.add_argument("--max-nodes", type=int, default=None)
        parser.add_argument("--max-seconds", type=float, default=None)
        parser.add_argument("--weight", type=float, default=None)
        parser.add_argument("--size", type=int, default=None)
        parser.add_argument("--n-doors", type=int, default=None)
        parser.add_argument("--n-objects", type=int, default=None)
        parser.add_argument("--out", help="write the plan here (one action per line)")

    def run(self, **options):
        clock = RunClock()
        seed = self.seed(options)
        limits = self.section(
            "SEARCH", max_nodes=options["max_nodes"], max_seconds=options["max_seconds"], weight=options["weight"],
        )
        grid = self.section("GRID", size=options["size"], n_doors=options["n_doors"], n_objects=options["n_objects"])
        domain, params = load_model(options["domain"], options["params"], options["arch"], grid["size"])
        task = self.task(domain, options, seed, grid)
        heuristic = load_heuristic(options["heuristic"], domain, options["relaxed"])

        s0 = task.initial_state(domain, params)
        try:
            plan = astar(domain, s0, task.goal(domain), heuristic, limits)
        except (LimitExceeded, Unsolvable) as exc:
            if exc.stats is not None:
                self.say(self.stats_line(exc.stats, None))
            raise

        for label in plan.labels:
            self.say(label)
        self.say(self.stats_line(plan.stats, len(plan)))
        verdict = task.plan_succeeds(plan.actions)
        if verdict is not None:
            self.say(f"simulator: {'success' if verdict else 'failure'}")

        if options["out"]:
            write_text_atomic(options["out"], plan.format())
            write_manifest(
                options["out"], "plan",
                {"heuristic": options["heuristic"], "search": limits, "grid": grid, "goal": task.goal_text,
                 "episode": options["episode"]},
                {"seed": seed},
                {"domain": options["domain"], "params": options["params"], "relaxed": options["relaxed"],
                 "dataset": options["dataset"], "arch": options["arch"]},
                {"plan": options["out"]},
                clock,
            )

    def task(self, domain, options, seed, grid):
        if not options["dataset"]:
            return grid_task(seed, grid, options["goal"])
        episodes = load_dataset(options["dataset"], domain)
        if not episodes:
            raise CommandError(f"{options['dataset']} holds no episodes", returncode=EXIT_INPUT)
        if options["episode"] is None:
            return dataset_task(episodes[0], options["goal"])
        for episode in episodes:
            if episode.id == options["episode"]:
                return dataset_task(episode, options["goal"])
        raise CommandError(f"no episode {options['episode']!r} in {options['dataset']}", returncode=EXIT_INPUT)

    @staticmethod
    def stats_line(stats, length):
        shown = "-" if length is None else length
        return f"length={shown} expanded={stats.expanded} generated={stats.generated} wall_ms={stats.wall_ms:.1f}"
