"""
Run a suite of grid tasks under several heuristics and write per-task stats.

One CSV row per (task, heuristic): task_id, heuristic, solved, plan_len,
expanded, generated, wall_ms, status ("ok", "limit" or "unsolvable") and
sim_success (the plan achieves the goal in the simulator). The CSV is
rewritten after every task, so partial results survive an interrupted run.

Typical usage:
    python manage.py bench --domain pdsketch_app/domains/babyai_abs.pds --n-tasks 20 --out runs/bench.csv
    python manage.py bench --domain ... --params runs/abs.params --relaxed-ao runs/abs.ao.json \
        --suite suites/doors.json --out runs/bench.csv
"""

import logging
from pathlib import Path

import pandas as pd
from django.core.management.base import CommandError

from ...exceptions import LimitExceeded, Unsolvable
from ...run_utils import EXIT_INPUT, RunClock, record_bench_rows, write_manifest
from ...search import HEURISTICS, astar
from ...tasks import grid_suite, load_heuristic, load_model, load_suite
from ..base import PDSketchCommand

logger = logging.getLogger(__name__)

COLUMNS = ["task_id", "heuristic", "solved", "plan_len", "expanded", "generated", "wall_ms", "status", "sim_success"]


class Command(PDSketchCommand):
    help = "Benchmark A* heuristics on a task suite."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--domain", required=True)
        parser.add_argument("--params", help="trained parameters (default: ground-truth slots)")
        parser.add_argument("--arch")
        parser.add_argument("--heuristic", action="append", choices=HEURISTICS,
                            help="repeatable; default: blind, hff-opt and hff-ao when --relaxed-ao is given")
        parser.add_argument("--relaxed-opt", help="JSON companion of an OPT compilation")
        parser.add_argument("--relaxed-ao", help="JSON companion of an AO compilation")
        parser.add_argument("--suite", help='JSON suite: {"tasks": [{"id", "seed", "goal"?}]}')
        parser.add_argument("--n-tasks", type=int, default=20, help="suite size when --suite is absent")
        parser.add_argument("--max-nodes", type=int, default=None)
        parser.add_argument("--max-seconds", type=float, default=None)
        parser.add_argument("--weight", type=float, default=None)
        parser.add_argument("--size", type=int, default=None)
        parser.add_argument("--n-doors", type=int, default=None)
        parser.add_argument("--n-objects", type=int, default=None)
        parser.add_argument("--out", required=True, help="CSV file")

    def run(self, **options):
        clock = RunClock()
        seed = self.seed(options)
        limits = self.section(
            "SEARCH", max_nodes=options["max_nodes"], max_seconds=options["max_seconds"], weight=options["weight"],
        )
        grid = self.section("GRID", size=options["size"], n_doors=options["n_doors"], n_objects=options["n_objects"])
        names = options["heuristic"] or [h for h in HEURISTICS if h != "hff-ao" or options["relaxed_ao"]]
        names = list(dict.fromkeys(names))

        domain, params = load_model(options["domain"], options["params"], options["arch"], grid["size"])
        heuristics = {}
        for name in names:
            path = options["relaxed_ao"] if name == "hff-ao" else options["relaxed_opt"] if name == "hff-opt" else None
            heuristics[name] = load_heuristic(name, domain, path)
        if options["suite"]:
            tasks = load_suite(options["suite"], grid)
        else:
            if options["n_tasks"] < 0:
                raise CommandError("--n-tasks must be non-negative", returncode=EXIT_INPUT)
            tasks = grid_suite(options["n_tasks"], seed, grid)
        self.say(f"{len(tasks)} tasks x {len(names)} heuristics")

        rows = []
        for task in tasks:
            s0 = task.initial_state(domain, params)
            goal = task.goal(domain)
            for name in names:
                rows.append(self.run_one(domain, task, s0, goal, name, heuristics[name], limits))
            self.flush(rows, options["out"])

        self.flush(rows, options["out"])
        _, manifest_row = write_manifest(
            options["out"], "bench",
            {"heuristics": names, "search": limits, "grid": grid, "n_tasks": len(tasks), "suite": options["suite"]},
            {"seed": seed},
            {"domain": options["domain"], "params": options["params"], "arch": options["arch"],
             "relaxed_opt": options["relaxed_opt"], "relaxed_ao": options["relaxed_ao"], "suite": options["suite"]},
            {"csv": options["out"]},
            clock,
        )
        record_bench_rows(manifest_row, rows)
        self.summarize(rows)

    def run_one(self, domain, task, s0, goal, name, heuristic, limits):
        row = {"task_id": task.task_id, "heuristic": name, "solved": False, "plan_len": None,
               "status": "ok", "sim_success": None}
        try:
            plan = astar(domain, s0, goal, heuristic, limits)
        except LimitExceeded as exc:
            row["status"], stats = "limit", exc.stats
        except Unsolvable as exc:
            row["status"], stats = "unsolvable", exc.stats
        else:
            stats = plan.stats
            row["plan_len"] = len(plan)
            row["sim_success"] = task.plan_succeeds(plan.actions)
            row["solved"] = row["sim_success"] is not False
        row.update(expanded=stats.expanded, generated=stats.generated, wall_ms=round(stats.wall_ms, 3))
        logger.info("%s [%s]: %s, %d expanded", task.task_id, name, row["status"], stats.expanded)
        return row

    @staticmethod
    def flush(rows, path):
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        pd.DataFrame(rows, columns=COLUMNS).to_csv(path, index=False)

    def summarize(self, rows):
        if not rows:
            self.ok("no tasks")
            return
        frame = pd.DataFrame(rows, columns=COLUMNS)
        summary = frame.groupby("heuristic", sort=False).agg(
            success=("solved", "mean"), median_expanded=("expanded", "median"), mean_expanded=("expanded", "mean"),
        )
        for name, r in summary.iterrows():
            self.say(
                f"{name:8s} success={r['success']:.2f} median_expanded={r['median_expanded']:.0f} "
                f"mean_expanded={r['mean_expanded']:.1f}"
            )
        self.ok(f"wrote {len(rows)} rows")
