"""
Train the slot networks of a domain on a demonstration dataset.

Writes the parameter file, its architecture companion
(`<params>.arch.json`), a per-epoch metrics CSV and the run manifest.

Typical usage:
    python manage.py train --domain pdsketch_app/domains/babyai_abs.pds \
        --dataset data/train.jsonl --out runs/abs.params --epochs 20
    python manage.py train ... --resume runs/abs.params --out runs/abs2.params
"""

from ...neural_slots import arch_for, arch_from_settings, instantiate, load_arch_file, load_into, save, save_arch
from ...pds_validation import load_domain_file
from ...run_utils import RunClock, write_manifest
from ...trainer import evaluate, load_dataset, split_dataset, train, write_metrics
from ..base import PDSketchCommand


class Command(PDSketchCommand):
    help = "Train slot parameters on a dataset."

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument("--domain", required=True)
        parser.add_argument("--dataset", required=True)
        parser.add_argument("--out", required=True, help="parameter file to write")
        parser.add_argument("--metrics", help="metrics CSV (default: <out>.metrics.csv)")
        parser.add_argument("--arch", help="key-value architecture file")
        parser.add_argument("--resume", help="parameter file to continue from")
        parser.add_argument("--epochs", type=int, default=None)
        parser.add_argument("--lr", type=float, default=None)
        parser.add_argument("--batch-size", type=int, default=None)
        parser.add_argument("--optimizer", choices=("adam", "sgd"), default=None)
        parser.add_argument("--lambda-goal", type=float, default=None)
        parser.add_argument("--lambda-trans", type=float, default=None)
        parser.add_argument("--lambda-look", type=float, default=None)
        parser.add_argument("--holdout", type=float, default=None)

    def run(self, **options):
        clock = RunClock()
        seed = self.seed(options)
        cfg = self.section(
            "TRAIN",
            epochs=options["epochs"], lr=options["lr"], batch_size=options["batch_size"],
            optimizer=options["optimizer"], lambda_goal=options["lambda_goal"],
            lambda_trans=options["lambda_trans"], lambda_look=options["lambda_look"],
            holdout=options["holdout"],
        )

        domain = load_domain_file(options["domain"])
        if options["resume"]:
            arch = arch_for(options["resume"], options["arch"])
            params = load_into(domain, options["resume"], arch)
        else:
            arch = arch_from_settings(self.file_config.get("ARCH"))
            if options["arch"]:
                arch = load_arch_file(options["arch"], base=arch)
            params = instantiate(domain, arch, seed)

        episodes = load_dataset(options["dataset"], domain)
        train_set, held_out = split_dataset(episodes, cfg["holdout"], seed)
        self.say(f"{len(train_set)} training episodes, {len(held_out)} held out")

        history = train(domain, params, train_set, cfg, seed)
        save(params, options["out"])
        save_arch(arch, options["out"])
        metrics = options["metrics"] or f"{options['out']}.metrics.csv"
        write_metrics(history, metrics)

        if history:
            last = history[-1]
            self.say(f"final epoch: loss={last['loss']:.4f} goal_acc={last['goal_acc']:.3f} trans_l1={last['trans_l1']:.4f}")
        if held_out:
            held = evaluate(domain, params, held_out, cfg)
            self.say(f"held out: loss={held['loss']:.4f} goal_acc={held['goal_acc']:.3f}")

        write_manifest(
            options["out"], "train",
            {"train": cfg, "arch": arch.to_json(), "resume": options["resume"]},
            {"seed": seed},
            {"domain": options["domain"], "dataset": options["dataset"], "resume": options["resume"],
             "arch": options["arch"]},
            {"params": options["out"], "arch_json": f"{options['out']}.arch.json", "metrics": metrics},
            clock,
        )
        self.ok(f"saved parameters to {options['out']}")
