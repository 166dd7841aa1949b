"""
Database models for the PDSketch toolkit.

Two tables record what the command-line tools did:

- `run_manifest`: One row per artifact-producing command run (options,
  seeds, input and output paths, sha256 of every artifact, wall time). The
  same content is written to `<artifact>.manifest.json`.
- `bench_result`: One row per (task, heuristic) of a `bench` run, linked to
  the manifest of that run.

Rows are written best-effort by `run_utils`; the file manifests are the
source of truth.
"""

from django.db import models


class run_manifest(models.Model):
    """
    Record of one command run.

    Fields:
        manifest_id (int): Primary key.
        command (str): Management command name, e.g. "train".
        options (dict): Effective options after config merging.
        seeds (dict): Every seed used.
        inputs (dict): Input paths.
        outputs (dict): Output paths.
        artifact_hashes (dict): Output path -> sha256 hex digest.
        wall_seconds (float): Duration of the run.
        created_at (datetime): Insertion time.
    """

    manifest_id = models.AutoField(primary_key=True)
    command = models.CharField(max_length=50)
    options = models.JSONField(default=dict)
    seeds = models.JSONField(default=dict)
    inputs = models.JSONField(default=dict)
    outputs = models.JSONField(default=dict)
    artifact_hashes = models.JSONField(default=dict)
    wall_seconds = models.FloatField(default=0.0)
    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        db_table = "run_manifest"
        ordering = ["-created_at", "-manifest_id"]

    def __str__(self) -> str:
        """Return the command name and creation time."""
        return f"{self.command} @ {self.created_at:%Y-%m-%d %H:%M:%S}"


class bench_result(models.Model):
    """
    Search statistics of one task under one heuristic.

    Fields:
        result_id (int): Primary key.
        manifest_id (FK run_manifest): Bench run this row belongs to.
        task_id (str): Task identifier within the suite.
        heuristic (str): "blind", "hff-opt" or "hff-ao".
        solved (bool): A plan was found within the limits.
        plan_len (int): Plan length (null when unsolved).
        expanded (int): Nodes expanded.
        generated (int): Nodes generated.
        wall_ms (float): Search time in milliseconds.
        status (str): "ok", "limit" or "unsolvable".
    """

    result_id = models.AutoField(primary_key=True)
    manifest_id = models.ForeignKey("run_manifest", on_delete=models.CASCADE, db_column="manifest_id",
                                    related_name="results")
    task_id = models.CharField(max_length=50)
    heuristic = models.CharField(max_length=20)
    solved = models.BooleanField(default=False)
    plan_len = models.IntegerField(blank=True, null=True)
    expanded = models.IntegerField(default=0)
    generated = models.IntegerField(default=0)
    wall_ms = models.FloatField(default=0.0)
    status = models.CharField(max_length=20, default="ok")

    class Meta:
        db_table = "bench_result"
        unique_together = (("manifest_id", "task_id", "heuristic"),)

    def __str__(self) -> str:
        """Return a readable label with task, heuristic and outcome."""
        return f"{self.task_id} [{self.heuristic}] {self.status}"
