# Generated by Django 5.2.7 on 2026-10-19 10:00

"""
Initial schema for pdsketch_app: run manifests and benchmark results.
"""

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="run_manifest",
            fields=[
                ("manifest_id", models.AutoField(primary_key=True, serialize=False)),
                ("command", models.CharField(max_length=50)),
                ("options", models.JSONField(default=dict)),
                ("seeds", models.JSONField(default=dict)),
                ("inputs", models.JSONField(default=dict)),
                ("outputs", models.JSONField(default=dict)),
                ("artifact_hashes", models.JSONField(default=dict)),
                ("wall_seconds", models.FloatField(default=0.0)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "db_table": "run_manifest",
                "ordering": ["-created_at", "-manifest_id"],
            },
        ),
        migrations.CreateModel(
            name="bench_result",
            fields=[
                ("result_id", models.AutoField(primary_key=True, serialize=False)),
                ("task_id", models.CharField(max_length=50)),
                ("heuristic", models.CharField(max_length=20)),
                ("solved", models.BooleanField(default=False)),
                ("plan_len", models.IntegerField(blank=True, null=True)),
                ("expanded", models.IntegerField(default=0)),
                ("generated", models.IntegerField(default=0)),
                ("wall_ms", models.FloatField(default=0.0)),
                ("status", models.CharField(default="ok", max_length=20)),
                (
                    "manifest_id",
                    models.ForeignKey(
                        db_column="manifest_id",
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="results",
                        to="pdsketch_app.run_manifest",
                    ),
                ),
            ],
            options={
                "db_table": "bench_result",
                "unique_together": {("manifest_id", "task_id", "heuristic")},
            },
        ),
    ]
