# Generated by Django 5.0.6 on 2026-10-19 09:12

import django.db.models.deletion
from django.db import migrations, models


class Migration(migrations.Migration):

    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="Experiment",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "manifest_hash",
                    models.CharField(
                        db_index=True,
                        help_text="SHA-256 of the canonical scenario",
                        max_length=64,
                    ),
                ),
                (
                    "scenario_text",
                    models.TextField(help_text="Canonical scenario key-value text"),
                ),
                ("seed", models.IntegerField()),
                ("output_dir", models.CharField(max_length=500)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
            ],
            options={
                "verbose_name": "Experiment",
                "verbose_name_plural": "Experiments",
                "ordering": ["-created_at"],
                "constraints": [
                    models.UniqueConstraint(
                        fields=("manifest_hash", "output_dir"),
                        name="unique_experiment_output",
                    )
                ],
            },
        ),
        migrations.CreateModel(
            name="TrainingRun",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                (
                    "kind",
                    models.CharField(
                        choices=[
                            ("rc", "Region classifier"),
                            ("sr", "SR-DRN"),
                            ("fl", "FL-DRN"),
                            ("sr-nores", "SR-DRN without residual"),
                            ("fl-nores", "FL-DRN without residual"),
                        ],
                        max_length=10,
                    ),
                ),
                (
                    "region",
                    models.IntegerField(
                        blank=True, help_text="1-based region for SR models", null=True
                    ),
                ),
                ("checkpoint_path", models.CharField(max_length=500)),
                ("epochs", models.IntegerField()),
                ("best_metric", models.FloatField(blank=True, null=True)),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "experiment",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="training_runs",
                        to="experiments.experiment",
                    ),
                ),
            ],
            options={
                "verbose_name": "Training Run",
                "verbose_name_plural": "Training Runs",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="EvaluationRecord",
            fields=[
                (
                    "id",
                    models.BigAutoField(
                        auto_created=True,
                        primary_key=True,
                        serialize=False,
                        verbose_name="ID",
                    ),
                ),
                ("estimator", models.CharField(max_length=30)),
                ("snr_db", models.FloatField()),
                ("nmse_mean", models.FloatField()),
                ("nmse_stderr", models.FloatField()),
                ("n_samples", models.IntegerField()),
                ("created_at", models.DateTimeField(auto_now_add=True)),
                (
                    "experiment",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="evaluations",
                        to="experiments.experiment",
                    ),
                ),
            ],
            options={
                "verbose_name": "Evaluation Record",
                "verbose_name_plural": "Evaluation Records",
                "ordering": ["estimator", "snr_db"],
            },
        ),
    ]
