"""
Bookkeeping of experiment runs.

The files under an experiment's output directory are the source of truth;
these rows index what was produced and when.
"""

from django.db import models


class Experiment(models.Model):
    """One scenario (with its seed) materialized in an output directory"""

    manifest_hash = models.CharField(
        max_length=64, db_index=True, help_text="SHA-256 of the canonical scenario"
    )
    scenario_text = models.TextField(help_text="Canonical scenario key-value text")
    seed = models.IntegerField()
    output_dir = models.CharField(max_length=500)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "Experiment"
        verbose_name_plural = "Experiments"
        ordering = ["-created_at"]
        constraints = [
            models.UniqueConstraint(
                fields=["manifest_hash", "output_dir"], name="unique_experiment_output"
            )
        ]

    def __str__(self):
        return f"{self.manifest_hash[:12]} (seed {self.seed})"

    @staticmethod
    def record(scenario, output_dir) -> "Experiment":
        experiment, _ = Experiment.objects.get_or_create(
            manifest_hash=scenario.manifest_hash,
            output_dir=str(output_dir),
            defaults={
                "scenario_text": scenario.canonical_text(),
                "seed": scenario.seed,
            },
        )
        return experiment


class TrainingRun(models.Model):
    KIND_CHOICES = [
        ("rc", "Region classifier"),
        ("sr", "SR-DRN"),
        ("fl", "FL-DRN"),
        ("sr-nores", "SR-DRN without residual"),
        ("fl-nores", "FL-DRN without residual"),
    ]

    experiment = models.ForeignKey(
        Experiment, on_delete=models.CASCADE, related_name="training_runs"
    )
    kind = models.CharField(max_length=10, choices=KIND_CHOICES)
    region = models.IntegerField(
        null=True, blank=True, help_text="1-based region for SR models"
    )
    checkpoint_path = models.CharField(max_length=500)
    epochs = models.IntegerField()
    best_metric = models.FloatField(null=True, blank=True)

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "Training Run"
        verbose_name_plural = "Training Runs"
        ordering = ["-created_at"]

    def __str__(self):
        suffix = f" region {self.region}" if self.region else ""
        return f"{self.kind}{suffix} ({self.epochs} epochs)"


class EvaluationRecord(models.Model):
    experiment = models.ForeignKey(
        Experiment, on_delete=models.CASCADE, related_name="evaluations"
    )
    estimator = models.CharField(max_length=30)
    snr_db = models.FloatField()
    nmse_mean = models.FloatField()
    nmse_stderr = models.FloatField()
    n_samples = models.IntegerField()

    created_at = models.DateTimeField(auto_now_add=True)

    class Meta:
        verbose_name = "Evaluation Record"
        verbose_name_plural = "Evaluation Records"
        ordering = ["estimator", "snr_db"]

    def __str__(self):
        return f"{self.estimator} @ {self.snr_db:g} dB: {self.nmse_mean:.3e}"
