from django.contrib import admin

from apps.experiments.models import EvaluationRecord, Experiment, TrainingRun


@admin.register(Experiment)
class ExperimentAdmin(admin.ModelAdmin):
    list_display = ("manifest_hash", "seed", "output_dir", "created_at")
    search_fields = ("manifest_hash", "output_dir")


@admin.register(TrainingRun)
class TrainingRunAdmin(admin.ModelAdmin):
    list_display = ("kind", "region", "epochs", "best_metric", "experiment")
    list_filter = ("kind",)


@admin.register(EvaluationRecord)
class EvaluationRecordAdmin(admin.ModelAdmin):
    list_display = ("estimator", "snr_db", "nmse_mean", "n_samples", "experiment")
    list_filter = ("estimator",)
