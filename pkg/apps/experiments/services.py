"""
Services behind the management commands and Celery tasks.

An experiment lives in one output directory::

    scenario.txt  manifest.json
    datasets/{train,val,test}.nfce
    models/<kind>[_region<r>].nfck (+ .json sidecar)
    reports/curve_<kind>[_region<r>].csv, rounds_<kind>.csv, rc_size_sweep.csv
    results/nmse_vs_snr.csv, rc_accuracy.csv, confusion.csv, nmse_by_region.csv
    report/summary.csv, nmse_vs_snr.png, learning_curves.png
"""

from __future__ import annotations

import json
import logging
import math
import os
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import matplotlib
import matplotlib.pyplot as plt
import numpy as np
import pandas as pd
from django.conf import settings
from django.db import DatabaseError

from apps.estimation.pilots import (
    crlb,
    ls_operator,
    mmse_weight,
    noise_var_for_snr,
    nmse_per_sample,
    signal_power,
)
from apps.experiments import dataset as ds
from apps.experiments.models import (
    EvaluationRecord,
    Experiment,
    TrainingRun,
)
from apps.experiments.scenario import ScenarioConfig
from apps.learning.checkpoint import load_checkpoint, save_checkpoint
from apps.learning.classifier import (
    RoutingReport,
    classify,
    estimate_with_oracle_routing,
    rc_accuracy,
    region_shard,
    route_and_estimate,
    train_rc,
    write_confusion,
)
from apps.learning.federated import (
    make_clients,
    train_fl,
    write_round_reports,
)
from apps.learning.networks import (
    build_drn,
    build_network,
    build_rc,
    estimate_channels,
    pack_labels,
    pack_observations,
    torch_dtype,
)
from apps.learning.training import (
    TensorShard,
    TrainingResult,
    TrainingSchedule,
    train_sr,
    write_reports,
)
from apps.utils.exceptions import (
    ArtifactMissingError,
    EstimationError,
    NfceError,
)
from apps.utils.seeding import numpy_rng

matplotlib.use("Agg")

logger = logging.getLogger(__name__)

RC = "rc"
SR = "sr"
FL = "fl"
SR_NORES = "sr-nores"
FL_NORES = "fl-nores"
TRAIN_KINDS = (RC, SR, FL, SR_NORES, FL_NORES)

ESTIMATOR_NAMES = {
    SR: "SR-DRN",
    FL: "FL-DRN",
    SR_NORES: "SR-DRN-nores",
    FL_NORES: "FL-DRN-nores",
}
ESTIMATORS = ("LS", "MMSE", "CRLB", *ESTIMATOR_NAMES.values())

ROUTING_MODES = ("rc", "oracle")
RESULT_COLUMNS = ["snr_db", "estimator", "nmse_mean", "nmse_stderr", "n_samples"]
HIGH_SNR_DB = 10.0


@dataclass(frozen=True)
class RunLayout:
    root: Path

    @property
    def scenario_path(self) -> Path:
        return self.root / "scenario.txt"

    @property
    def manifest_path(self) -> Path:
        return self.root / "manifest.json"

    def dataset(self, split: str) -> Path:
        return self.root / "datasets" / f"{split}.nfce"

    def checkpoint(self, kind: str, region: int | None = None) -> Path:
        suffix = "" if region is None else f"_region{region + 1}"
        return self.root / "models" / f"{kind}{suffix}.nfck"

    def curve(self, kind: str, region: int | None = None) -> Path:
        suffix = "" if region is None else f"_region{region + 1}"
        return self.root / "reports" / f"curve_{kind}{suffix}.csv"

    def rounds(self, kind: str) -> Path:
        return self.root / "reports" / f"rounds_{kind}.csv"

    @property
    def size_sweep(self) -> Path:
        return self.root / "reports" / "rc_size_sweep.csv"

    def result(self, name: str) -> Path:
        return self.root / "results" / name

    def report(self, name: str) -> Path:
        return self.root / "report" / name

    def require(self, path: Path, what: str, command: str) -> Path:
        if not path.exists():
            raise ArtifactMissingError(
                f"missing {what}: {path} (run `manage.py {command}` first)"
            )
        return path


@dataclass(frozen=True)
class ExperimentManifest:
    scenario_path: str
    seed: int
    snr_grid: tuple[float, ...]
    estimators: tuple[str, ...]
    output_dir: Path
    manifest_hash: str

    def __post_init__(self):
        if not self.estimators:
            raise NfceError("estimator roster must not be empty")
        if not self.snr_grid:
            raise NfceError("SNR grid must not be empty")
        self.output_dir.mkdir(parents=True, exist_ok=True)
        if not os.access(self.output_dir, os.W_OK):
            raise NfceError(f"output directory is not writable: {self.output_dir}")

    def write(self, path: Path) -> Path:
        payload = {
            "scenario_path": self.scenario_path,
            "seed": self.seed,
            "snr_grid_db": [format(v) for v in self.snr_grid],
            "estimators": list(self.estimators),
            "output_dir": str(self.output_dir),
            "manifest_hash": self.manifest_hash,
        }
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
        return path


def write_table(path: Path, frame: pd.DataFrame, manifest_hash: str) -> Path:
    """CSV with a leading ``# manifest_hash=...`` provenance line."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(f"# manifest_hash={manifest_hash}\n")
        frame.to_csv(handle, index=False, float_format="%.10g")
    return path


def read_table(path: Path) -> tuple[pd.DataFrame, str]:
    with path.open(encoding="utf-8") as handle:
        first = handle.readline().strip()
    manifest_hash = first.split("=", 1)[1] if first.startswith("# manifest_") else ""
    return pd.read_csv(path, comment="#"), manifest_hash


def _record_safely(action: str, fn):
    try:
        return fn()
    except DatabaseError as exc:
        logger.warning(f"⚠️ Could not record {action} in the database: {exc}")
        return None


def summarize(estimator: str, snr_db: float, errors: np.ndarray) -> dict:
    errors = np.asarray(errors, dtype=np.float64)
    count = len(errors)
    stderr = float(np.std(errors, ddof=1) / math.sqrt(count)) if count > 1 else 0.0
    return {
        "snr_db": snr_db,
        "estimator": estimator,
        "nmse_mean": float(np.mean(errors)),
        "nmse_stderr": stderr,
        "n_samples": count,
    }


class DatasetService:
    """Generate, split and persist the datasets of one experiment"""

    @staticmethod
    def generate(
        scenario: ScenarioConfig,
        output_dir: str | Path,
        workers: int = 1,
        scenario_path: str = "",
    ) -> dict:
        layout = RunLayout(Path(output_dir))
        manifest = ExperimentManifest(
            scenario_path=scenario_path,
            seed=scenario.seed,
            snr_grid=scenario.snr_grid,
            estimators=ESTIMATORS,
            output_dir=layout.root,
            manifest_hash=scenario.manifest_hash,
        )
        dataset = ds.generate(scenario, workers=workers)
        train, val, test = ds.split(dataset)
        for name, part in (("train", train), ("val", val), ("test", test)):
            ds.save(part, layout.dataset(name))
        layout.scenario_path.write_text(scenario.canonical_text(), encoding="utf-8")
        manifest.write(layout.manifest_path)
        _record_safely("experiment", lambda: Experiment.record(scenario, layout.root))
        logger.info(
            f"✅ Datasets written to {layout.root} "
            f"({len(train)}/{len(val)}/{len(test)} samples)"
        )
        return {
            "manifest_hash": scenario.manifest_hash,
            "train": len(train),
            "val": len(val),
            "test": len(test),
        }

    @staticmethod
    def load_split(layout: RunLayout, split: str) -> ds.RegionDataset:
        path = layout.require(
            layout.dataset(split), f"{split} dataset", "generate_datasets"
        )
        return ds.load(path)


def drn_shard(dataset: ds.RegionDataset, precision: str) -> TensorShard:
    dtype = torch_dtype(precision)
    return TensorShard(
        pack_observations(dataset.observations, dtype),
        pack_labels(dataset.labels, dtype),
    )


def validation_drn_shard(dataset: ds.RegionDataset, precision: str) -> TensorShard:
    """Validation compares against the true channels in either label mode."""
    dtype = torch_dtype(precision)
    return TensorShard(
        pack_observations(dataset.observations, dtype),
        pack_labels(dataset.ground_truth, dtype),
    )


class TrainingService:
    """Train and checkpoint RC, SR and FL models"""

    @staticmethod
    def train(
        kind: str,
        output_dir: str | Path,
        schedule: TrainingSchedule,
        workers: int = 1,
        precision: str | None = None,
    ) -> list[dict]:
        if kind not in TRAIN_KINDS:
            raise NfceError(f"unknown model kind {kind!r}, expected {TRAIN_KINDS}")
        precision = precision or settings.NFCE_PRECISION
        layout = RunLayout(Path(output_dir))
        train = DatasetService.load_split(layout, "train")
        val = DatasetService.load_split(layout, "val")
        if kind == RC:
            return [TrainingService._train_rc(layout, train, val, schedule, precision)]
        if kind in (SR, SR_NORES):
            return [
                TrainingService._train_sr(
                    kind, region, layout, train, val, schedule, precision
                )
                for region in range(train.scenario.n_regions)
            ]
        return [
            TrainingService._train_fl(
                kind, layout, train, val, schedule, workers, precision
            )
        ]

    @staticmethod
    def _finish(
        kind: str,
        region: int | None,
        layout: RunLayout,
        scenario: ScenarioConfig,
        result: TrainingResult,
        schedule: TrainingSchedule,
        metric_name: str,
    ) -> dict:
        metadata = {
            "kind": kind,
            "region": region,
            "manifest_hash": scenario.manifest_hash,
            "epochs": schedule.epochs,
            "batch_size": schedule.batch_size,
            "seed": schedule.seed,
            "best_epoch": result.best_epoch,
            metric_name: result.best_metric,
        }
        path = save_checkpoint(
            layout.checkpoint(kind, region), result.network, metadata
        )
        write_reports(
            layout.curve(kind, region),
            result.reports,
            scenario.manifest_hash,
            metric_name=metric_name,
        )

        def record():
            experiment = Experiment.record(scenario, layout.root)
            best = result.best_metric
            return TrainingRun.objects.create(
                experiment=experiment,
                kind=kind,
                region=None if region is None else region + 1,
                checkpoint_path=str(path),
                epochs=schedule.epochs,
                best_metric=best if math.isfinite(best) else None,
            )

        _record_safely("training run", record)
        return {
            "kind": kind,
            "region": region,
            "checkpoint": str(path),
            metric_name: result.best_metric,
        }

    @staticmethod
    def _train_rc(layout, train, val, schedule, precision) -> dict:
        scenario = train.scenario
        spec = build_rc(scenario.pilot_slots, scenario.n_regions)
        network = build_network(spec, seed=schedule.seed, precision=precision)
        dtype = torch_dtype(precision)
        result = train_rc(
            region_shard(train.observations, train.region_ids, dtype),
            network,
            schedule,
            region_shard(val.observations, val.region_ids, dtype),
        )
        return TrainingService._finish(
            RC, None, layout, scenario, result, schedule, "val_accuracy"
        )

    @staticmethod
    def _train_sr(kind, region, layout, train, val, schedule, precision) -> dict:
        scenario = train.scenario
        spec = build_drn(
            scenario.pilot_slots,
            scenario.cfg_bs.size,
            scenario.cfg_irs.size,
            residual=kind == SR,
        )
        network = build_network(spec, seed=schedule.seed, precision=precision)
        result = train_sr(
            drn_shard(train.region(region), precision),
            network,
            schedule,
            validation_drn_shard(val.region(region), precision),
            region_id=region,
        )
        return TrainingService._finish(
            kind, region, layout, scenario, result, schedule, "val_nmse"
        )

    @staticmethod
    def _train_fl(kind, layout, train, val, schedule, workers, precision) -> dict:
        scenario = train.scenario
        spec = build_drn(
            scenario.pilot_slots,
            scenario.cfg_bs.size,
            scenario.cfg_irs.size,
            residual=kind == FL,
        )
        network = build_network(spec, seed=schedule.seed, precision=precision)
        shards = {
            key: drn_shard(train.client(*key), precision) for key in train.clients()
        }
        result = train_fl(
            make_clients(shards, schedule),
            network,
            schedule,
            validation_drn_shard(val, precision),
            workers=workers,
        )
        write_round_reports(layout.rounds(kind), result.rounds, scenario.manifest_hash)
        return TrainingService._finish(
            kind, None, layout, scenario, result, schedule, "val_nmse"
        )

    @staticmethod
    def rc_size_sweep(
        output_dir: str | Path,
        sizes: Sequence[int],
        schedule: TrainingSchedule,
        precision: str | None = None,
    ) -> pd.DataFrame:
        """RC held-out accuracy against samples per user used for training."""
        precision = precision or settings.NFCE_PRECISION
        dtype = torch_dtype(precision)
        layout = RunLayout(Path(output_dir))
        train = DatasetService.load_split(layout, "train")
        val = DatasetService.load_split(layout, "val")
        test = DatasetService.load_split(layout, "test")
        scenario = train.scenario
        spec = build_rc(scenario.pilot_slots, scenario.n_regions)
        high = test.subset(np.flatnonzero(test.snr_db >= HIGH_SNR_DB))
        rows = []
        for size in sorted(set(sizes)):
            subset = train.head_per_client(size)
            network = build_network(spec, seed=schedule.seed, precision=precision)
            result = train_rc(
                region_shard(subset.observations, subset.region_ids, dtype),
                network,
                schedule,
                region_shard(val.observations, val.region_ids, dtype),
            )
            accuracy = rc_accuracy(
                result.network, region_shard(test.observations, test.region_ids, dtype)
            )
            high_accuracy = math.nan
            if len(high):
                high_accuracy = rc_accuracy(
                    result.network,
                    region_shard(high.observations, high.region_ids, dtype),
                )
            logger.info(f"RC with {size} samples/user: accuracy {accuracy:.3f}")
            rows.append(
                {
                    "samples_per_user": size,
                    "n_train": len(subset),
                    "accuracy": accuracy,
                    "accuracy_high_snr": high_accuracy,
                }
            )
        frame = pd.DataFrame(rows)
        write_table(layout.size_sweep, frame, scenario.manifest_hash)
        return frame


class EvaluationService:
    """NMSE against SNR for every available estimator"""

    @staticmethod
    def _load_models(layout: RunLayout, kind: str, n_regions: int, precision: str):
        if kind in (SR, SR_NORES):
            paths = [layout.checkpoint(kind, r) for r in range(n_regions)]
            if not all(path.exists() for path in paths):
                return None
            return {r: load_checkpoint(p, precision)[0] for r, p in enumerate(paths)}
        path = layout.checkpoint(kind)
        if not path.exists():
            return None
        return load_checkpoint(path, precision)[0]

    @staticmethod
    def evaluate(
        output_dir: str | Path,
        snr_grid: Sequence[float] | None = None,
        routing: str = "rc",
        precision: str | None = None,
    ) -> pd.DataFrame:
        if routing not in ROUTING_MODES:
            raise NfceError(f"unknown routing {routing!r}, expected {ROUTING_MODES}")
        precision = precision or settings.NFCE_PRECISION
        layout = RunLayout(Path(output_dir))
        train = DatasetService.load_split(layout, "train")
        test = DatasetService.load_split(layout, "test")
        scenario = test.scenario
        grid = tuple(scenario.snr_grid if snr_grid is None else snr_grid)
        if not grid:
            raise EstimationError("SNR grid must not be empty")

        n_regions = scenario.n_regions
        learned = {
            kind: EvaluationService._load_models(layout, kind, n_regions, precision)
            for kind in ESTIMATOR_NAMES
        }
        learned = {k: models for k, models in learned.items() if models is not None}
        rc = None
        rc_path = layout.checkpoint(RC)
        routed_kinds = [kind for kind in (SR, SR_NORES) if kind in learned]
        if n_regions > 1 and routing == "rc" and routed_kinds:
            layout.require(rc_path, "region classifier", "train_estimator rc")
        if n_regions > 1 and rc_path.exists():
            rc = load_checkpoint(rc_path, precision)[0]

        manifest = ExperimentManifest(
            scenario_path=str(layout.scenario_path),
            seed=scenario.seed,
            snr_grid=grid,
            estimators=("LS", "MMSE", "CRLB", *(ESTIMATOR_NAMES[k] for k in learned)),
            output_dir=layout.root,
            manifest_hash=scenario.manifest_hash,
        )

        M, N = scenario.cfg_bs.size, scenario.cfg_irs.size
        pilot_learned = ds.scenario_pilot(scenario, scenario.pilot_slots)
        pilot_classical = ds.scenario_pilot(scenario, scenario.classical_pilot_slots)
        A_classical = pilot_classical.sensing_matrix()
        ls = ls_operator(A_classical)
        truths, train_truths = test.ground_truth, train.ground_truth
        power_learned = signal_power(pilot_learned.sensing_matrix(), train_truths)
        power_classical = signal_power(A_classical, train_truths)
        mean_power = float(np.mean(np.sum(np.abs(truths) ** 2, axis=1)))

        rows, accuracy_rows, cross_rows = [], [], []
        confusions = {}
        for index, snr_db in enumerate(grid):
            rng = numpy_rng(scenario.seed, "eval", index)
            snr = np.full(len(test), snr_db)
            y_learned = ds.observe(pilot_learned, truths, snr, rng, power_learned)
            y_classical = ds.observe(pilot_classical, truths, snr, rng, power_classical)
            noise_var = noise_var_for_snr(power_classical, snr_db)

            ls_estimates = ls.apply(y_classical)
            rows.append(summarize("LS", snr_db, nmse_per_sample(ls_estimates, truths)))

            train_obs = ds.observe(
                pilot_classical,
                train_truths,
                np.full(len(train), snr_db),
                numpy_rng(scenario.seed, "eval-train", index),
                power_classical,
            )
            weight = mmse_weight(ls.apply(train_obs), train_truths, noise_var)
            rows.append(
                summarize(
                    "MMSE",
                    snr_db,
                    nmse_per_sample(weight.apply(ls_estimates), truths),
                )
            )
            bound = crlb(M, N, scenario.classical_pilot_slots, noise_var) / mean_power
            rows.append(summarize("CRLB", snr_db, np.full(len(test), bound)))

            if rc is not None:
                predicted = classify(rc, y_learned).region_ids
                report = RoutingReport.from_predictions(
                    test.region_ids, predicted, n_regions
                )
                confusions[snr_db] = report
                accuracy_rows.append(
                    {
                        "snr_db": snr_db,
                        "accuracy": report.accuracy,
                        "n_samples": len(test),
                    }
                )

            for kind, models in learned.items():
                if kind in (SR, SR_NORES):
                    if routing == "oracle":
                        routed = estimate_with_oracle_routing(
                            models, y_learned, test.region_ids
                        )
                    else:
                        routed = route_and_estimate(rc, models, y_learned)
                    estimates = routed.estimates
                    if kind == SR:
                        cross_rows += EvaluationService._cross_region(
                            models, y_learned, truths, test.region_ids, snr_db
                        )
                else:
                    estimates = estimate_channels(models, y_learned)
                rows.append(
                    summarize(
                        ESTIMATOR_NAMES[kind],
                        snr_db,
                        nmse_per_sample(estimates, truths),
                    )
                )
            logger.info(f"Evaluated SNR {snr_db:g} dB on {len(test)} samples")

        frame = pd.DataFrame(rows, columns=RESULT_COLUMNS)
        write_table(layout.result("nmse_vs_snr.csv"), frame, manifest.manifest_hash)
        if accuracy_rows:
            write_table(
                layout.result("rc_accuracy.csv"),
                pd.DataFrame(accuracy_rows),
                manifest.manifest_hash,
            )
            write_confusion(
                layout.result("confusion.csv"), confusions, manifest.manifest_hash
            )
        if cross_rows:
            write_table(
                layout.result("nmse_by_region.csv"),
                pd.DataFrame(cross_rows),
                manifest.manifest_hash,
            )
        _record_safely(
            "evaluation", lambda: EvaluationService._record(scenario, layout, frame)
        )
        return frame

    @staticmethod
    def _cross_region(models, observations, truths, region_ids, snr_db) -> list[dict]:
        rows = []
        for model_region, network in sorted(models.items()):
            for data_region in sorted(np.unique(region_ids).tolist()):
                mask = region_ids == data_region
                errors = nmse_per_sample(
                    estimate_channels(network, observations[mask]), truths[mask]
                )
                row = summarize(ESTIMATOR_NAMES[SR], snr_db, errors)
                row["model_region"] = model_region + 1
                row["data_region"] = data_region + 1
                rows.append(row)
        return rows

    @staticmethod
    def _record(scenario, layout, frame: pd.DataFrame) -> None:
        experiment = Experiment.record(scenario, layout.root)
        EvaluationRecord.objects.filter(experiment=experiment).delete()
        EvaluationRecord.objects.bulk_create(
            [
                EvaluationRecord(
                    experiment=experiment,
                    estimator=row.estimator,
                    snr_db=row.snr_db,
                    nmse_mean=row.nmse_mean,
                    nmse_stderr=row.nmse_stderr,
                    n_samples=row.n_samples,
                )
                for row in frame.itertuples()
            ]
        )


class ReportService:
    """Merged tables and static figures from the result files"""

    @staticmethod
    def build(output_dir: str | Path) -> dict:
        layout = RunLayout(Path(output_dir))
        path = layout.require(
            layout.result("nmse_vs_snr.csv"), "NMSE results", "evaluate_estimators"
        )
        results, manifest_hash = read_table(path)
        summary = results.pivot_table(
            index="snr_db", columns="estimator", values="nmse_mean", sort=True
        )
        summary = summary[[e for e in ESTIMATORS if e in summary.columns]]
        accuracy = None
        accuracy_path = layout.result("rc_accuracy.csv")
        if accuracy_path.exists():
            accuracy, _ = read_table(accuracy_path)
            summary = summary.join(
                accuracy.set_index("snr_db")["accuracy"].rename("RC accuracy")
            )
        write_table(layout.report("summary.csv"), summary.reset_index(), manifest_hash)

        metadata = {"Description": f"manifest_hash={manifest_hash}"}
        figures = [ReportService._plot_nmse(layout, results, accuracy, metadata)]
        curves = sorted((layout.root / "reports").glob("curve_*.csv"))
        if curves:
            figures.append(ReportService._plot_curves(layout, curves, metadata))
        if layout.size_sweep.exists():
            figures.append(ReportService._plot_size_sweep(layout, metadata))
        logger.info(f"📈 Report written to {layout.report('')}")
        return {
            "manifest_hash": manifest_hash,
            "summary": str(layout.report("summary.csv")),
            "figures": [str(f) for f in figures],
        }

    @staticmethod
    def _save(fig, path: Path, metadata: dict) -> Path:
        path.parent.mkdir(parents=True, exist_ok=True)
        fig.tight_layout()
        fig.savefig(path, dpi=150, metadata=metadata)
        plt.close(fig)
        return path

    @staticmethod
    def _plot_nmse(layout, results, accuracy, metadata) -> Path:
        results = results[np.isfinite(results["snr_db"])]
        ncols = 2 if accuracy is not None else 1
        fig, axes = plt.subplots(1, ncols, figsize=(6 * ncols, 4.5), squeeze=False)
        ax = axes[0, 0]
        for estimator in [e for e in ESTIMATORS if e in set(results["estimator"])]:
            rows = results[results["estimator"] == estimator].sort_values("snr_db")
            style = "--" if estimator == "CRLB" else "-"
            ax.semilogy(
                rows["snr_db"], rows["nmse_mean"], style, marker="o", label=estimator
            )
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("NMSE")
        ax.set_title("NMSE over the whole region")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend()
        if accuracy is not None:
            accuracy = accuracy[np.isfinite(accuracy["snr_db"])].sort_values("snr_db")
            ax = axes[0, 1]
            ax.plot(accuracy["snr_db"], accuracy["accuracy"], marker="s")
            ax.set_xlabel("SNR (dB)")
            ax.set_ylabel("Accuracy")
            ax.set_ylim(0, 1.05)
            ax.set_title("Region classifier")
            ax.grid(True, alpha=0.3)
        return ReportService._save(fig, layout.report("nmse_vs_snr.png"), metadata)

    @staticmethod
    def _plot_curves(layout, curves: list[Path], metadata) -> Path:
        fig, ax = plt.subplots(figsize=(7, 4.5))
        for path in curves:
            frame, _ = read_table(path)
            ax.semilogy(
                frame["epoch"],
                frame["train_loss"],
                label=path.stem.removeprefix("curve_"),
            )
        ax.set_xlabel("Epoch")
        ax.set_ylabel("Training loss")
        ax.grid(True, which="both", alpha=0.3)
        ax.legend(fontsize="small")
        return ReportService._save(fig, layout.report("learning_curves.png"), metadata)

    @staticmethod
    def _plot_size_sweep(layout, metadata) -> Path:
        frame, _ = read_table(layout.size_sweep)
        fig, ax = plt.subplots(figsize=(6, 4.5))
        ax.plot(frame["samples_per_user"], frame["accuracy"], marker="o", label="all")
        if "accuracy_high_snr" in frame:
            ax.plot(
                frame["samples_per_user"],
                frame["accuracy_high_snr"],
                marker="s",
                label=f"SNR ≥ {HIGH_SNR_DB:g} dB",
            )
        ax.set_xlabel("Training samples per user")
        ax.set_ylabel("Accuracy")
        ax.grid(True, alpha=0.3)
        ax.legend()
        return ReportService._save(fig, layout.report("rc_size_sweep.png"), metadata)
