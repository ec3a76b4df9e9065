"""
Exception hierarchy shared by all NFCE-lab apps.

Management commands map every ``NfceError`` to a user error (exit code 1);
anything else escaping a command is reported as an internal error.
"""

from __future__ import annotations

from typing import Any


class NfceError(Exception):
    """Base class for all expected, user-reportable failures."""


class GeometryError(NfceError, ValueError):
    """Invalid array configuration or coordinate."""


class ElementIndexError(GeometryError, IndexError):
    """Element index outside the array."""


class TaylorValidityError(GeometryError):
    """Range too small for the second-order distance expansion."""


class DimensionError(NfceError, ValueError):
    """Shape or length mismatch between operands."""


class EstimationError(NfceError, ValueError):
    """An estimator or metric cannot be evaluated on its inputs."""


class ScenarioError(NfceError, ValueError):
    """Scenario file parse or validation failure."""

    def __init__(self, message: str, diagnostics: dict[str, Any] | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DatasetError(NfceError):
    """Dataset generation, splitting or file I/O failure."""


class ChecksumError(DatasetError):
    pass


class FormatVersionError(DatasetError):
    pass


class CheckpointError(NfceError):
    """Unreadable or inconsistent parameter checkpoint."""


class TrainingDivergedError(NfceError):
    """Loss became non-finite during training."""

    def __init__(self, epoch: int, step: int, loss: float):
        super().__init__(
            f"training diverged at epoch {epoch}, step {step} (loss={loss})"
        )
        self.epoch = epoch
        self.step = step
        self.loss = loss


class RoundAbortedError(NfceError):
    """A synchronous federated round is missing client updates."""

    def __init__(self, round_index: int, missing: list[tuple[int, int]]):
        super().__init__(
            f"round {round_index} aborted, missing clients (region, user): {missing}"
        )
        self.round_index = round_index
        self.missing = missing


class RoutingError(NfceError):
    """No estimator available for a predicted region."""


class ArtifactMissingError(NfceError, FileNotFoundError):
    """An upstream pipeline artifact (dataset, checkpoint, result) is absent."""
