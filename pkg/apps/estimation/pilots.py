"""
Pilot transmission and classical channel estimators.

The stacked observation over Q slots is y = A·vec(H) + w with
A = vᵀ ⊗ Φ (shared beamformer) or rows v_qᵀ ⊗ θ_q (per-slot beamformers).
vec is column-major, so column m·(N+1)+n of A multiplies H[n, m].
"""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from apps.physics.channel import ChannelRealization, vec
from apps.utils.exceptions import DimensionError, EstimationError

logger = logging.getLogger(__name__)

# Gram matrices above this condition number are treated as singular
SINGULAR_CONDITION = 1e12

SHARED = "shared"
PER_SLOT = "per-slot"
SENSING_MODES = (SHARED, PER_SLOT)


def dft_phase_matrix(n_slots: int, irs_size: int) -> np.ndarray:
    """Φ (Q×(N+1)) with Φᵀ[n, q] = exp(j2π·n·q/Q)."""
    if n_slots < 1 or irs_size < 0:
        raise DimensionError(f"need Q >= 1 and N >= 0, got Q={n_slots}, N={irs_size}")
    q = np.arange(n_slots)[:, np.newaxis]
    n = np.arange(irs_size + 1)[np.newaxis, :]
    return np.exp(2j * np.pi * q * n / n_slots)


def random_beamformer(bs_size: int, rng: np.random.Generator) -> np.ndarray:
    if bs_size < 1:
        raise DimensionError(f"need M >= 1, got {bs_size}")
    return rng.choice(np.array([-1.0, 1.0]), size=bs_size) / math.sqrt(bs_size)


def sensing_matrix(beamformer: np.ndarray, phase_matrix: np.ndarray) -> np.ndarray:
    """A = vᵀ ⊗ Φ."""
    return np.kron(np.asarray(beamformer)[np.newaxis, :], phase_matrix)


def slot_sensing_matrix(
    beamformers: np.ndarray, phase_matrix: np.ndarray
) -> np.ndarray:
    """Row q = v_qᵀ ⊗ θ_q for per-slot beamformers (Q×M)."""
    if beamformers.shape[0] != phase_matrix.shape[0]:
        raise DimensionError(
            f"{beamformers.shape[0]} beamformers for {phase_matrix.shape[0]} slots"
        )
    rows = beamformers[:, :, np.newaxis] * phase_matrix[:, np.newaxis, :]
    return rows.reshape(phase_matrix.shape[0], -1)


def per_slot_beamformers(
    bs_size: int,
    phase_matrix: np.ndarray,
    rng: np.random.Generator,
    max_draws: int = 32,
) -> np.ndarray:
    """Random ±1/√M beamformers per slot, redrawn until A has full rank."""
    n_slots, irs_rows = phase_matrix.shape
    target = min(n_slots, bs_size * irs_rows)
    for draw in range(max_draws):
        beamformers = np.stack(
            [random_beamformer(bs_size, rng) for _ in range(n_slots)]
        )
        rank = np.linalg.matrix_rank(slot_sensing_matrix(beamformers, phase_matrix))
        if rank == target:
            return beamformers
        logger.debug(f"per-slot draw {draw}: rank {rank} < {target}, redrawing")
    raise EstimationError(
        f"no full-rank per-slot design found in {max_draws} draws "
        f"(Q={n_slots}, M={bs_size}, N+1={irs_rows})"
    )


@dataclass(frozen=True, eq=False)
class PilotConfig:
    n_slots: int
    phase_matrix: np.ndarray
    beamformer: np.ndarray
    noise_var: float = 0.0
    pilot_symbol: complex = 1.0

    def __post_init__(self):
        if self.phase_matrix.shape[0] != self.n_slots:
            raise DimensionError(
                f"Φ has {self.phase_matrix.shape[0]} rows for Q={self.n_slots}"
            )
        if not np.allclose(np.abs(self.phase_matrix), 1.0, atol=1e-12):
            raise EstimationError("Φ entries must have unit modulus")
        if not np.allclose(self.phase_matrix[:, 0], 1.0, atol=1e-12):
            raise EstimationError("Φ column 0 must be all ones")
        v = np.atleast_2d(self.beamformer)
        if self.per_slot and v.shape[0] != self.n_slots:
            raise DimensionError(
                f"{v.shape[0]} per-slot beamformers for Q={self.n_slots}"
            )
        if not np.allclose(np.abs(v), 1.0 / math.sqrt(v.shape[1]), atol=1e-12):
            raise EstimationError("beamformer entries must be ±1/√M")
        if not (math.isfinite(self.noise_var) and self.noise_var >= 0):
            raise EstimationError(f"noise variance must be >= 0, got {self.noise_var}")

    @property
    def per_slot(self) -> bool:
        return np.ndim(self.beamformer) == 2

    @property
    def bs_size(self) -> int:
        return int(np.shape(self.beamformer)[-1])

    @property
    def irs_size(self) -> int:
        return self.phase_matrix.shape[1] - 1

    @property
    def label_size(self) -> int:
        return self.bs_size * (self.irs_size + 1)

    @property
    def sensing_mode(self) -> str:
        return PER_SLOT if self.per_slot else SHARED

    def sensing_matrix(self) -> np.ndarray:
        if self.per_slot:
            A = slot_sensing_matrix(self.beamformer, self.phase_matrix)
        else:
            A = sensing_matrix(self.beamformer, self.phase_matrix)
        return self.pilot_symbol * A

    def with_noise(self, noise_var: float) -> PilotConfig:
        return dataclasses.replace(self, noise_var=noise_var)


def build_pilot(
    n_slots: int,
    bs_size: int,
    irs_size: int,
    rng: np.random.Generator,
    sensing: str = SHARED,
) -> PilotConfig:
    """DFT phases plus random beamformer(s) drawn from ``rng``."""
    phase_matrix = dft_phase_matrix(n_slots, irs_size)
    if sensing == SHARED:
        beamformer = random_beamformer(bs_size, rng)
    elif sensing == PER_SLOT:
        beamformer = per_slot_beamformers(bs_size, phase_matrix, rng)
    else:
        raise EstimationError(f"unknown sensing mode {sensing!r}")
    return PilotConfig(n_slots, phase_matrix, beamformer)


@dataclass(frozen=True, eq=False)
class Measurement:
    y: np.ndarray
    truth: np.ndarray
    snr_db: float


def _as_vector(channel: ChannelRealization | np.ndarray) -> np.ndarray:
    if isinstance(channel, ChannelRealization):
        return channel.h_vec
    channel = np.asarray(channel)
    return vec(channel) if channel.ndim == 2 else channel


def signal_power(A: np.ndarray, truths: np.ndarray) -> float:
    """Average ‖A·h‖²/Q over the rows of ``truths``."""
    received = np.atleast_2d(truths) @ A.T
    return float(np.mean(np.sum(np.abs(received) ** 2, axis=1)) / A.shape[0])


def noise_var_for_snr(power: float, snr_db: float) -> float:
    if math.isinf(snr_db) and snr_db > 0:
        return 0.0
    return power / 10.0 ** (snr_db / 10.0)


def complex_noise(
    rng: np.random.Generator, noise_var: float, shape: int | tuple[int, ...]
) -> np.ndarray:
    """Circular Gaussian noise, total variance ``noise_var`` per entry."""
    draws = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    return math.sqrt(noise_var / 2.0) * draws


def simulate_pilot(
    channel: ChannelRealization | np.ndarray,
    pilot: PilotConfig,
    rng: np.random.Generator,
    snr_db: float = math.nan,
) -> Measurement:
    if pilot.noise_var < 0:
        raise EstimationError(f"noise variance must be >= 0, got {pilot.noise_var}")
    h_vec = _as_vector(channel)
    A = pilot.sensing_matrix()
    if len(h_vec) != A.shape[1]:
        raise DimensionError(
            f"channel of length {len(h_vec)} does not fit A with {A.shape[1]} columns"
        )
    y = A @ h_vec + complex_noise(rng, pilot.noise_var, pilot.n_slots)
    return Measurement(y=y, truth=h_vec, snr_db=snr_db)


@dataclass(frozen=True, eq=False)
class LsOperator:
    matrix: np.ndarray
    regularized: bool
    rank: int

    def apply(self, y: np.ndarray) -> np.ndarray:
        """Estimates for one observation (Q,) or a batch (S, Q)."""
        return np.asarray(y) @ self.matrix.T


def ls_operator(A: np.ndarray) -> LsOperator:
    """Aᴴ(AAᴴ)⁻¹ when AAᴴ is well conditioned, SVD pseudoinverse otherwise."""
    gram = A @ A.conj().T
    if np.linalg.cond(gram) < SINGULAR_CONDITION:
        matrix = scipy.linalg.solve(gram, A, assume_a="her").conj().T
        return LsOperator(matrix, regularized=False, rank=A.shape[0])
    pinv, rank = scipy.linalg.pinv(A, return_rank=True)
    logger.warning(
        f"⚠️ AAᴴ singular (rank {rank} < {A.shape[0]}), LS uses the pseudoinverse"
    )
    return LsOperator(pinv, regularized=True, rank=int(rank))


@dataclass(frozen=True, eq=False)
class LsSolution:
    estimate: np.ndarray
    regularized: bool


def ls_estimate(A: np.ndarray, y: np.ndarray) -> LsSolution:
    if A.shape[0] != np.shape(y)[-1]:
        raise DimensionError(f"A has {A.shape[0]} rows, y has {np.shape(y)[-1]}")
    operator = ls_operator(A)
    return LsSolution(operator.apply(y), operator.regularized)


def ls_mse_closed_form(A: np.ndarray, noise_var: float) -> float:
    """σ²·tr((AAᴴ)⁻ᴴ)."""
    gram = A @ A.conj().T
    if np.linalg.cond(gram) >= SINGULAR_CONDITION:
        raise EstimationError("AAᴴ is singular; closed-form LS MSE undefined")
    return float(noise_var * np.real(np.trace(np.linalg.inv(gram).conj().T)))


@dataclass(frozen=True)
class ErrorSplit:
    noise_error: float
    null_space_error: float

    @property
    def total(self) -> float:
        return self.noise_error + self.null_space_error


def ls_error_split(
    A: np.ndarray, estimate: np.ndarray, truth: np.ndarray
) -> ErrorSplit:
    """Separate LS error into the row-space (noise) and null-space parts."""
    projector = scipy.linalg.pinv(A) @ A
    projected = projector @ truth
    return ErrorSplit(
        noise_error=float(np.sum(np.abs(estimate - projected) ** 2)),
        null_space_error=float(np.sum(np.abs(truth - projected) ** 2)),
    )


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    estimate: np.ndarray
    method: str
    nmse: float
    split: ErrorSplit | None = None


@dataclass(frozen=True, eq=False)
class MmseWeight:
    W: np.ndarray
    undersampled: bool = False
    jittered: bool = False

    def apply(self, ls_estimates: np.ndarray) -> np.ndarray:
        return np.asarray(ls_estimates) @ self.W.T


def mmse_weight(
    ls_estimates: np.ndarray,
    truths: np.ndarray,
    noise_var: float,
    signal_var: float = 1.0,
) -> MmseWeight:
    """W = R_hĥ·(R_ĥĥ + σ²/σx²·I)⁻¹ from sample correlations over rows."""
    ls_estimates = np.atleast_2d(ls_estimates)
    truths = np.atleast_2d(truths)
    if ls_estimates.shape != truths.shape:
        raise DimensionError(
            f"estimates {ls_estimates.shape} and truths {truths.shape} differ"
        )
    n_samples, dim = truths.shape
    undersampled = n_samples < dim
    if undersampled:
        logger.warning(
            f"MMSE correlations from {n_samples} samples for dimension {dim}"
        )
    cross = truths.T @ ls_estimates.conj() / n_samples
    auto = ls_estimates.T @ ls_estimates.conj() / n_samples
    regularized = auto + (noise_var / signal_var) * np.eye(dim)
    jittered = False
    if np.linalg.cond(regularized) >= SINGULAR_CONDITION:
        scale = max(float(np.real(np.trace(regularized))) / dim, 1e-300)
        regularized = regularized + 1e-10 * scale * np.eye(dim)
        jittered = True
        logger.warning("MMSE correlation matrix ill-conditioned, added ridge jitter")
    W = scipy.linalg.solve(regularized.T, cross.T).T
    return MmseWeight(W, undersampled=undersampled, jittered=jittered)


def crlb(bs_size: int, irs_size: int, n_slots: int, noise_var: float) -> float:
    """Closed-form reference 2σ²·M·(N+1)/Q."""
    if n_slots < 1:
        raise EstimationError(f"need Q >= 1, got {n_slots}")
    return 2.0 * noise_var * bs_size * (irs_size + 1) / n_slots


def nmse(estimate: np.ndarray, truth: np.ndarray) -> float:
    estimate = np.asarray(estimate)
    truth = np.asarray(truth)
    if estimate.shape != truth.shape:
        raise DimensionError(f"estimate {estimate.shape} vs truth {truth.shape}")
    power = float(np.sum(np.abs(truth) ** 2))
    if power == 0.0:
        raise EstimationError("NMSE undefined for a zero-norm truth")
    return float(np.sum(np.abs(estimate - truth) ** 2)) / power


def nmse_per_sample(estimates: np.ndarray, truths: np.ndarray) -> np.ndarray:
    if estimates.shape != truths.shape:
        raise DimensionError(f"estimates {estimates.shape} vs truths {truths.shape}")
    power = np.sum(np.abs(truths) ** 2, axis=1)
    if np.any(power == 0.0):
        raise EstimationError("NMSE undefined for a zero-norm truth")
    return np.sum(np.abs(estimates - truths) ** 2, axis=1) / power
