"""
Synthetic datasets of (observation, label) pairs per region and user.

Every user draws from its own random stream, so the dataset does not depend
on the number of worker threads. Observations and labels share one
``Scaler`` that brings the average label power to one.

File layout (little endian)::

    "NFCE" | u32 version | u32 flags | u32 n | n bytes scenario text | f8 scale
    u64 count | u32 Q | u32 D | count records | u32 CRC-32 of everything before

A record holds the observation and label (and, with flag bit 0, the true
channel) as interleaved re/im f8 values, then region u32, user u32, snr f8.
"""

from __future__ import annotations

import logging
import math
import struct
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.model_selection import train_test_split

from apps.estimation.pilots import (
    PER_SLOT,
    PilotConfig,
    build_pilot,
    complex_noise,
    ls_operator,
    noise_var_for_snr,
    signal_power,
)
from apps.experiments.scenario import LS_LABELS, ScenarioConfig, parse_scenario
from apps.physics.channel import (
    bs_irs_channel,
    bs_user_channel,
    cascade,
    irs_user_channel,
    sample_link,
    sample_user_geometry,
)
from apps.utils.exceptions import (
    ChecksumError,
    DatasetError,
    DimensionError,
    FormatVersionError,
)
from apps.utils.seeding import numpy_rng

logger = logging.getLogger(__name__)

MAGIC = b"NFCE"
VERSION = 1
HAS_TRUTH = 0x1

DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)


@dataclass(frozen=True)
class Scaler:
    scale: float

    def __post_init__(self):
        if not (math.isfinite(self.scale) and self.scale > 0):
            raise DatasetError(f"scale must be positive and finite, got {self.scale}")

    @classmethod
    def fit(cls, labels: np.ndarray) -> Scaler:
        power = float(np.mean(np.sum(np.abs(np.atleast_2d(labels)) ** 2, axis=1)))
        if power <= 0:
            raise DatasetError("cannot normalize labels with zero average power")
        return cls(1.0 / math.sqrt(power))

    def normalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) * self.scale

    def denormalize(self, values: np.ndarray) -> np.ndarray:
        return np.asarray(values) / self.scale


@dataclass(frozen=True, eq=False)
class RegionDataset:
    scenario: ScenarioConfig
    observations: np.ndarray
    labels: np.ndarray
    region_ids: np.ndarray
    user_ids: np.ndarray
    snr_db: np.ndarray
    scaler: Scaler
    truths: np.ndarray | None = None

    def __post_init__(self):
        count = len(self.observations)
        for name in ("labels", "region_ids", "user_ids", "snr_db"):
            if len(getattr(self, name)) != count:
                raise DimensionError(
                    f"{name} has {len(getattr(self, name))} rows for {count} samples"
                )
        if self.truths is not None and self.truths.shape != self.labels.shape:
            raise DimensionError(
                f"truths {self.truths.shape} do not match labels {self.labels.shape}"
            )
        if count and self.labels.shape[1] != self.scenario.label_size:
            raise DimensionError(
                f"labels of length {self.labels.shape[1]}, "
                f"scenario expects {self.scenario.label_size}"
            )

    def __len__(self) -> int:
        return len(self.observations)

    @property
    def n_slots(self) -> int:
        return self.observations.shape[1]

    @property
    def ground_truth(self) -> np.ndarray:
        """True normalized channels, whatever the label mode."""
        return self.labels if self.truths is None else self.truths

    def subset(self, indices: np.ndarray) -> RegionDataset:
        indices = np.asarray(indices, dtype=np.int64)
        return RegionDataset(
            scenario=self.scenario,
            observations=self.observations[indices],
            labels=self.labels[indices],
            region_ids=self.region_ids[indices],
            user_ids=self.user_ids[indices],
            snr_db=self.snr_db[indices],
            scaler=self.scaler,
            truths=None if self.truths is None else self.truths[indices],
        )

    def region(self, region_id: int) -> RegionDataset:
        return self.subset(np.flatnonzero(self.region_ids == region_id))

    def client(self, region_id: int, user_id: int) -> RegionDataset:
        mask = (self.region_ids == region_id) & (self.user_ids == user_id)
        return self.subset(np.flatnonzero(mask))

    def clients(self) -> list[tuple[int, int]]:
        pairs = {(int(r), int(u)) for r, u in zip(self.region_ids, self.user_ids)}
        return sorted(pairs)

    def head_per_client(self, count: int) -> RegionDataset:
        """First ``count`` samples of every (region, user) pair."""
        keep = []
        for region_id, user_id in self.clients():
            mask = (self.region_ids == region_id) & (self.user_ids == user_id)
            keep.append(np.flatnonzero(mask)[:count])
        return self.subset(np.sort(np.concatenate(keep)))


def scenario_pilot(
    scenario: ScenarioConfig, n_slots: int, sensing: str | None = None
) -> PilotConfig:
    """The pilot design for ``n_slots``; identical for every caller."""
    sensing = sensing or scenario.sensing
    rng = numpy_rng(scenario.seed, "pilot", sensing, n_slots)
    cfg_bs, cfg_irs = scenario.cfg_bs, scenario.cfg_irs
    return build_pilot(n_slots, cfg_bs.size, cfg_irs.size, rng, sensing)


def link_channel(scenario: ScenarioConfig) -> np.ndarray:
    """BS-IRS channel G, drawn once per scenario."""
    rng = numpy_rng(scenario.seed, "link")
    realization = sample_link(scenario.link, rng, scenario.wavelength)
    return bs_irs_channel(
        scenario.cfg_bs,
        scenario.cfg_irs,
        scenario.link,
        realization,
        scenario.far_field,
    )


def _user_channels(
    scenario: ScenarioConfig, G: np.ndarray, region_id: int, user_id: int
) -> tuple[np.ndarray, np.ndarray]:
    rng = numpy_rng(scenario.seed, "user", region_id, user_id)
    region = scenario.regions[region_id]
    truths = np.empty((scenario.samples_per_user, scenario.label_size), np.complex128)
    snr_index = np.empty(scenario.samples_per_user, dtype=np.int64)
    for sample in range(scenario.samples_per_user):
        user = sample_user_geometry(region, rng, scenario.wavelength)
        h = bs_user_channel(
            scenario.cfg_bs, user.bs_los, user.bs_scatterers, scenario.far_field
        )
        f = irs_user_channel(
            scenario.cfg_irs, user.irs_los, user.irs_scatterers, scenario.far_field
        )
        truths[sample] = cascade(h, f, G).h_vec
        snr_index[sample] = rng.integers(len(scenario.snr_grid))
    return truths, snr_index


def observe(
    pilot: PilotConfig,
    truths: np.ndarray,
    snr_db: np.ndarray,
    rng: np.random.Generator,
    power: float | None = None,
) -> np.ndarray:
    """y = A·h + n with σ² set per sample from its SNR.

    ``power`` is the reference received power per slot; by default it is
    measured on ``truths`` themselves.
    """
    A = pilot.sensing_matrix()
    truths = np.atleast_2d(truths)
    if truths.shape[1] != A.shape[1]:
        raise DimensionError(
            f"channels of length {truths.shape[1]} do not fit A with "
            f"{A.shape[1]} columns"
        )
    power = signal_power(A, truths) if power is None else power
    received = truths @ A.T
    noise = complex_noise(rng, 1.0, received.shape)
    sigma = np.sqrt([noise_var_for_snr(power, float(s)) for s in snr_db])
    return received + noise * sigma[:, np.newaxis]


def generate(scenario: ScenarioConfig, workers: int = 1) -> RegionDataset:
    """All samples of all users in (region, user, sample) order."""
    G = link_channel(scenario)
    clients = [
        (region_id, user_id)
        for region_id in range(scenario.n_regions)
        for user_id in range(scenario.users_per_region)
    ]
    logger.info(
        f"🛰️ Generating {scenario.n_samples} samples for {len(clients)} users "
        f"({scenario.mode}, Q={scenario.pilot_slots}, labels={scenario.labels})"
    )

    def draw(client):
        return _user_channels(scenario, G, *client)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            drawn = list(pool.map(draw, clients))
    else:
        drawn = [draw(client) for client in clients]

    truths = np.concatenate([channels for channels, _ in drawn])
    snr_index = np.concatenate([index for _, index in drawn])
    snr_db = np.asarray(scenario.snr_grid, dtype=np.float64)[snr_index]
    per_user = scenario.samples_per_user
    region_ids = np.repeat([r for r, _ in clients], per_user).astype(np.int64)
    user_ids = np.repeat([u for _, u in clients], per_user).astype(np.int64)

    pilot = scenario_pilot(scenario, scenario.pilot_slots)
    observations = observe(pilot, truths, snr_db, numpy_rng(scenario.seed, "noise"))

    labels = truths
    if scenario.labels == LS_LABELS:
        label_pilot = scenario_pilot(
            scenario, scenario.classical_pilot_slots, sensing=PER_SLOT
        )
        label_obs = observe(
            label_pilot, truths, snr_db, numpy_rng(scenario.seed, "label-noise")
        )
        labels = ls_operator(label_pilot.sensing_matrix()).apply(label_obs)

    scaler = Scaler.fit(labels)
    for region_id in range(scenario.n_regions):
        logger.info(
            f"Region {region_id + 1}: {np.sum(region_ids == region_id)} samples"
        )
    return RegionDataset(
        scenario=scenario,
        observations=scaler.normalize(observations),
        labels=scaler.normalize(labels),
        region_ids=region_ids,
        user_ids=user_ids,
        snr_db=snr_db,
        scaler=scaler,
        truths=scaler.normalize(truths) if scenario.labels == LS_LABELS else None,
    )


def strata(dataset: RegionDataset) -> np.ndarray:
    """Region × SNR-bin label of every sample."""
    _, snr_bin = np.unique(dataset.snr_db, return_inverse=True)
    n_bins = int(snr_bin.max()) + 1 if len(snr_bin) else 1
    return dataset.region_ids * n_bins + snr_bin


def split(
    dataset: RegionDataset,
    fractions: tuple[float, float, float] = DEFAULT_FRACTIONS,
    seed: int | None = None,
) -> tuple[RegionDataset, RegionDataset, RegionDataset]:
    """Disjoint train/val/test subsets, stratified by region and SNR bin."""
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise DatasetError(f"need three positive fractions, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise DatasetError(f"fractions must sum to 1, got {sum(fractions)}")
    seed = dataset.scenario.seed if seed is None else seed
    train_share, val_share, test_share = fractions
    indices = np.arange(len(dataset))
    labels = strata(dataset)
    try:
        train, rest = train_test_split(
            indices,
            test_size=1.0 - train_share,
            random_state=seed,
            stratify=labels,
        )
        val, test = train_test_split(
            rest,
            test_size=test_share / (val_share + test_share),
            random_state=seed,
            stratify=labels[rest],
        )
    except ValueError as exc:
        raise DatasetError(f"cannot stratify by region and SNR: {exc}") from exc
    return tuple(dataset.subset(np.sort(part)) for part in (train, val, test))


def _complex_fields(values: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(values, dtype="<c16").view("<f8")


def _record_dtype(n_slots: int, label_size: int, has_truth: bool) -> np.dtype:
    fields = [
        ("observation", "<f8", (2 * n_slots,)),
        ("label", "<f8", (2 * label_size,)),
    ]
    if has_truth:
        fields.append(("truth", "<f8", (2 * label_size,)))
    fields += [("region", "<u4"), ("user", "<u4"), ("snr", "<f8")]
    return np.dtype(fields)


def save(dataset: RegionDataset, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    has_truth = dataset.truths is not None
    blob = dataset.scenario.canonical_text().encode("utf-8")
    n_slots, label_size = dataset.n_slots, dataset.labels.shape[1]
    header = struct.pack(
        "<4sIII", MAGIC, VERSION, HAS_TRUTH if has_truth else 0, len(blob)
    )
    header += blob + struct.pack("<d", dataset.scaler.scale)
    header += struct.pack("<QII", len(dataset), n_slots, label_size)

    dtype = _record_dtype(n_slots, label_size, has_truth)
    records = np.zeros(len(dataset), dtype=dtype)
    records["observation"] = _complex_fields(dataset.observations)
    records["label"] = _complex_fields(dataset.labels)
    if has_truth:
        records["truth"] = _complex_fields(dataset.truths)
    records["region"] = dataset.region_ids
    records["user"] = dataset.user_ids
    records["snr"] = dataset.snr_db

    payload = header + records.tobytes()
    path.write_bytes(payload + struct.pack("<I", zlib.crc32(payload)))
    logger.info(f"💾 Saved {len(dataset)} samples to {path}")
    return path


def load(path: str | Path) -> RegionDataset:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset not found: {path}")
    raw = path.read_bytes()
    if len(raw) < 20:
        raise DatasetError(f"{path}: truncated dataset file")
    if raw[:4] != MAGIC:
        raise DatasetError(f"{path}: not a dataset file (magic {raw[:4]!r})")
    _, version, flags, blob_length = struct.unpack_from("<4sIII", raw, 0)
    if version != VERSION:
        raise FormatVersionError(
            f"{path}: format version {version}, this build reads {VERSION}"
        )
    payload, (stored_crc,) = raw[:-4], struct.unpack("<I", raw[-4:])
    if zlib.crc32(payload) != stored_crc:
        raise ChecksumError(f"{path}: checksum mismatch")

    offset = 16
    try:
        text = payload[offset : offset + blob_length].decode("utf-8")
        offset += blob_length
        (scale,) = struct.unpack_from("<d", payload, offset)
        offset += 8
        count, n_slots, label_size = struct.unpack_from("<QII", payload, offset)
        offset += 16
    except (struct.error, UnicodeDecodeError) as exc:
        raise DatasetError(f"{path}: malformed header ({exc})") from exc

    has_truth = bool(flags & HAS_TRUTH)
    dtype = _record_dtype(n_slots, label_size, has_truth)
    if len(payload) - offset != count * dtype.itemsize:
        raise DatasetError(
            f"{path}: expected {count} records, found "
            f"{(len(payload) - offset) / dtype.itemsize:g}"
        )
    records = np.frombuffer(payload, dtype=dtype, count=count, offset=offset)

    def unpack(name):
        return records[name].astype("<f8").copy().view("<c16").astype(np.complex128)

    return RegionDataset(
        scenario=parse_scenario(text),
        observations=unpack("observation"),
        labels=unpack("label"),
        region_ids=records["region"].astype(np.int64),
        user_ids=records["user"].astype(np.int64),
        snr_db=records["snr"].astype(np.float64),
        scaler=Scaler(scale),
        truths=unpack("truth") if has_truth else None,
    )
