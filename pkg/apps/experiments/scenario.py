"""
Scenario files: the experiment-level configuration.

A scenario is a ``key = value`` text file (see ``scenarios/``). Angles are
given in degrees and stored in radians; ``auto`` pilot lengths resolve to
ceil(M(N+1)/6) and M(N+1). The canonical rendering of the resolved values,
seed included, is what dataset files embed and what the manifest hash covers.
"""

from __future__ import annotations

import dataclasses
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from apps.estimation.pilots import SENSING_MODES, SHARED
from apps.physics.channel import BsIrsLink, RegionSpec
from apps.physics.geometry import UpaConfig, rayleigh_check
from apps.utils import keyvalue
from apps.utils.exceptions import NfceError, ScenarioError

logger = logging.getLogger(__name__)

SPEED_OF_LIGHT = 3.0e8

NEAR_FIELD = "nf"
FAR_FIELD = "ff"
MODES = (NEAR_FIELD, FAR_FIELD)

TRUTH_LABELS = "truth"
LS_LABELS = "ls"
LABEL_MODES = (TRUTH_LABELS, LS_LABELS)

GUARD_MODES = ("error", "warn", "off")

AUTO = "auto"

GLOBAL_KEYS = {
    "mode",
    "seed",
    "carrier_frequency_hz",
    "bs_count_x",
    "bs_count_z",
    "irs_count_x",
    "irs_count_z",
    "bs_spacing_x_m",
    "bs_spacing_z_m",
    "irs_spacing_x_m",
    "irs_spacing_z_m",
    "link_azimuth_deg",
    "link_elevation_deg",
    "link_range_m",
    "link_scatterers",
    "link_scatter_range_irs_m",
    "link_scatter_range_bs_m",
    "link_scatter_azimuth_deg",
    "link_scatter_elevation_deg",
    "regions",
    "pilot_slots",
    "classical_pilot_slots",
    "snr_grid_db",
    "samples_per_user",
    "users_per_region",
    "labels",
    "sensing",
    "rayleigh_guard",
}

REGION_FIELDS = (
    "azimuth_deg",
    "elevation_deg",
    "bs_range_m",
    "irs_range_m",
    "bs_scatterers",
    "irs_scatterers",
    "bs_scatter_range_m",
    "irs_scatter_range_m",
)


def region_key(region: int, name: str) -> str:
    return f"region{region + 1}_{name}"


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    mode: str
    seed: int
    wavelength: float
    cfg_bs: UpaConfig
    cfg_irs: UpaConfig
    link: BsIrsLink
    regions: tuple[RegionSpec, ...]
    pilot_slots: int
    classical_pilot_slots: int
    snr_grid: tuple[float, ...]
    samples_per_user: int
    users_per_region: int
    labels: str = TRUTH_LABELS
    sensing: str = SHARED
    rayleigh_guard: str = "error"
    values: dict[str, Any] = dataclasses.field(default_factory=dict, repr=False)

    @property
    def far_field(self) -> bool:
        return self.mode == FAR_FIELD

    @property
    def n_regions(self) -> int:
        return len(self.regions)

    @property
    def label_size(self) -> int:
        return self.cfg_bs.size * (self.cfg_irs.size + 1)

    @property
    def n_samples(self) -> int:
        return self.n_regions * self.users_per_region * self.samples_per_user

    def canonical_text(self) -> str:
        return keyvalue.canonical_text(self.values)

    @property
    def manifest_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode("utf-8")).hexdigest()

    def with_overrides(self, **overrides: Any) -> ScenarioConfig:
        """Re-resolve with replaced values (``None`` entries are ignored)."""
        entries = {key: keyvalue.format_value(v) for key, v in self.values.items()}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in GLOBAL_KEYS:
                raise ScenarioError(f"cannot override unknown key {key!r}")
            entries[key] = keyvalue.format_value(value)
        return from_entries(entries)


def _radians(values: list[float]) -> tuple[float, float]:
    if len(values) != 2:
        raise ScenarioError(f"expected an interval 'low,high', got {values}")
    return (math.radians(values[0]), math.radians(values[1]))


def _pair(entries: dict[str, str], key: str, default: Any = None) -> tuple:
    values = keyvalue.cast(entries, key, [float], default)
    if len(values) != 2:
        raise ScenarioError(f"key {key!r}: expected 'low,high', got {values}")
    return tuple(float(v) for v in values)


def _choice(entries: dict[str, str], key: str, choices, default: str) -> str:
    value = keyvalue.cast(entries, key, str, default).strip().lower()
    if value not in choices:
        raise ScenarioError(f"key {key!r}: {value!r} is not one of {list(choices)}")
    return value


def _slots(entries: dict[str, str], key: str, auto_value: int) -> int:
    raw = entries.get(key, AUTO).strip().lower()
    if raw == AUTO:
        return auto_value
    value = keyvalue.cast(entries, key, int)
    if value < 1:
        raise ScenarioError(f"key {key!r}: pilot length must be >= 1, got {value}")
    return value


def _array(
    entries: dict[str, str], prefix: str, wavelength: float, values: dict[str, Any]
) -> UpaConfig:
    count_x = keyvalue.cast(entries, f"{prefix}_count_x", int)
    count_z = keyvalue.cast(entries, f"{prefix}_count_z", int)
    spacing_x = keyvalue.cast(entries, f"{prefix}_spacing_x_m", float, wavelength / 2)
    spacing_z = keyvalue.cast(entries, f"{prefix}_spacing_z_m", float, wavelength / 2)
    values.update(
        {
            f"{prefix}_count_x": count_x,
            f"{prefix}_count_z": count_z,
            f"{prefix}_spacing_x_m": spacing_x,
            f"{prefix}_spacing_z_m": spacing_z,
        }
    )
    return UpaConfig.from_counts(count_x, count_z, wavelength, spacing_x, spacing_z)


def _region(entries: dict[str, str], index: int, values: dict[str, Any]) -> RegionSpec:
    azimuth = _pair(entries, region_key(index, "azimuth_deg"))
    elevation = _pair(entries, region_key(index, "elevation_deg"))
    resolved = {
        "azimuth_deg": list(azimuth),
        "elevation_deg": list(elevation),
        "bs_range_m": keyvalue.cast(entries, region_key(index, "bs_range_m"), float),
        "irs_range_m": keyvalue.cast(entries, region_key(index, "irs_range_m"), float),
        "bs_scatterers": keyvalue.cast(
            entries, region_key(index, "bs_scatterers"), int, 0
        ),
        "irs_scatterers": keyvalue.cast(
            entries, region_key(index, "irs_scatterers"), int, 0
        ),
        "bs_scatter_range_m": list(
            _pair(entries, region_key(index, "bs_scatter_range_m"), [20.0, 100.0])
        ),
        "irs_scatter_range_m": list(
            _pair(entries, region_key(index, "irs_scatter_range_m"), [15.0, 30.0])
        ),
    }
    for name, value in resolved.items():
        values[region_key(index, name)] = value
    return RegionSpec(
        azimuth_interval=_radians(resolved["azimuth_deg"]),
        elevation_interval=_radians(resolved["elevation_deg"]),
        bs_range=resolved["bs_range_m"],
        irs_range=resolved["irs_range_m"],
        n_scatter_bs=resolved["bs_scatterers"],
        n_scatter_irs=resolved["irs_scatterers"],
        scatter_range_bs=tuple(resolved["bs_scatter_range_m"]),
        scatter_range_irs=tuple(resolved["irs_scatter_range_m"]),
    )


def _check_keys(entries: dict[str, str], n_regions: int) -> None:
    allowed = set(GLOBAL_KEYS)
    for index in range(n_regions):
        allowed.update(region_key(index, name) for name in REGION_FIELDS)
    unknown = sorted(set(entries) - allowed)
    if unknown:
        raise ScenarioError(f"unknown scenario key {unknown[0]!r}")


def _check_rayleigh(config: ScenarioConfig) -> None:
    if config.far_field or config.rayleigh_guard == "off":
        return
    failures = {}
    for index, region in enumerate(config.regions):
        report = rayleigh_check(config.cfg_irs, region.irs_range, config.link.range)
        if not report:
            failures[f"region{index + 1}"] = report.as_dict()
    if not failures:
        return
    summary = "; ".join(
        f"{name}: r_a·r_ab/(r_a+r_ab) = {d['harmonic_range_m']:.4g} m is not below "
        f"2D²/λ = {d['rayleigh_distance_m']:.4g} m"
        for name, d in failures.items()
    )
    if config.rayleigh_guard == "error":
        raise ScenarioError(f"geometry is not near-field ({summary})", failures)
    logger.warning(f"⚠️ Near-field guard: {summary}")


def from_entries(entries: dict[str, str]) -> ScenarioConfig:
    """Resolve raw key-value entries into a validated scenario."""
    values: dict[str, Any] = {}
    n_regions = keyvalue.cast(entries, "regions", int)
    if n_regions < 1:
        raise ScenarioError(f"need at least one region, got {n_regions}")
    _check_keys(entries, n_regions)

    mode = _choice(entries, "mode", MODES, NEAR_FIELD)
    seed = keyvalue.cast(entries, "seed", int)
    frequency = keyvalue.cast(entries, "carrier_frequency_hz", float)
    if not frequency > 0:
        raise ScenarioError(f"carrier frequency must be positive, got {frequency}")
    wavelength = SPEED_OF_LIGHT / frequency
    values.update({"mode": mode, "seed": seed, "carrier_frequency_hz": frequency})

    try:
        cfg_bs = _array(entries, "bs", wavelength, values)
        cfg_irs = _array(entries, "irs", wavelength, values)
        link_azimuth = keyvalue.cast(entries, "link_azimuth_deg", float)
        link_elevation = keyvalue.cast(entries, "link_elevation_deg", float)
        link_range = keyvalue.cast(entries, "link_range_m", float)
        link_scatterers = keyvalue.cast(entries, "link_scatterers", int, 0)
        scatter_irs = _pair(entries, "link_scatter_range_irs_m", [30.0, 120.0])
        scatter_bs = _pair(entries, "link_scatter_range_bs_m", [25.0, 100.0])
        scatter_azimuth = _pair(entries, "link_scatter_azimuth_deg", [0.0, 180.0])
        scatter_elevation = _pair(entries, "link_scatter_elevation_deg", [45.0, 90.0])
        link = BsIrsLink(
            azimuth_ba=math.radians(link_azimuth),
            elevation_ba=math.radians(link_elevation),
            range=link_range,
            n_scatter=link_scatterers,
            scatter_range_irs=scatter_irs,
            scatter_range_bs=scatter_bs,
            scatter_azimuth_interval=_radians(list(scatter_azimuth)),
            scatter_elevation_interval=_radians(list(scatter_elevation)),
        )
        values.update(
            {
                "link_azimuth_deg": link_azimuth,
                "link_elevation_deg": link_elevation,
                "link_range_m": link_range,
                "link_scatterers": link_scatterers,
                "link_scatter_range_irs_m": list(scatter_irs),
                "link_scatter_range_bs_m": list(scatter_bs),
                "link_scatter_azimuth_deg": list(scatter_azimuth),
                "link_scatter_elevation_deg": list(scatter_elevation),
                "regions": n_regions,
            }
        )
        regions = tuple(_region(entries, index, values) for index in range(n_regions))
    except ScenarioError:
        raise
    except NfceError as exc:
        raise ScenarioError(f"invalid geometry: {exc}") from exc

    label_size = cfg_bs.size * (cfg_irs.size + 1)
    pilot_slots = _slots(entries, "pilot_slots", math.ceil(label_size / 6))
    classical_slots = _slots(entries, "classical_pilot_slots", label_size)
    snr_grid = tuple(float(v) for v in keyvalue.cast(entries, "snr_grid_db", [float]))
    if not snr_grid:
        raise ScenarioError("snr_grid_db must list at least one value")
    if any(math.isnan(v) for v in snr_grid):
        raise ScenarioError("snr_grid_db must not contain NaN")
    samples = keyvalue.cast(entries, "samples_per_user", int)
    users = keyvalue.cast(entries, "users_per_region", int)
    if samples < 1 or users < 1:
        raise ScenarioError(
            f"samples_per_user and users_per_region must be >= 1, "
            f"got {samples} and {users}"
        )
    labels = _choice(entries, "labels", LABEL_MODES, TRUTH_LABELS)
    sensing = _choice(entries, "sensing", SENSING_MODES, SHARED)
    guard = _choice(entries, "rayleigh_guard", GUARD_MODES, "error")
    values.update(
        {
            "pilot_slots": pilot_slots,
            "classical_pilot_slots": classical_slots,
            "snr_grid_db": list(snr_grid),
            "samples_per_user": samples,
            "users_per_region": users,
            "labels": labels,
            "sensing": sensing,
            "rayleigh_guard": guard,
        }
    )

    config = ScenarioConfig(
        mode=mode,
        seed=seed,
        wavelength=wavelength,
        cfg_bs=cfg_bs,
        cfg_irs=cfg_irs,
        link=link,
        regions=regions,
        pilot_slots=pilot_slots,
        classical_pilot_slots=classical_slots,
        snr_grid=snr_grid,
        samples_per_user=samples,
        users_per_region=users,
        labels=labels,
        sensing=sensing,
        rayleigh_guard=guard,
        values=values,
    )
    _check_rayleigh(config)
    return config


def parse_scenario(text: str) -> ScenarioConfig:
    return from_entries(keyvalue.parse_lines(text))


def load_scenario(path: str | Path) -> ScenarioConfig:
    config = from_entries(keyvalue.read_file(path))
    logger.info(
        f"Loaded scenario {path} ({config.mode}, T={config.n_regions}, "
        f"M={config.cfg_bs.size}, N={config.cfg_irs.size}, seed={config.seed})"
    )
    return config
