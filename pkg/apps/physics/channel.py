"""
LoS + NLoS channel synthesis for the BS-user (h), IRS-user (f) and BS-IRS (G)
links, and the cascaded estimation target H = [h; diag(f)·G].

Path gains follow free-space inverse-distance magnitudes: uniform random
phase on LoS paths and circular Gaussian on NLoS paths, NLoS clusters
scaled by 1/√L so the aggregate scattered power does not grow with L.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field

import numpy as np

from apps.physics.geometry import (
    TWO_PI,
    SphericalCoord,
    UpaConfig,
    ff_arv,
    nf_arv,
)
from apps.utils.exceptions import DimensionError, GeometryError

logger = logging.getLogger(__name__)


def _check_interval(name: str, interval: tuple[float, float]) -> None:
    low, high = interval
    if not (math.isfinite(low) and math.isfinite(high)) or low >= high:
        raise GeometryError(f"{name} must be a non-empty interval, got {interval}")


def _check_range_pair(name: str, pair: tuple[float, float]) -> None:
    low, high = pair
    if not low > 0 or low > high:
        raise GeometryError(f"{name} must be an ordered positive pair, got {pair}")


def _check_elevation(name: str, interval: tuple[float, float]) -> None:
    # draws are taken from [low, high), so low itself must be a valid elevation
    _check_interval(name, interval)
    low, high = interval
    if not low > 0 or high > math.pi:
        raise GeometryError(f"{name} must lie in (0, π], got {interval}")


@dataclass(frozen=True)
class PathCluster:
    gain: complex
    coord: SphericalCoord

    def __post_init__(self):
        if not np.isfinite(self.gain):
            raise GeometryError(f"path gain must be finite, got {self.gain}")


@dataclass(frozen=True)
class RegionSpec:
    """Angular sector and propagation environment of one user region."""

    azimuth_interval: tuple[float, float]
    elevation_interval: tuple[float, float]
    bs_range: float
    irs_range: float
    n_scatter_bs: int
    n_scatter_irs: int
    scatter_range_bs: tuple[float, float]
    scatter_range_irs: tuple[float, float]

    def __post_init__(self):
        _check_interval("azimuth_interval", self.azimuth_interval)
        if self.azimuth_interval[0] < 0 or self.azimuth_interval[1] > TWO_PI:
            raise GeometryError(
                f"azimuth interval outside [0, 2π): {self.azimuth_interval}"
            )
        _check_elevation("elevation_interval", self.elevation_interval)
        if self.bs_range <= 0 or self.irs_range <= 0:
            raise GeometryError("region ranges must be positive")
        if self.n_scatter_bs < 0 or self.n_scatter_irs < 0:
            raise GeometryError("scatterer counts must be >= 0")
        _check_range_pair("scatter_range_bs", self.scatter_range_bs)
        _check_range_pair("scatter_range_irs", self.scatter_range_irs)

    def contains_azimuth(self, azimuth: float) -> bool:
        low, high = self.azimuth_interval
        return low <= azimuth < high


@dataclass(frozen=True)
class UserGeometry:
    bs_los: PathCluster
    irs_los: PathCluster
    bs_scatterers: tuple[PathCluster, ...] = ()
    irs_scatterers: tuple[PathCluster, ...] = ()


@dataclass(frozen=True)
class BsIrsLink:
    """Static BS-IRS geometry.

    (azimuth_ba, elevation_ba) locate the BS from the IRS. The IRS frame is
    the BS frame rotated by π about the y axis, which places the IRS centre at
    range·u(2π − θ_ba, φ_ba) seen from the BS.
    """

    azimuth_ba: float
    elevation_ba: float
    range: float
    n_scatter: int = 0
    scatter_range_irs: tuple[float, float] = (30.0, 120.0)
    scatter_range_bs: tuple[float, float] = (25.0, 100.0)
    scatter_azimuth_interval: tuple[float, float] = (0.0, math.pi)
    scatter_elevation_interval: tuple[float, float] = (math.pi / 4, math.pi / 2)

    def __post_init__(self):
        # validates angles and range
        SphericalCoord(self.azimuth_ba, self.elevation_ba, self.range)
        if self.n_scatter < 0:
            raise GeometryError("link scatterer count must be >= 0")
        _check_range_pair("scatter_range_irs", self.scatter_range_irs)
        _check_range_pair("scatter_range_bs", self.scatter_range_bs)
        _check_interval("scatter_azimuth_interval", self.scatter_azimuth_interval)
        _check_elevation("scatter_elevation_interval", self.scatter_elevation_interval)

    @property
    def azimuth_ab(self) -> float:
        return (TWO_PI - self.azimuth_ba) % TWO_PI

    @property
    def elevation_ab(self) -> float:
        return self.elevation_ba

    @property
    def irs_coord(self) -> SphericalCoord:
        return SphericalCoord(self.azimuth_ba, self.elevation_ba, self.range)

    @property
    def bs_coord(self) -> SphericalCoord:
        return SphericalCoord(self.azimuth_ab, self.elevation_ab, self.range)


@dataclass(frozen=True)
class LinkScatterer:
    gain: complex
    irs_coord: SphericalCoord
    bs_coord: SphericalCoord


@dataclass(frozen=True)
class LinkRealization:
    los_gain: complex
    scatterers: tuple[LinkScatterer, ...] = ()


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    h: np.ndarray
    f: np.ndarray
    G: np.ndarray
    H: np.ndarray = field(repr=False)
    h_vec: np.ndarray = field(repr=False)

    @property
    def bs_size(self) -> int:
        return len(self.h)

    @property
    def irs_size(self) -> int:
        return len(self.f)


def path_gain(
    range_m: float,
    is_los: bool,
    rng: np.random.Generator,
    wavelength: float,
    cluster_count: int = 1,
) -> complex:
    if range_m <= 0:
        raise GeometryError(f"range must be positive, got {range_m}")
    magnitude = wavelength / (4.0 * math.pi * range_m)
    if is_los:
        return complex(magnitude * np.exp(1j * rng.uniform(0.0, TWO_PI)))
    g = (rng.standard_normal() + 1j * rng.standard_normal()) / math.sqrt(2.0)
    return complex(magnitude * g / math.sqrt(max(cluster_count, 1)))


def _uniform(rng: np.random.Generator, interval: tuple[float, float]) -> float:
    return float(rng.uniform(interval[0], interval[1]))


def _scatterers(
    region: RegionSpec,
    count: int,
    range_pair: tuple[float, float],
    rng: np.random.Generator,
    wavelength: float,
) -> tuple[PathCluster, ...]:
    clusters = []
    for _ in range(count):
        coord = SphericalCoord(
            _uniform(rng, region.azimuth_interval),
            _uniform(rng, region.elevation_interval),
            _uniform(rng, range_pair),
        )
        gain = path_gain(coord.range, False, rng, wavelength, cluster_count=count)
        clusters.append(PathCluster(gain, coord))
    return tuple(clusters)


def sample_user_geometry(
    region: RegionSpec, rng: np.random.Generator, wavelength: float
) -> UserGeometry:
    """Draw one user of ``region`` with its BS-side and IRS-side scatterers."""
    bs_coord = SphericalCoord(
        _uniform(rng, region.azimuth_interval),
        _uniform(rng, region.elevation_interval),
        region.bs_range,
    )
    irs_coord = SphericalCoord(
        _uniform(rng, region.azimuth_interval),
        _uniform(rng, region.elevation_interval),
        region.irs_range,
    )
    bs_los = PathCluster(path_gain(region.bs_range, True, rng, wavelength), bs_coord)
    irs_los = PathCluster(
        path_gain(region.irs_range, True, rng, wavelength), irs_coord
    )
    return UserGeometry(
        bs_los=bs_los,
        irs_los=irs_los,
        bs_scatterers=_scatterers(
            region, region.n_scatter_bs, region.scatter_range_bs, rng, wavelength
        ),
        irs_scatterers=_scatterers(
            region, region.n_scatter_irs, region.scatter_range_irs, rng, wavelength
        ),
    )


def sample_link(
    link: BsIrsLink, rng: np.random.Generator, wavelength: float
) -> LinkRealization:
    scatterers = []
    for _ in range(link.n_scatter):
        irs_coord = SphericalCoord(
            _uniform(rng, link.scatter_azimuth_interval),
            _uniform(rng, link.scatter_elevation_interval),
            _uniform(rng, link.scatter_range_irs),
        )
        bs_coord = SphericalCoord(
            _uniform(rng, link.scatter_azimuth_interval),
            _uniform(rng, link.scatter_elevation_interval),
            _uniform(rng, link.scatter_range_bs),
        )
        gain = path_gain(
            irs_coord.range + bs_coord.range,
            False,
            rng,
            wavelength,
            cluster_count=link.n_scatter,
        )
        scatterers.append(LinkScatterer(gain, irs_coord, bs_coord))
    return LinkRealization(
        los_gain=path_gain(link.range, True, rng, wavelength),
        scatterers=tuple(scatterers),
    )


def _response(cfg: UpaConfig, coord: SphericalCoord, far_field: bool) -> np.ndarray:
    if far_field:
        return ff_arv(cfg, coord.azimuth, coord.elevation).values
    return nf_arv(cfg, coord).values


def superpose(
    cfg: UpaConfig, clusters: Sequence[PathCluster], far_field: bool = False
) -> np.ndarray:
    """Σ gain·a(coord) over the clusters, in list order."""
    channel = np.zeros(cfg.size, dtype=np.complex128)
    for cluster in clusters:
        channel += cluster.gain * _response(cfg, cluster.coord, far_field)
    return channel


def bs_user_channel(
    cfg_bs: UpaConfig,
    los: PathCluster | None,
    scatterers: Sequence[PathCluster] = (),
    far_field: bool = False,
) -> np.ndarray:
    clusters = ([los] if los is not None else []) + list(scatterers)
    return superpose(cfg_bs, clusters, far_field)


def irs_user_channel(
    cfg_irs: UpaConfig,
    los: PathCluster | None,
    scatterers: Sequence[PathCluster] = (),
    far_field: bool = False,
) -> np.ndarray:
    clusters = ([los] if los is not None else []) + list(scatterers)
    return superpose(cfg_irs, clusters, far_field)


def _check_link_arrays(cfg_bs: UpaConfig, cfg_irs: UpaConfig) -> None:
    if not math.isclose(cfg_bs.wavelength, cfg_irs.wavelength, rel_tol=1e-12):
        raise DimensionError(
            f"BS and IRS wavelengths differ ({cfg_bs.wavelength} vs "
            f"{cfg_irs.wavelength})"
        )


def los_correction(
    cfg_bs: UpaConfig, cfg_irs: UpaConfig, link: BsIrsLink
) -> np.ndarray:
    """Cross-array phase matrix G_c^x ⊗ G_c^z of shape (N, M)."""
    _check_link_arrays(cfg_bs, cfg_irs)
    k = TWO_PI / cfg_bs.wavelength
    sin_el = math.sin(link.elevation_ab)
    ux = math.cos(link.azimuth_ab) * sin_el
    offsets_irs_x = cfg_irs.indices_x * cfg_irs.spacing_x
    offsets_bs_x = cfg_bs.indices_x * cfg_bs.spacing_x
    offsets_irs_z = cfg_irs.indices_z * cfg_irs.spacing_z
    offsets_bs_z = cfg_bs.indices_z * cfg_bs.spacing_z
    corr_x = np.exp(
        -1j * k / link.range * np.outer(offsets_irs_x, offsets_bs_x) * (1.0 - ux**2)
    )
    corr_z = np.exp(
        -1j * k / link.range * np.outer(offsets_irs_z, offsets_bs_z) * sin_el**2
    )
    return np.kron(corr_x, corr_z)


def _link_los(
    cfg_bs: UpaConfig,
    cfg_irs: UpaConfig,
    link: BsIrsLink,
    gain: complex,
    far_field: bool,
) -> np.ndarray:
    a_irs = _response(cfg_irs, link.irs_coord, far_field)
    a_bs = _response(cfg_bs, link.bs_coord, far_field)
    outer = gain * np.outer(a_irs, a_bs)
    if far_field:
        return outer
    return outer * los_correction(cfg_bs, cfg_irs, link)


def bs_irs_channel(
    cfg_bs: UpaConfig,
    cfg_irs: UpaConfig,
    link: BsIrsLink,
    realization: LinkRealization,
    far_field: bool = False,
) -> np.ndarray:
    """G (N×M) = LoS term plus Σ_ℓ β̃_ℓ·a_irs·a_bsᵀ."""
    _check_link_arrays(cfg_bs, cfg_irs)
    G = _link_los(cfg_bs, cfg_irs, link, realization.los_gain, far_field)
    for scatterer in realization.scatterers:
        G = G + scatterer.gain * np.outer(
            _response(cfg_irs, scatterer.irs_coord, far_field),
            _response(cfg_bs, scatterer.bs_coord, far_field),
        )
    return G


def cascade(h: np.ndarray, f: np.ndarray, G: np.ndarray) -> ChannelRealization:
    h = np.asarray(h, dtype=np.complex128)
    f = np.asarray(f, dtype=np.complex128)
    G = np.asarray(G, dtype=np.complex128)
    if h.ndim != 1 or f.ndim != 1 or G.shape != (len(f), len(h)):
        raise DimensionError(
            f"cascade needs h (M,), f (N,), G (N, M); got {h.shape}, {f.shape}, "
            f"{G.shape}"
        )
    H = np.vstack([h[np.newaxis, :], f[:, np.newaxis] * G])
    return ChannelRealization(h=h, f=f, G=G, H=H, h_vec=vec(H))


def vec(H: np.ndarray) -> np.ndarray:
    """Column-major vectorization."""
    return np.asarray(H).reshape(-1, order="F")


def unvec(h_vec: np.ndarray, bs_size: int, irs_size: int) -> np.ndarray:
    if len(h_vec) != bs_size * (irs_size + 1):
        raise DimensionError(
            f"vector of length {len(h_vec)} cannot hold a {irs_size + 1}x{bs_size} H"
        )
    return np.asarray(h_vec).reshape((irs_size + 1, bs_size), order="F")


def synthesize(
    cfg_bs: UpaConfig,
    cfg_irs: UpaConfig,
    user: UserGeometry,
    link: BsIrsLink,
    link_realization: LinkRealization,
    far_field: bool = False,
) -> ChannelRealization:
    h = bs_user_channel(cfg_bs, user.bs_los, user.bs_scatterers, far_field)
    f = irs_user_channel(cfg_irs, user.irs_los, user.irs_scatterers, far_field)
    G = bs_irs_channel(cfg_bs, cfg_irs, link, link_realization, far_field)
    return cascade(h, f, G)


def far_field_channels(
    cfg_bs: UpaConfig,
    cfg_irs: UpaConfig,
    user: UserGeometry,
    link: BsIrsLink,
    link_realization: LinkRealization,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Planar-wave counterparts (h_far, f_far, G_far) of the same geometry."""
    realization = synthesize(
        cfg_bs, cfg_irs, user, link, link_realization, far_field=True
    )
    return realization.h, realization.f, realization.G


