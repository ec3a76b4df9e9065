"""
Uniform planar array (UPA) geometry and array response vectors.

Arrays lie in the x-z plane with element (0, 0) at the origin and element
(m, n) at (n·d_x, 0, m·d_z). A point at spherical coordinates (θ, φ, r) sits at
r·(cosθ sinφ, sinθ sinφ, cosφ). Flattened responses use x-major Kronecker
order: ``values = kron(a_x, a_z)``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from apps.utils.exceptions import (
    ElementIndexError,
    GeometryError,
    TaylorValidityError,
)

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi

# Taylor expansion is only accepted when r exceeds this multiple of the span
TAYLOR_RANGE_FACTOR = 10.0


@dataclass(frozen=True)
class UpaConfig:
    """Planar array with (2·half_count_x+1) columns and (2·half_count_z+1) rows."""

    half_count_x: int
    half_count_z: int
    spacing_x: float
    spacing_z: float
    wavelength: float

    def __post_init__(self):
        if self.half_count_x < 0 or self.half_count_z < 0:
            raise GeometryError(
                f"half counts must be >= 0, got ({self.half_count_x}, "
                f"{self.half_count_z})"
            )
        for name in ("spacing_x", "spacing_z", "wavelength"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise GeometryError(f"{name} must be positive, got {value}")

    @classmethod
    def from_counts(
        cls,
        count_x: int,
        count_z: int,
        wavelength: float,
        spacing_x: float | None = None,
        spacing_z: float | None = None,
    ) -> UpaConfig:
        """Build from odd element counts; spacings default to half a wavelength."""
        if count_x < 1 or count_z < 1 or count_x % 2 == 0 or count_z % 2 == 0:
            raise GeometryError(
                f"element counts must be odd and positive, got {count_x}x{count_z}"
            )
        return cls(
            half_count_x=(count_x - 1) // 2,
            half_count_z=(count_z - 1) // 2,
            spacing_x=wavelength / 2 if spacing_x is None else spacing_x,
            spacing_z=wavelength / 2 if spacing_z is None else spacing_z,
            wavelength=wavelength,
        )

    @property
    def count_x(self) -> int:
        return 2 * self.half_count_x + 1

    @property
    def count_z(self) -> int:
        return 2 * self.half_count_z + 1

    @property
    def size(self) -> int:
        return self.count_x * self.count_z

    @property
    def indices_x(self) -> np.ndarray:
        return np.arange(-self.half_count_x, self.half_count_x + 1)

    @property
    def indices_z(self) -> np.ndarray:
        return np.arange(-self.half_count_z, self.half_count_z + 1)

    @property
    def span(self) -> float:
        """Diagonal of the element-centre extent."""
        return math.hypot(
            2 * self.half_count_x * self.spacing_x,
            2 * self.half_count_z * self.spacing_z,
        )

    @property
    def aperture(self) -> float:
        """Physical aperture √(L_x² + L_z²) with L = count·spacing."""
        return math.hypot(self.count_x * self.spacing_x, self.count_z * self.spacing_z)

    def check_index(self, m: int, n: int) -> None:
        if abs(n) > self.half_count_x or abs(m) > self.half_count_z:
            raise ElementIndexError(
                f"element (m={m}, n={n}) outside array "
                f"|m| <= {self.half_count_z}, |n| <= {self.half_count_x}"
            )


@dataclass(frozen=True)
class SphericalCoord:
    azimuth: float
    elevation: float
    range: float

    def __post_init__(self):
        if not (math.isfinite(self.range) and self.range > 0):
            raise GeometryError(f"range must be positive, got {self.range}")
        if not 0.0 <= self.azimuth < TWO_PI:
            raise GeometryError(f"azimuth must lie in [0, 2π), got {self.azimuth}")
        if not 0.0 < self.elevation < math.pi:
            raise GeometryError(f"elevation must lie in (0, π), got {self.elevation}")

    def direction(self) -> np.ndarray:
        sin_el = math.sin(self.elevation)
        return np.array(
            [
                math.cos(self.azimuth) * sin_el,
                math.sin(self.azimuth) * sin_el,
                math.cos(self.elevation),
            ]
        )

    def cartesian(self) -> np.ndarray:
        return self.range * self.direction()


@dataclass(frozen=True, eq=False)
class ArrayResponse:
    """Flat response ``kron(factor_x, factor_z)`` plus its per-axis factors."""

    values: np.ndarray
    factor_x: np.ndarray
    factor_z: np.ndarray

    def __len__(self) -> int:
        return len(self.values)

    def as_grid(self) -> np.ndarray:
        """Reshape to (count_x, count_z); entry [i, j] = factor_x[i]·factor_z[j]."""
        return self.values.reshape(len(self.factor_x), len(self.factor_z))


def element_position(cfg: UpaConfig, m: int, n: int) -> np.ndarray:
    cfg.check_index(m, n)
    return np.array([n * cfg.spacing_x, 0.0, m * cfg.spacing_z])


def exact_distance(user: SphericalCoord, cfg: UpaConfig, m: int, n: int) -> float:
    return float(np.linalg.norm(user.cartesian() - element_position(cfg, m, n)))


def check_taylor_validity(cfg: UpaConfig, range_m: float) -> None:
    threshold = TAYLOR_RANGE_FACTOR * cfg.span
    if range_m <= threshold:
        raise TaylorValidityError(
            f"range {range_m:.4g} m too small for the second-order expansion "
            f"(needs > {threshold:.4g} m for a {cfg.count_x}x{cfg.count_z} array)"
        )


def distance_terms_x(cfg: UpaConfig, coord: SphericalCoord) -> np.ndarray:
    """h₁(n) for every column index n, ascending."""
    n = cfg.indices_x
    ux = math.cos(coord.azimuth) * math.sin(coord.elevation)
    d = cfg.spacing_x
    return -n * d * ux + (n * d) ** 2 * (1.0 - ux**2) / (2.0 * coord.range)


def distance_terms_z(cfg: UpaConfig, coord: SphericalCoord) -> np.ndarray:
    """h₂(m) for every row index m, ascending."""
    m = cfg.indices_z
    uz = math.cos(coord.elevation)
    d = cfg.spacing_z
    return -m * d * uz + (m * d) ** 2 * math.sin(coord.elevation) ** 2 / (
        2.0 * coord.range
    )


def taylor_distance(user: SphericalCoord, cfg: UpaConfig, m: int, n: int) -> float:
    cfg.check_index(m, n)
    check_taylor_validity(cfg, user.range)
    h1 = distance_terms_x(cfg, user)[n + cfg.half_count_x]
    h2 = distance_terms_z(cfg, user)[m + cfg.half_count_z]
    return float(user.range + h1 + h2)


def nf_arv(cfg: UpaConfig, coord: SphericalCoord) -> ArrayResponse:
    """Near-field response: entry (m, n) = exp(−j·2π/λ·(h₁(n) + h₂(m)))."""
    check_taylor_validity(cfg, coord.range)
    k = TWO_PI / cfg.wavelength
    factor_x = np.exp(-1j * k * distance_terms_x(cfg, coord))
    factor_z = np.exp(-1j * k * distance_terms_z(cfg, coord))
    return ArrayResponse(np.kron(factor_x, factor_z), factor_x, factor_z)


def ff_arv(cfg: UpaConfig, azimuth: float, elevation: float) -> ArrayResponse:
    """Far-field (planar-wave) response; depends on angles only."""
    if not 0.0 <= azimuth < TWO_PI or not 0.0 < elevation < math.pi:
        raise GeometryError(f"invalid angles (θ={azimuth}, φ={elevation})")
    k = TWO_PI / cfg.wavelength
    ux = math.cos(azimuth) * math.sin(elevation)
    uz = math.cos(elevation)
    factor_x = np.exp(1j * k * cfg.indices_x * cfg.spacing_x * ux)
    factor_z = np.exp(1j * k * cfg.indices_z * cfg.spacing_z * uz)
    return ArrayResponse(np.kron(factor_x, factor_z), factor_x, factor_z)


def second_order_residual(
    direction: np.ndarray, offset: np.ndarray, range_m: float
) -> float:
    """Upper bound on |second-order distance − exact distance|.

    The exact distance is ‖range·direction − offset‖ for an offset in the
    x-z plane. The bound adds the x-z cross term the separable expansion
    drops to the third-order remainder of √(1+x).
    """
    rho = float(np.linalg.norm(offset))
    eps = rho / range_m
    x_max = 2.0 * eps + eps**2
    if x_max >= 1.0:
        return math.inf
    cross = abs(offset[0] * offset[2] * direction[0] * direction[2]) / range_m
    dropped = range_m * (4.0 * eps**3 + eps**4) / 8.0
    remainder = range_m * x_max**3 / 16.0 * (1.0 - x_max) ** -2.5
    return cross + dropped + remainder


def taylor_residual_bound(
    user: SphericalCoord, cfg: UpaConfig, m: int, n: int
) -> float:
    return second_order_residual(
        user.direction(), element_position(cfg, m, n), user.range
    )


@dataclass(frozen=True)
class RayleighReport:
    near_field: bool
    harmonic_range: float
    rayleigh_distance: float
    aperture: float

    def __bool__(self) -> bool:
        return self.near_field

    def as_dict(self) -> dict[str, float | bool]:
        return {
            "near_field": self.near_field,
            "harmonic_range_m": self.harmonic_range,
            "rayleigh_distance_m": self.rayleigh_distance,
            "aperture_m": self.aperture,
        }


def rayleigh_check(cfg_irs: UpaConfig, r_a: float, r_ab: float) -> RayleighReport:
    """Near-field test r_a·r_ab/(r_a + r_ab) < 2·D²/λ for the IRS aperture D."""
    if r_a <= 0 or r_ab <= 0:
        raise GeometryError(f"ranges must be positive, got r_a={r_a}, r_ab={r_ab}")
    aperture = cfg_irs.aperture
    harmonic = r_a * r_ab / (r_a + r_ab) if math.isfinite(r_a) else r_ab
    rayleigh = 2.0 * aperture**2 / cfg_irs.wavelength
    return RayleighReport(harmonic < rayleigh, harmonic, rayleigh, aperture)
