"""Image and sinogram grids, field containers and unit conversions.

Images are stored as ``(height, width)`` arrays with row 0 at the top.
Sinograms are stored as ``(n_bins, n_views)`` arrays, one column per view.
All values are float64; float32 only appears at file I/O boundaries.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

EPS_DIV = 1e-8
MU_WATER = 0.192
W_MAX = 2.0


class ShapeError(ValueError):
    """Raised when two fields or a field and a geometry do not line up."""


class ValidationError(ValueError):
    """Raised when field values violate the invariants of their unit/kind."""


class Unit(enum.Enum):
    HU = "HU"
    ATTENUATION = "Attenuation"
    BINARY = "Binary"
    WEIGHT = "Weight"


class SinoKind(enum.Enum):
    RAW = "Raw"
    NORMALIZED = "Normalized"
    TRACE = "Trace"


@dataclass(frozen=True)
class ImageGrid:
    height: int
    width: int
    pixel_size: float = 1.0

    def __post_init__(self):
        if self.height < 1 or self.width < 1:
            raise ValidationError(f"image grid must be at least 1x1, got {self.height}x{self.width}")
        if not self.pixel_size > 0:
            raise ValidationError(f"pixel_size must be positive, got {self.pixel_size}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    @property
    def diagonal(self) -> float:
        """Physical length of the grid diagonal."""
        return float(np.hypot(self.height, self.width) * self.pixel_size)


@dataclass(frozen=True)
class SinogramGrid:
    n_bins: int
    n_views: int
    bin_spacing: float = 1.0

    def __post_init__(self):
        if self.n_bins < 1 or self.n_views < 1:
            raise ValidationError(f"sinogram grid must be at least 1x1, got {self.n_bins}x{self.n_views}")
        if not self.bin_spacing > 0:
            raise ValidationError(f"bin_spacing must be positive, got {self.bin_spacing}")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_bins, self.n_views)

    @property
    def view_angles(self) -> np.ndarray:
        """View angles in radians, uniformly spaced over [0, 2*pi)."""
        return 2.0 * np.pi * np.arange(self.n_views) / self.n_views

    @property
    def bin_centers(self) -> np.ndarray:
        """Signed detector coordinate of each bin center, symmetric about 0."""
        return (np.arange(self.n_bins) - (self.n_bins - 1) / 2.0) * self.bin_spacing


def _freeze(values, shape) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    if arr.shape != tuple(shape):
        raise ShapeError(f"values have shape {arr.shape}, grid expects {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError("field contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Image:
    """Immutable 2-D spatial field tagged with its unit."""

    grid: ImageGrid
    values: np.ndarray
    unit: Unit = Unit.ATTENUATION
    w_max: float = field(default=W_MAX, repr=False)

    def __post_init__(self):
        arr = _freeze(self.values, self.grid.shape)
        if self.unit is Unit.BINARY and not np.all((arr == 0) | (arr == 1)):
            raise ValidationError("binary image must contain only 0 and 1")
        if self.unit is Unit.WEIGHT and (arr.min() < 0 or arr.max() > self.w_max):
            raise ValidationError(f"weight image values must lie in [0, {self.w_max}]")
        object.__setattr__(self, "values", arr)

    @classmethod
    def full(cls, grid: ImageGrid, value: float, unit: Unit = Unit.ATTENUATION) -> "Image":
        return cls(grid, np.full(grid.shape, float(value)), unit)

    def with_values(self, values, unit: Unit | None = None) -> "Image":
        return Image(self.grid, values, self.unit if unit is None else unit)


@dataclass(frozen=True)
class Sinogram:
    """Immutable ``(n_bins, n_views)`` Radon-domain field."""

    grid: SinogramGrid
    values: np.ndarray
    kind: SinoKind = SinoKind.RAW

    def __post_init__(self):
        arr = _freeze(self.values, self.grid.shape)
        if self.kind is SinoKind.TRACE and not np.all((arr == 0) | (arr == 1)):
            raise ValidationError("trace sinogram must contain only 0 and 1")
        object.__setattr__(self, "values", arr)

    @classmethod
    def zeros(cls, grid: SinogramGrid, kind: SinoKind = SinoKind.RAW) -> "Sinogram":
        return cls(grid, np.zeros(grid.shape), kind)

    def with_values(self, values, kind: SinoKind | None = None) -> "Sinogram":
        return Sinogram(self.grid, values, self.kind if kind is None else kind)


def _require_unit(img: Image, unit: Unit):
    if img.unit is not unit:
        raise ValidationError(f"expected a {unit.value} image, got {img.unit.value}")


def hu_to_mu(img: Image, mu_water: float = MU_WATER) -> Image:
    """Convert Hounsfield units to linear attenuation, clamped at 0 (air)."""
    _require_unit(img, Unit.HU)
    if not mu_water > 0:
        raise ValidationError("mu_water must be positive")
    mu = mu_water * (1.0 + img.values / 1000.0)
    return Image(img.grid, np.maximum(mu, 0.0), Unit.ATTENUATION)


def mu_to_hu(img: Image, mu_water: float = MU_WATER) -> Image:
    _require_unit(img, Unit.ATTENUATION)
    if not mu_water > 0:
        raise ValidationError("mu_water must be positive")
    return Image(img.grid, 1000.0 * (img.values / mu_water - 1.0), Unit.HU)


def _same_grid(a, b):
    if a.grid != b.grid:
        raise ShapeError(f"grid mismatch: {a.grid} vs {b.grid}")


def pointwise(a, b, op: str, eps: float = EPS_DIV):
    """Elementwise ``mul``, ``add``, ``sub`` or ``safe_div`` of two fields on one grid.

    ``safe_div`` returns 0 wherever ``|b| < eps``. The result keeps the
    container type and tag of ``a``; a product of two binary fields stays
    binary.
    """
    _same_grid(a, b)
    x, y = a.values, b.values
    if op == "mul":
        out = x * y
    elif op == "add":
        out = x + y
    elif op == "sub":
        out = x - y
    elif op == "safe_div":
        out = safe_divide(x, y, eps)
    else:
        raise ValueError(f"unknown pointwise op {op!r}")

    if isinstance(a, Image):
        if op == "mul" and a.unit is b.unit is Unit.BINARY:
            unit = Unit.BINARY
        elif a.unit in (Unit.HU, Unit.ATTENUATION):
            unit = a.unit
        else:
            unit = Unit.ATTENUATION
        return Image(a.grid, out, unit)
    if op == "mul" and a.kind is b.kind is SinoKind.TRACE:
        kind = SinoKind.TRACE
    elif a.kind is SinoKind.TRACE:
        kind = SinoKind.RAW
    else:
        kind = a.kind
    return Sinogram(a.grid, out, kind)


def safe_divide(x: np.ndarray, y: np.ndarray, eps: float = EPS_DIV) -> np.ndarray:
    """Array-level ``x / y`` with 0 where ``|y| < eps``."""
    ok = np.abs(y) >= eps
    out = np.zeros(np.broadcast(x, y).shape)
    np.divide(x, y, out=out, where=ok)
    return out
