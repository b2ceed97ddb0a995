"""Phantoms, metal insertion and polychromatic metal-artifact simulation."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import io
from .grids import MU_WATER, Image, ImageGrid, SinoKind, Sinogram, Unit, ValidationError, hu_to_mu, mu_to_hu
from .projector import ProjectionGeometry, RampFilter, _project_array, fbp

TRACE_THRESHOLD = 0.0
METAL_HU = 3000.0

# Ten-ellipse Shepp-Logan head: (x0, y0, a, b, angle_deg, density)
SHEPP_LOGAN_ELLIPSES = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.605, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
)


@dataclass(frozen=True)
class SpectrumConfig:
    """Discrete X-ray spectrum and per-material energy scaling.

    ``material_curves[m][e]`` multiplies the reference attenuation of
    material ``m`` (``water``, ``bone`` or ``metal``) in energy bin ``e``.
    The reference attenuation is the one given by ``hu_to_mu``.
    """

    energy_bins: tuple[tuple[float, float], ...]
    material_curves: dict = field(default_factory=dict)
    photon_count: float = 0.0

    def __post_init__(self):
        if len(self.energy_bins) < 1:
            raise ValidationError("spectrum needs at least one energy bin")
        weights = np.array([w for _, w in self.energy_bins], dtype=float)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValidationError(f"spectrum weights must be >= 0 and sum to 1, got {weights.sum()!r}")
        if self.photon_count < 0:
            raise ValidationError("photon_count must be >= 0")
        curves = dict(self.material_curves)
        for mat in ("water", "bone", "metal"):
            curve = np.asarray(curves.setdefault(mat, (1.0,) * len(self.energy_bins)), dtype=float)
            if curve.shape != (len(self.energy_bins),):
                raise ValidationError(f"material curve '{mat}' needs {len(self.energy_bins)} entries")
            if np.any(curve < 0):
                raise ValidationError(f"material curve '{mat}' has negative entries")
        object.__setattr__(self, "material_curves", {k: tuple(map(float, v)) for k, v in curves.items()})

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.energy_bins], dtype=float)

    @classmethod
    def monochromatic(cls, photon_count: float = 0.0) -> "SpectrumConfig":
        return cls(((70.0, 1.0),), {}, photon_count)

    @classmethod
    def default(cls, photon_count: float = 0.0) -> "SpectrumConfig":
        """Five-bin spectrum with the 70 keV bin as reference energy.

        Scaling curves follow the shape of tabulated mass attenuation of
        water, cortical bone and a titanium-like metal.
        """
        return cls(
            ((40.0, 0.12), (55.0, 0.26), (70.0, 0.28), (85.0, 0.21), (100.0, 0.13)),
            {
                "water": (1.39, 1.11, 1.0, 0.94, 0.89),
                "bone": (2.30, 1.45, 1.0, 0.80, 0.70),
                "metal": (4.00, 1.90, 1.0, 0.65, 0.50),
            },
            photon_count,
        )


@dataclass(frozen=True)
class MetalSpec:
    mask: Image
    metal_hu: float = METAL_HU

    def __post_init__(self):
        if self.mask.unit is not Unit.BINARY:
            raise ValidationError("metal mask must be a Binary image")

    @classmethod
    def empty(cls, grid: ImageGrid) -> "MetalSpec":
        return cls(Image.full(grid, 0.0, Unit.BINARY))

    @property
    def size(self) -> int:
        return int(self.mask.values.sum())


@dataclass(frozen=True)
class SimulationResult:
    y: Sinogram
    x_ma: Image
    x_gt: Image
    y_gt: Sinogram


def _unit_coords(grid: ImageGrid):
    """Pixel-center coordinates scaled to [-1, 1] across the larger side, y up."""
    half = max(grid.height, grid.width) / 2.0
    x = (np.arange(grid.width) - (grid.width - 1) / 2.0) / half
    y = ((grid.height - 1) / 2.0 - np.arange(grid.height)) / half
    return np.meshgrid(x, y)


def ellipse_image(grid: ImageGrid, ellipses, background: float = 0.0) -> np.ndarray:
    """Sum of uniform ellipses ``(x0, y0, a, b, angle_deg, value)`` sampled at pixel centers."""
    xx, yy = _unit_coords(grid)
    out = np.full(grid.shape, float(background))
    for x0, y0, a, b, ang, val in ellipses:
        phi = np.deg2rad(ang)
        dx, dy = xx - x0, yy - y0
        u = dx * np.cos(phi) + dy * np.sin(phi)
        v = -dx * np.sin(phi) + dy * np.cos(phi)
        out[(u / a) ** 2 + (v / b) ** 2 <= 1.0] += val
    return out


def make_phantom(kind: str, grid: ImageGrid, params=None) -> Image:
    """Build a deterministic HU phantom.

    kind : {"SheppLogan", "Discs", "FromFile"}
        ``SheppLogan`` is the original ten-ellipse head mapped to HU by
        ``1000 * (density - 1)`` (outside -1000, skull 1000, brain 20).
        ``Discs`` takes ``params`` as a sequence of ``(x0, y0, r, hu)`` in
        normalized coordinates over a -1000 HU background; overlapping
        discs are painted in order. ``FromFile`` reads the raw field at
        path ``params``.
    """
    if kind == "SheppLogan":
        density = ellipse_image(grid, SHEPP_LOGAN_ELLIPSES)
        return Image(grid, 1000.0 * (density - 1.0), Unit.HU)
    if kind == "Discs":
        values = np.full(grid.shape, -1000.0)
        xx, yy = _unit_coords(grid)
        for x0, y0, r, hu in params or ():
            values[(xx - x0) ** 2 + (yy - y0) ** 2 <= r * r] = hu
        return Image(grid, values, Unit.HU)
    if kind == "FromFile":
        img = io.load_image(params, unit=Unit.HU, pixel_size=grid.pixel_size)
        if img.grid != grid:
            raise ValidationError(f"phantom file is {img.grid.shape}, expected {grid.shape}")
        return img
    raise ValueError(f"unknown phantom kind {kind!r}")


def compute_metal_trace(metal: MetalSpec, geom: ProjectionGeometry, threshold: float = TRACE_THRESHOLD) -> Sinogram:
    """Binary sinogram marking every ray with metal path length above ``threshold``."""
    if metal.mask.grid != geom.image_grid:
        raise ValidationError("metal mask grid does not match the geometry")
    path = _project_array(metal.mask.values, geom)
    return Sinogram(geom.sino_grid, (path > threshold).astype(np.float64), SinoKind.TRACE)


def material_projections(clean: Image, metal: MetalSpec, geom: ProjectionGeometry, mu_water: float = MU_WATER):
    """Reference-energy projections of the water-like, bone-like and metal parts.

    Non-metal pixels between 0 and 1000 HU are split linearly between the
    water-like and bone-like materials.
    """
    inside = metal.mask.values > 0
    mu = hu_to_mu(clean, mu_water).values
    bone_frac = np.clip(clean.values / 1000.0, 0.0, 1.0)
    water = np.where(inside, 0.0, (1.0 - bone_frac) * mu)
    bone = np.where(inside, 0.0, bone_frac * mu)
    metal_mu = np.where(inside, mu_water * (1.0 + metal.metal_hu / 1000.0), 0.0)
    return tuple(_project_array(part, geom) for part in (water, bone, metal_mu))


def _poisson_views(expected: np.ndarray, seed) -> np.ndarray:
    streams = np.random.SeedSequence(seed).spawn(expected.shape[1])
    counts = np.empty_like(expected)
    for v, ss in enumerate(streams):
        counts[:, v] = np.random.default_rng(ss).poisson(expected[:, v])
    return counts


def polychromatic_sinogram(parts, spectrum: SpectrumConfig, seed=0) -> np.ndarray:
    """``-log`` of the spectrum-weighted transmission, optionally with Poisson noise."""
    water, bone, metal = parts
    curves = spectrum.material_curves
    if len(spectrum.energy_bins) == 1 and spectrum.photon_count == 0:
        return curves["water"][0] * water + curves["bone"][0] * bone + curves["metal"][0] * metal
    trans = np.zeros_like(water)
    for e, w in enumerate(spectrum.weights):
        line = curves["water"][e] * water + curves["bone"][e] * bone + curves["metal"][e] * metal
        trans += w * np.exp(-line)
    if spectrum.photon_count > 0:
        n0 = spectrum.photon_count
        counts = _poisson_views(n0 * trans, seed)
        trans = np.maximum(counts, 1.0) / n0
    return -np.log(trans)


def simulate_artifacts(clean: Image, metal: MetalSpec, spectrum: SpectrumConfig, geom: ProjectionGeometry,
                       seed=0, mu_water: float = MU_WATER, filt: RampFilter | None = None) -> SimulationResult:
    """Synthesize the metal-corrupted sinogram and its reconstruction.

    The metal mask overwrites ``clean`` inside the implant. With a single
    energy bin, no noise and an empty mask, ``y`` equals ``y_gt`` exactly.
    """
    if clean.unit is not Unit.HU:
        raise ValidationError("clean phantom must be in HU")
    if clean.grid != geom.image_grid or metal.mask.grid != geom.image_grid:
        raise ValidationError("phantom and mask grids must match the geometry")
    y_gt = _project_array(hu_to_mu(clean, mu_water).values, geom)
    y = polychromatic_sinogram(material_projections(clean, metal, geom, mu_water), spectrum, seed)
    y_sino = Sinogram(geom.sino_grid, y)
    x_ma = mu_to_hu(fbp(y_sino, geom, filt), mu_water)
    return SimulationResult(y_sino, x_ma, clean, Sinogram(geom.sino_grid, y_gt))
