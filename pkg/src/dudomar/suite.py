"""Bundled desk-scale phantom suite: one pelvis phantom, ten metal implants.

Implant areas follow ten reference sizes (2061 ... 35 pixels on a 416
grid), rescaled to the suite grid. Implants are dense (8000 HU at the
reference energy) and the dose is low, so streaks dominate the input.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import dilate_trace, li_correct, nmar_correct
from .dualdomain import SolverConfig, StageTrace, run, run_degraded
from .grids import MU_WATER, Image, ImageGrid, Unit
from .metrics import psnr, ssim
from .prior import PriorConfig, build_prior
from .projector import ProjectionGeometry, RampFilter
from .prox import Domain, ProxOperator
from .simulate import MetalSpec, SpectrumConfig, compute_metal_trace, ellipse_image, simulate_artifacts

REFERENCE_SIZES = (2061, 890, 881, 451, 254, 124, 118, 112, 53, 35)
REFERENCE_GRID = 416

# (x0, y0, a, b, angle_deg, HU) painted in order over -1000 HU air
BODY_ELLIPSES = (
    (0.0, 0.0, 0.90, 0.64, 0.0, -100.0),     # subcutaneous fat
    (0.0, 0.0, 0.84, 0.58, 0.0, 40.0),       # soft tissue
    (0.0, 0.22, 0.17, 0.13, 0.0, 10.0),      # bladder
    (-0.18, 0.36, 0.05, 0.04, 0.0, -900.0),  # bowel gas
    (0.0, -0.12, 0.08, 0.07, 0.0, 60.0),     # rectum wall
    (0.45, -0.05, 0.17, 0.17, 0.0, 1000.0),  # femoral heads, cortical
    (-0.45, -0.05, 0.17, 0.17, 0.0, 1000.0),
    (0.45, -0.05, 0.12, 0.12, 0.0, 250.0),   # femoral heads, cancellous
    (-0.45, -0.05, 0.12, 0.12, 0.0, 250.0),
    (0.0, -0.40, 0.24, 0.11, 0.0, 800.0),    # sacrum
    (0.0, -0.40, 0.17, 0.07, 0.0, 250.0),
    (0.30, 0.30, 0.05, 0.05, 0.0, 90.0),     # enhancing lesion
    (-0.32, 0.25, 0.04, 0.04, 0.0, -40.0),   # hypodense lesion
)

# implant centers (normalized, y up) and aspect ratio; area set from the size list
IMPLANT_LAYOUT = (
    ((0.42, -0.30), 1.6, 30.0),
    ((-0.16, -0.40), 1.0, 0.0),
    ((0.16, -0.40), 1.0, 0.0),
    ((-0.45, 0.05), 2.0, -40.0),
    ((0.05, 0.35), 1.0, 0.0),
    ((-0.10, -0.42), 1.0, 0.0),
    ((0.10, -0.42), 1.0, 0.0),
    ((0.55, 0.05), 1.0, 0.0),
    ((-0.35, 0.35), 1.0, 0.0),
    ((0.25, -0.05), 1.0, 0.0),
)


def body_phantom(grid: ImageGrid) -> Image:
    values = np.full(grid.shape, -1000.0)
    for x0, y0, a, b, ang, hu in BODY_ELLIPSES:
        mask = ellipse_image(grid, [(x0, y0, a, b, ang, 1.0)]) > 0
        values[mask] = hu
    return Image(grid, values, Unit.HU)


def disc_phantom(grid: ImageGrid) -> Image:
    """Water disc with two bone inserts."""
    values = np.full(grid.shape, -1000.0)
    for x0, y0, a, b, ang, hu in ((0, 0, 0.8, 0.8, 0, 0.0), (0.35, 0.1, 0.12, 0.12, 0, 800.0),
                                  (-0.3, -0.25, 0.1, 0.1, 0, 600.0)):
        values[ellipse_image(grid, [(x0, y0, a, b, ang, 1.0)]) > 0] = hu
    return Image(grid, values, Unit.HU)


def implant_target_sizes(grid: ImageGrid) -> list[int]:
    """Pixel counts for the ten implants: rescaled reference areas.

    Counts are kept strictly decreasing where the grid allows it, so each
    case has its own size group; on very small grids they bottom out at 1.
    """
    scale = grid.height * grid.width / REFERENCE_GRID ** 2
    out = []
    for size in REFERENCE_SIZES:
        n = max(int(round(size * scale)), 1)
        if out and n >= out[-1]:
            n = max(out[-1] - 1, 1)
        out.append(n)
    return out


def implant_masks(grid: ImageGrid) -> list[Image]:
    """Ten elliptical implants with exactly ``implant_target_sizes`` pixels each.

    Each implant takes the pixels with the smallest elliptical radius around
    its center, so shapes stay elliptical while counts are exact.
    """
    half = max(grid.height, grid.width) / 2.0
    xx = (np.arange(grid.width) - (grid.width - 1) / 2.0) / half
    yy = ((grid.height - 1) / 2.0 - np.arange(grid.height)) / half
    xx, yy = np.meshgrid(xx, yy)
    masks = []
    for n, (center, aspect, ang) in zip(implant_target_sizes(grid), IMPLANT_LAYOUT):
        phi = np.deg2rad(ang)
        dx, dy = xx - center[0], yy - center[1]
        u = dx * np.cos(phi) + dy * np.sin(phi)
        v = -dx * np.sin(phi) + dy * np.cos(phi)
        r = (u / aspect) ** 2 + v ** 2
        order = np.lexsort((np.arange(r.size), r.ravel()))
        m = np.zeros(r.size)
        m[order[:n]] = 1.0
        masks.append(Image(grid, m.reshape(grid.shape), Unit.BINARY))
    return masks


@dataclass(frozen=True)
class SuiteConfig:
    size: int = 128
    pixel_size: float = 0.3
    n_views: int = 180
    photon_count: float = 2e4
    metal_hu: float = 8000.0
    seed: int = 0
    trace_dilation: int = 1
    filt: RampFilter = field(default_factory=RampFilter)
    prior: PriorConfig = field(default_factory=PriorConfig)
    solver: SolverConfig = field(default_factory=lambda: default_dual_config())

    @property
    def grid(self) -> ImageGrid:
        return ImageGrid(self.size, self.size, self.pixel_size)

    def geometry(self) -> ProjectionGeometry:
        return ProjectionGeometry.parallel(self.grid, self.n_views)


def default_dual_config(n_stages: int = 10) -> SolverConfig:
    return SolverConfig(
        n_stages=n_stages,
        alpha=0.5,
        prox_s=ProxOperator.identity(Domain.SINOGRAM),
        prox_x=ProxOperator.tv(0.001, 30, Domain.IMAGE),
    )


@dataclass
class CaseResult:
    index: int
    metal_size: int
    mask: Image
    x_gt: Image
    images: dict
    traces: dict

    def scores(self) -> dict:
        return {name: (psnr(img, self.x_gt, exclude_mask=self.mask), ssim(img, self.x_gt))
                for name, img in self.images.items()}


def run_case(index: int, cfg: SuiteConfig = SuiteConfig(), methods=("input", "li", "nmar", "dual", "degraded"),
             geom: ProjectionGeometry | None = None) -> CaseResult:
    """Simulate case ``index`` and run the requested corrections; images are returned in HU."""
    geom = geom or cfg.geometry()
    grid = cfg.grid
    clean = body_phantom(grid)
    mask = implant_masks(grid)[index]
    metal = MetalSpec(mask, cfg.metal_hu)
    sim = simulate_artifacts(clean, metal, SpectrumConfig.default(cfg.photon_count), geom,
                             seed=(cfg.seed, index), filt=cfg.filt)
    tr = compute_metal_trace(metal, geom)
    images, traces = {}, {}
    if "input" in methods:
        images["input"] = sim.x_ma
    y_li, x_li = li_correct(sim.y, tr, geom, cfg.filt, dilate=cfg.trace_dilation)
    tr_used = dilate_trace(tr, cfg.trace_dilation)
    if "li" in methods:
        images["li"] = x_li
    _, y_tilde = build_prior(x_li, geom, cfg.prior, mask)
    if "nmar" in methods:
        images["nmar"] = nmar_correct(sim.y, tr_used, x_li, geom, filt=cfg.filt, y_tilde=y_tilde)[1]
    if "dual" in methods:
        tr_dual = run(sim.y, tr_used, y_tilde, cfg.solver, geom, init=(y_li, x_li))
        traces["dual"] = tr_dual
        images["dual"] = tr_dual.final_image_hu(MU_WATER)
    if "degraded" in methods:
        tr_deg = run_degraded(sim.y, tr_used, cfg.solver, geom, init=(y_li, x_li))
        traces["degraded"] = tr_deg
        images["degraded"] = tr_deg.final_image_hu(MU_WATER)
    return CaseResult(index, metal.size, mask, clean, images, traces)


def run_suite(cfg: SuiteConfig = SuiteConfig(), cases=range(10), **kwargs) -> list[CaseResult]:
    geom = cfg.geometry()
    return [run_case(i, cfg, geom=geom, **kwargs) for i in cases]


def mean_scores(results: list[CaseResult]) -> dict:
    per = [r.scores() for r in results]
    return {name: (float(np.mean([p[name][0] for p in per])), float(np.mean([p[name][1] for p in per])))
            for name in per[0]}
