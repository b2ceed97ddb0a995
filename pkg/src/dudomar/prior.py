"""Prior image and normalization coefficient.

The prior is built in two steps: a tissue-classified coarse image
(k-means thresholds on a smoothed LI image; air -> -1000 HU, soft tissue
-> 0 HU, bone kept), then a pixel-wise weight map applied in attenuation
space. The weight map stands in for a learned refinement network and
defaults to all ones.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.cluster import KMeans

from .grids import EPS_DIV, MU_WATER, Image, ShapeError, SinoKind, Sinogram, Unit, ValidationError, hu_to_mu
from .projector import ProjectionGeometry, _project_array

log = logging.getLogger(__name__)

AIR_HU = -1000.0
SOFT_TISSUE_HU = 0.0
FALLBACK_THRESHOLDS = (-500.0, 300.0)


@dataclass(frozen=True)
class PriorConfig:
    sigma: float = 1.5
    k: int = 3
    seed: int = 0
    n_init: int = 20
    max_iter: int = 100
    weights: Image | None = None


def kmeans_thresholds(values: np.ndarray, k: int = 3, seed: int = 0, n_init: int = 20,
                      max_iter: int = 100) -> tuple[float, float] | None:
    """Air/soft-tissue and soft-tissue/bone thresholds from 1-D k-means.

    Thresholds are midpoints between consecutive sorted cluster centers.
    Returns None when the data hold fewer than ``k`` distinct values.
    """
    if k != 3:
        raise ValidationError("tissue classification uses exactly 3 clusters")
    values = np.asarray(values, dtype=np.float64).ravel()
    if np.unique(values).size < k:
        return None
    km = KMeans(n_clusters=k, n_init=n_init, max_iter=max_iter, random_state=seed)
    km.fit(values[:, None])
    c = np.sort(km.cluster_centers_.ravel())
    return float((c[0] + c[1]) / 2.0), float((c[1] + c[2]) / 2.0)


def classify_tissue(smoothed: np.ndarray, t_air: float, t_bone: float) -> np.ndarray:
    out = np.where(smoothed < t_air, AIR_HU, SOFT_TISSUE_HU)
    return np.where(smoothed >= t_bone, smoothed, out)


def coarse_prior(x_li: Image, sigma: float = 1.5, k: int = 3, seed: int = 0,
                 metal_mask: Image | None = None, n_init: int = 20, max_iter: int = 100) -> Image:
    """Tissue-classified prior image in HU.

    Pixels inside ``metal_mask`` are set to soft tissue after
    classification; their value does not matter for normalization as long
    as it is finite and not air.
    """
    if x_li.unit is not Unit.HU:
        raise ValidationError("coarse_prior expects an HU image")
    if sigma < 0:
        raise ValidationError("sigma must be >= 0")
    smoothed = ndimage.gaussian_filter(x_li.values, sigma) if sigma > 0 else x_li.values.copy()
    thresholds = kmeans_thresholds(smoothed, k, seed, n_init, max_iter)
    if thresholds is None:
        warnings.warn("degenerate image for k-means; using fixed thresholds (-500, 300) HU", RuntimeWarning)
        thresholds = FALLBACK_THRESHOLDS
    log.debug("prior thresholds: air < %.1f HU, bone >= %.1f HU", *thresholds)
    out = classify_tissue(smoothed, *thresholds)
    if metal_mask is not None:
        if metal_mask.grid != x_li.grid:
            raise ShapeError("metal mask grid does not match the image")
        out = np.where(metal_mask.values > 0, SOFT_TISSUE_HU, out)
    return Image(x_li.grid, out, Unit.HU)


def refine_prior(coarse: Image, weights: Image, mu_water: float = MU_WATER) -> Image:
    """Scale the prior's attenuation pixel-wise by ``weights``; unit weights leave pixels untouched."""
    if coarse.grid != weights.grid:
        raise ShapeError("weight map grid does not match the prior")
    if weights.unit is not Unit.WEIGHT:
        raise ValidationError("refine_prior expects a Weight image")
    w = weights.values
    mu = hu_to_mu(coarse, mu_water).values * w
    scaled = 1000.0 * (mu / mu_water - 1.0)
    return Image(coarse.grid, np.where(w == 1.0, coarse.values, scaled), Unit.HU)


def normalization_coefficient(x_tilde: Image, geom: ProjectionGeometry, mu_water: float = MU_WATER) -> Sinogram:
    """Forward projection of the prior's attenuation."""
    if x_tilde.grid != geom.image_grid:
        raise ShapeError("prior grid does not match the geometry")
    mu = hu_to_mu(x_tilde, mu_water).values
    return Sinogram(geom.sino_grid, _project_array(mu, geom), SinoKind.RAW)


def build_prior(x_li: Image, geom: ProjectionGeometry, cfg: PriorConfig = PriorConfig(),
                metal_mask: Image | None = None, mu_water: float = MU_WATER) -> tuple[Image, Sinogram]:
    """Coarse prior, optional weight refinement, and its projection ``(x_tilde, y_tilde)``."""
    x_tilde = coarse_prior(x_li, cfg.sigma, cfg.k, cfg.seed, metal_mask, cfg.n_init, cfg.max_iter)
    if cfg.weights is not None:
        x_tilde = refine_prior(x_tilde, cfg.weights, mu_water)
    return x_tilde, normalization_coefficient(x_tilde, geom, mu_water)


def support(y_tilde: Sinogram | np.ndarray, eps: float = EPS_DIV) -> np.ndarray:
    values = y_tilde.values if isinstance(y_tilde, Sinogram) else y_tilde
    return values > eps
