"""Linear-interpolation and normalized MAR baselines."""

from __future__ import annotations

import warnings

import numpy as np
from scipy import ndimage

from .grids import EPS_DIV, MU_WATER, Image, ShapeError, SinoKind, Sinogram, Unit, mu_to_hu, safe_divide
from .prior import PriorConfig, build_prior
from .projector import ProjectionGeometry, RampFilter, fbp


def dilate_trace(tr: Sinogram, bins: int = 1) -> Sinogram:
    """Grow the trace by ``bins`` detector bins on each side, per view."""
    if bins <= 0:
        return tr
    structure = np.zeros((2 * bins + 1, 1), dtype=bool)
    structure[:, 0] = True
    grown = ndimage.binary_dilation(tr.values > 0, structure=structure)
    return Sinogram(tr.grid, grown.astype(np.float64), SinoKind.TRACE)


def interpolate_trace(values: np.ndarray, trace: np.ndarray) -> np.ndarray:
    """Fill traced bins of every view by linear interpolation along the bin axis.

    Values beyond the outermost valid bins are extended as constants. A view
    whose bins are all traced is filled with its mean.
    """
    out = np.array(values, dtype=np.float64, copy=True)
    bins = np.arange(values.shape[0])
    traced = trace > 0
    for v in np.flatnonzero(traced.any(axis=0)):
        bad = traced[:, v]
        good = ~bad
        if not good.any():
            warnings.warn(f"view {v} is fully traced; filling with the view mean", RuntimeWarning)
            out[:, v] = values[:, v].mean()
            continue
        out[bad, v] = np.interp(bins[bad], bins[good], values[good, v])
    return out


def _check(y: Sinogram, tr: Sinogram):
    if y.grid != tr.grid:
        raise ShapeError("sinogram and trace grids differ")


def li_correct(y: Sinogram, tr: Sinogram, geom: ProjectionGeometry, filt: RampFilter | None = None,
               dilate: int = 0, mu_water: float = MU_WATER) -> tuple[Sinogram, Image]:
    """Linear interpolation MAR. Returns ``(y_li, x_li)`` with ``x_li`` in HU."""
    _check(y, tr)
    tr = dilate_trace(tr, dilate)
    y_li = Sinogram(y.grid, interpolate_trace(y.values, tr.values), y.kind)
    return y_li, mu_to_hu(fbp(y_li, geom, filt), mu_water)


def nmar_correct(y: Sinogram, tr: Sinogram, x_li: Image, geom: ProjectionGeometry,
                 prior_cfg: PriorConfig = PriorConfig(), metal_mask: Image | None = None,
                 filt: RampFilter | None = None, dilate: int = 0, mu_water: float = MU_WATER,
                 y_tilde: Sinogram | None = None) -> tuple[Sinogram, Image]:
    """Normalized MAR: interpolate ``y / y_tilde`` over the trace, then denormalize.

    ``y_tilde`` defaults to the projection of the tissue-classified prior
    built from ``x_li``. Outside the trace the input sinogram is returned
    unchanged.
    """
    _check(y, tr)
    tr = dilate_trace(tr, dilate)
    if y_tilde is None:
        _, y_tilde = build_prior(x_li, geom, prior_cfg, metal_mask, mu_water)
    yt = y_tilde.values
    s_norm = safe_divide(y.values, yt, EPS_DIV)
    filled = interpolate_trace(s_norm, tr.values) * yt
    inside = tr.values > 0
    y_nmar = Sinogram(y.grid, np.where(inside, filled, y.values), y.kind)
    return y_nmar, mu_to_hu(fbp(y_nmar, geom, filt), mu_water)
