"""Parallel-beam Radon transform, its exact adjoint, FBP and operator norm.

The projector is ray driven: entry ``(b, v)`` of the system matrix is the
length of the intersection of ray ``b`` at view ``v`` with a pixel square.
Back-projection applies the transpose of the very same weights, so
``<P x, y> == <x, P^T y>`` holds to rounding error.

Coordinates: the image is centered on the rotation axis, ``x`` grows with
the column index and ``y`` grows upward (towards row 0). Ray ``(b, v)`` is
the line ``x cos(theta_v) + y sin(theta_v) = t_b``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .grids import Image, ImageGrid, ShapeError, SinoKind, Sinogram, SinogramGrid, Unit, ValidationError

# Above this many stored weights the system matrix is not materialized.
_MAX_CACHED_NNZ = 30_000_000


class FilterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectionGeometry:
    image_grid: ImageGrid
    sino_grid: SinogramGrid
    detector_offset: float = 0.0

    def __post_init__(self):
        span = self.sino_grid.n_bins * self.sino_grid.bin_spacing
        if span < self.image_grid.diagonal * (1 - 1e-12):
            raise ValidationError(
                f"detector span {span:.4g} does not cover the image diagonal {self.image_grid.diagonal:.4g}"
            )

    @classmethod
    def parallel(cls, image_grid: ImageGrid, n_views: int, n_bins: int | None = None,
                 margin: float = 1.02, detector_offset: float = 0.0) -> "ProjectionGeometry":
        """Geometry whose ``n_bins`` detector bins span ``margin`` times the image diagonal.

        With ``n_bins=None`` the bin count is picked so that bins are about
        one pixel wide (rounded up to an odd number).
        """
        span = margin * image_grid.diagonal
        if n_bins is None:
            n_bins = int(np.ceil(span / image_grid.pixel_size))
            n_bins += 1 - n_bins % 2
        return cls(image_grid, SinogramGrid(n_bins, n_views, span / n_bins), detector_offset)

    def __eq__(self, other):
        if not isinstance(other, ProjectionGeometry):
            return NotImplemented
        return (self.image_grid, self.sino_grid, self.detector_offset) == (
            other.image_grid, other.sino_grid, other.detector_offset)

    def __hash__(self):
        return hash((self.image_grid, self.sino_grid, self.detector_offset))

    @property
    def n_weights_bound(self) -> int:
        g, s = self.image_grid, self.sino_grid
        return 2 * s.n_bins * s.n_views * max(g.height, g.width)

    def view_weights(self, view: int):
        """Nonzero system-matrix entries for one view.

        Returns ``(bins, pixels, lengths)`` where ``pixels`` are flat
        row-major image indices.
        """
        g = self.image_grid
        theta = self.sino_grid.view_angles[view]
        t = self.sino_grid.bin_centers + self.detector_offset
        c, s = np.cos(theta), np.sin(theta)
        if abs(c) >= abs(s):
            # march over pixel rows; the ray crosses at most two columns per row
            bins, rows, cols, lengths = _slab_weights(t, c, s, g.height, g.width, g.pixel_size)
        else:
            # same construction with the roles of x and y swapped: y = (t - x c) / s
            bins, cols, rows, lengths = _slab_weights(t, s, c, g.width, g.height, g.pixel_size,
                                                      flip_slabs=False, flip_cells=True)
        return bins, rows * g.width + cols, lengths

    @cached_property
    def _matrix(self):
        if self.n_weights_bound > _MAX_CACHED_NNZ:
            return None
        return system_matrix(self)


def _slab_weights(t, c, s, n_slabs, n_cells, ps, flip_slabs=True, flip_cells=False):
    """Exact ray/pixel intersection lengths, marching over slabs of pixels.

    The slab coordinate ``u`` runs across slabs (``u = y`` when marching over
    rows) and ``w`` along them; each ray is ``w = (t - u * s) / c`` with
    ``|c| >= |s|``. Inside one slab the ray spans less than one cell in ``w``
    and so touches at most two cells.
    """
    n_bins = t.size
    half_u, half_w = n_slabs * ps / 2.0, n_cells * ps / 2.0
    k = np.arange(n_slabs)
    # slab k spans u in [u_lo, u_lo + ps]; rows count down from the top when flip_slabs
    u_lo = (half_u - (k + 1) * ps) if flip_slabs else (-half_u + k * ps)
    w_a = (t[:, None] - u_lo[None, :] * s) / c
    w_b = (t[:, None] - (u_lo[None, :] + ps) * s) / c
    lo, hi = np.minimum(w_a, w_b), np.maximum(w_a, w_b)
    slab_len = ps / abs(c)
    width = hi - lo

    cell = np.floor((lo + half_w) / ps).astype(np.int64)
    edge = -half_w + (cell + 1) * ps
    first = np.minimum(hi, edge) - lo
    second = np.maximum(hi - edge, 0.0)
    with np.errstate(invalid="ignore", divide="ignore"):
        frac1 = np.where(width > 0, first / width, 1.0)
        frac2 = np.where(width > 0, second / width, 0.0)

    bins = np.broadcast_to(np.arange(n_bins)[:, None], lo.shape)
    slabs = np.broadcast_to(k[None, :], lo.shape)
    all_bins = np.concatenate([bins.ravel(), bins.ravel()])
    all_slabs = np.concatenate([slabs.ravel(), slabs.ravel()])
    all_cells = np.concatenate([cell.ravel(), cell.ravel() + 1])
    all_len = np.concatenate([frac1.ravel(), frac2.ravel()]) * slab_len
    keep = (all_len > 0) & (all_cells >= 0) & (all_cells < n_cells)
    all_cells = all_cells[keep]
    if flip_cells:
        # cells indexed by w = y increasing upward map to rows counted from the top
        all_cells = n_cells - 1 - all_cells
    return all_bins[keep], all_slabs[keep], all_cells, all_len[keep]


def system_matrix(geom: ProjectionGeometry) -> sp.csr_matrix:
    """Assemble P as a sparse ``(n_bins*n_views, H*W)`` matrix.

    Row index is ``bin * n_views + view`` (row-major sinogram layout).
    """
    nv = geom.sino_grid.n_views
    rows, cols, vals = [], [], []
    for v in range(nv):
        b, pix, w = geom.view_weights(v)
        rows.append(b * nv + v)
        cols.append(pix)
        vals.append(w)
    shape = (geom.sino_grid.n_bins * nv, geom.image_grid.height * geom.image_grid.width)
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=shape)
    return mat.tocsr()


def _project_array(x: np.ndarray, geom: ProjectionGeometry) -> np.ndarray:
    mat = geom._matrix
    nb, nv = geom.sino_grid.shape
    if mat is not None:
        return (mat @ x.ravel()).reshape(nb, nv)
    flat = x.ravel()
    out = np.empty((nb, nv))
    for v in range(nv):
        b, pix, w = geom.view_weights(v)
        out[:, v] = np.bincount(b, weights=w * flat[pix], minlength=nb)
    return out


def _backproject_array(y: np.ndarray, geom: ProjectionGeometry) -> np.ndarray:
    mat = geom._matrix
    shape = geom.image_grid.shape
    if mat is not None:
        return (mat.T @ y.ravel()).reshape(shape)
    out = np.zeros(shape[0] * shape[1])
    for v in range(geom.sino_grid.n_views):
        b, pix, w = geom.view_weights(v)
        out += np.bincount(pix, weights=w * y[b, v], minlength=out.size)
    return out.reshape(shape)


def forward_project(img: Image, geom: ProjectionGeometry) -> Sinogram:
    if img.grid != geom.image_grid:
        raise ShapeError(f"image grid {img.grid} does not match geometry {geom.image_grid}")
    return Sinogram(geom.sino_grid, _project_array(img.values, geom), SinoKind.RAW)


def back_project(sino: Sinogram, geom: ProjectionGeometry) -> Image:
    if sino.grid != geom.sino_grid:
        raise ShapeError(f"sinogram grid {sino.grid} does not match geometry {geom.sino_grid}")
    return Image(geom.image_grid, _backproject_array(sino.values, geom), Unit.ATTENUATION)


class FilterKind(enum.Enum):
    RAM_LAK = "RamLak"
    SHEPP_LOGAN = "SheppLoganWindow"
    HANN = "Hann"


@dataclass(frozen=True)
class RampFilter:
    kind: FilterKind = FilterKind.SHEPP_LOGAN
    cutoff: float = 1.0

    def __post_init__(self):
        if not 0 < self.cutoff <= 1:
            raise FilterError(f"cutoff must lie in (0, 1], got {self.cutoff}")

    def response(self, n_pad: int, spacing: float) -> np.ndarray:
        """Frequency response on an ``n_pad`` FFT grid, already scaled by ``spacing``.

        Built from the band-limited spatial ramp kernel so the DC term is
        right, then windowed.
        """
        n = np.rint(np.fft.fftfreq(n_pad) * n_pad).astype(np.int64)
        kernel = np.zeros(n_pad)
        kernel[n == 0] = 0.25
        odd = n % 2 == 1
        kernel[odd] = -1.0 / (np.pi * n[odd]) ** 2
        resp = np.real(np.fft.fft(kernel)) / spacing
        freq = np.abs(np.fft.fftfreq(n_pad))  # cycles/sample, Nyquist = 0.5
        rel = freq / (0.5 * self.cutoff)
        if self.kind is FilterKind.SHEPP_LOGAN:
            resp = resp * np.sinc(rel / 2.0)
        elif self.kind is FilterKind.HANN:
            resp = resp * 0.5 * (1.0 + np.cos(np.pi * np.minimum(rel, 1.0)))
        resp[rel > 1.0] = 0.0
        return resp


def ramp_filter(values: np.ndarray, spacing: float, filt: RampFilter) -> np.ndarray:
    """Filter every column (view) of a sinogram array along the bin axis."""
    nb = values.shape[0]
    if nb < 4:
        raise FilterError(f"ramp filtering needs at least 4 detector bins, got {nb}")
    n_pad = 1 << int(np.ceil(np.log2(2 * nb)))
    resp = filt.response(n_pad, spacing)
    spec = np.fft.rfft(values, n=n_pad, axis=0)
    out = np.fft.irfft(spec * resp[: n_pad // 2 + 1, None], n=n_pad, axis=0)
    return out[:nb]


def pixel_backproject(values: np.ndarray, geom: ProjectionGeometry) -> np.ndarray:
    """Pixel-driven back-projection: linear interpolation of each view at pixel centers.

    Unlike ``back_project`` this is not the transpose of P; it is the
    smearing step of FBP, free of the bin/pixel aliasing of ray-driven
    weights.
    """
    g = geom.image_grid
    ps = g.pixel_size
    x = (np.arange(g.width) - (g.width - 1) / 2.0) * ps
    y = ((g.height - 1) / 2.0 - np.arange(g.height)) * ps
    xx, yy = np.meshgrid(x, y)
    t = geom.sino_grid.bin_centers + geom.detector_offset
    out = np.zeros(g.shape)
    for v, theta in enumerate(geom.sino_grid.view_angles):
        out += np.interp(xx * np.cos(theta) + yy * np.sin(theta), t, values[:, v], left=0.0, right=0.0)
    return out


def fbp(sino: Sinogram, geom: ProjectionGeometry, filt: RampFilter | None = None) -> Image:
    """Filtered back-projection returning attenuation values.

    Views cover a full turn, so each line is seen twice; the ``pi / N_p``
    weight already accounts for that.
    """
    if sino.grid != geom.sino_grid:
        raise ShapeError(f"sinogram grid {sino.grid} does not match geometry {geom.sino_grid}")
    filt = filt or RampFilter()
    q = ramp_filter(sino.values, geom.sino_grid.bin_spacing, filt)
    scale = np.pi / geom.sino_grid.n_views
    return Image(geom.image_grid, scale * pixel_backproject(q, geom), Unit.ATTENUATION)


def operator_norm(geom: ProjectionGeometry, iters: int = 30, seed: int = 0) -> float:
    """Power-iteration estimate of the spectral norm of P.

    Returns ``sqrt`` of the Rayleigh quotient of ``P^T P`` at the last
    iterate, which can only grow with ``iters`` for a fixed seed.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(geom.image_grid.shape)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(iters):
        pv = _project_array(v, geom)
        est = float(np.sqrt(np.vdot(pv, pv)))
        w = _backproject_array(pv, geom)
        nrm = np.linalg.norm(w)
        if nrm == 0:
            return 0.0
        v = w / nrm
    pv = _project_array(v, geom)
    return max(est, float(np.sqrt(np.vdot(pv, pv))))
