"""Dual-domain proximal-gradient solver on the normalized sinogram and the image.

The joint problem is

    min_{S~, X} |P X - Y~ * S~|^2 + alpha |(1 - Tr) * (Y~ * S~ - Y)|^2
                + g1(S~) + g2(X)

with ``Y~`` the normalization coefficient. Each stage takes one gradient
step in ``S~`` followed by a proximal map, then one gradient step in ``X``
followed by a proximal map. The regularizers only enter through the
proximal operators. Images inside the solver are attenuation maps.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import io
from .baselines import li_correct
from .grids import (EPS_DIV, MU_WATER, Image, ShapeError, SinoKind, Sinogram, Unit, hu_to_mu, mu_to_hu,
                    safe_divide)
from .projector import ProjectionGeometry, _backproject_array, _project_array, operator_norm
from .prox import Domain, ProxOperator, prox_apply

log = logging.getLogger(__name__)

STEP_SAFETY = 0.9
DIVERGENCE_FACTOR = 10.0


class SolverDivergenceError(ArithmeticError):
    def __init__(self, stage: int, reason: str):
        super().__init__(f"solver diverged at stage {stage}: {reason}")
        self.stage = stage


@dataclass(frozen=True)
class SolverConfig:
    n_stages: int = 10
    eta1: float = 1.0
    eta2: float = 1.0
    alpha: float = 0.5
    prox_s: ProxOperator = field(default_factory=lambda: ProxOperator.identity(Domain.SINOGRAM))
    prox_x: ProxOperator = field(default_factory=lambda: ProxOperator.identity(Domain.IMAGE))
    auto_stepsize: bool = True

    def __post_init__(self):
        if self.n_stages < 0:
            raise ValueError("n_stages must be >= 0")
        if not (self.eta1 > 0 and self.eta2 > 0):
            raise ValueError("stepsizes must be positive")
        if self.alpha < 0:
            raise ValueError("alpha must be >= 0")
        if self.prox_s.domain is not Domain.SINOGRAM:
            raise ValueError("prox_s must act on the sinogram domain")
        if self.prox_x.domain is not Domain.IMAGE:
            raise ValueError("prox_x must act on the image domain")


@dataclass
class Stage:
    s_tilde: Sinogram
    s: Sinogram
    x: Image
    objective: float
    trace_residual: float


@dataclass
class StageTrace:
    """Per-stage record; entry 0 is the initialization."""

    stages: list[Stage]
    y_tilde: Sinogram
    eta1: float
    eta2: float

    def __len__(self):
        return len(self.stages)

    def __getitem__(self, n) -> Stage:
        return self.stages[n]

    @property
    def final(self) -> Stage:
        return self.stages[-1]

    @property
    def objectives(self) -> np.ndarray:
        return np.array([st.objective for st in self.stages])

    @property
    def trace_residuals(self) -> np.ndarray:
        return np.array([st.trace_residual for st in self.stages])

    def final_image_hu(self, mu_water: float = MU_WATER) -> Image:
        return mu_to_hu(self.final.x, mu_water)

    def save(self, directory, x_gt: Image | None = None, metal_mask: Image | None = None,
             mu_water: float = MU_WATER) -> Path:
        """Write per-stage fields and ``stages.csv`` (psnr only when ``x_gt`` is given)."""
        from .metrics import psnr

        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        io.save_sinogram(directory / "y_tilde", self.y_tilde)
        rows = []
        for n, st in enumerate(self.stages):
            sub = directory / f"stage_{n:02d}"
            io.save_sinogram(sub / "s_tilde", st.s_tilde)
            io.save_sinogram(sub / "s", st.s)
            io.save_image(sub / "x", st.x)
            value = ""
            if x_gt is not None:
                value = f"{psnr(mu_to_hu(st.x, mu_water), x_gt, exclude_mask=metal_mask):.6f}"
            rows.append((n, repr(st.objective), repr(st.trace_residual), value))
        with open(directory / "stages.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(("stage", "objective", "trace_residual", "psnr"))
            writer.writerows(rows)
        return directory


def _objective(px, s, y, tr, alpha):
    keep = 1.0 - tr
    return float(np.sum((px - s) ** 2) + alpha * np.sum((keep * (s - y)) ** 2))


def _trace_residual(s, y, tr):
    return float(np.linalg.norm((1.0 - tr) * (s - y)))


def objective(x: Image, s_tilde: Sinogram, y: Sinogram, y_tilde: Sinogram, tr: Sinogram, alpha: float,
              geom: ProjectionGeometry) -> float:
    """Data terms of the joint model; regularizers are excluded."""
    _check_sino(geom, s_tilde, y, y_tilde, tr)
    _check_image(geom, x)
    px = _project_array(x.values, geom)
    return _objective(px, y_tilde.values * s_tilde.values, y.values, tr.values, alpha)


def _check_sino(geom, *sinos):
    for s in sinos:
        if s.grid != geom.sino_grid:
            raise ShapeError(f"sinogram grid {s.grid} does not match geometry {geom.sino_grid}")


def _check_image(geom, *imgs):
    for im in imgs:
        if im.grid != geom.image_grid:
            raise ShapeError(f"image grid {im.grid} does not match geometry {geom.image_grid}")


def _s_update(s_prev, px, y, yt, tr, eta1, alpha, prox_s, supp):
    fit = yt * s_prev
    grad = yt * (fit - px) + alpha * (1.0 - tr) * yt * (fit - y)
    s_hat = s_prev - eta1 * grad
    return np.where(supp, prox_apply(prox_s, s_hat, Domain.SINOGRAM, supp), 0.0)


def _x_update(x_prev, px, target, eta2, prox_x, geom):
    x_hat = x_prev - eta2 * _backproject_array(px - target, geom)
    return prox_apply(prox_x, x_hat, Domain.IMAGE)


def s_tilde_step(s_prev: Sinogram, x_prev: Image, y: Sinogram, y_tilde: Sinogram, tr: Sinogram, eta1: float,
                 alpha: float, prox_s: ProxOperator, geom: ProjectionGeometry) -> Sinogram:
    """One normalized-sinogram update; entries where ``y_tilde`` vanishes are held at 0."""
    _check_sino(geom, s_prev, y, y_tilde, tr)
    _check_image(geom, x_prev)
    px = _project_array(x_prev.values, geom)
    supp = y_tilde.values > EPS_DIV
    out = _s_update(s_prev.values, px, y.values, y_tilde.values, tr.values, eta1, alpha, prox_s, supp)
    return Sinogram(geom.sino_grid, out, SinoKind.NORMALIZED)


def x_step(x_prev: Image, s_tilde_new: Sinogram, y_tilde: Sinogram, eta2: float, prox_x: ProxOperator,
           geom: ProjectionGeometry) -> Image:
    _check_sino(geom, s_tilde_new, y_tilde)
    _check_image(geom, x_prev)
    px = _project_array(x_prev.values, geom)
    out = _x_update(x_prev.values, px, y_tilde.values * s_tilde_new.values, eta2, prox_x, geom)
    return Image(geom.image_grid, out, Unit.ATTENUATION)


@lru_cache(maxsize=16)
def projector_lipschitz(geom: ProjectionGeometry, iters: int = 50, seed: int = 0) -> float:
    """``|P|^2`` by power iteration, cached per geometry."""
    return operator_norm(geom, iters, seed) ** 2


def stepsizes(cfg: SolverConfig, y_tilde: np.ndarray, geom: ProjectionGeometry) -> tuple[float, float]:
    """Stepsizes in effect for a run: fixed, or ``0.9 / L`` per block when ``auto_stepsize``.

    The sinogram block's Hessian is diagonal, ``2 Y~^2 (1 + alpha (1 - Tr))``,
    so its Lipschitz constant is bounded in closed form.
    """
    if not cfg.auto_stepsize:
        return cfg.eta1, cfg.eta2
    lip_s = 2.0 * float(np.max(y_tilde ** 2)) * (1.0 + cfg.alpha)
    lip_x = projector_lipschitz(geom)
    eta1 = STEP_SAFETY / lip_s if lip_s > 0 else cfg.eta1
    return eta1, STEP_SAFETY / lip_x


def _guard(n, obj, prev_obj, *arrays):
    for a in arrays:
        if not np.all(np.isfinite(a)):
            raise SolverDivergenceError(n, "non-finite values")
    if not np.isfinite(obj):
        raise SolverDivergenceError(n, "non-finite objective")
    if prev_obj > 0 and obj > DIVERGENCE_FACTOR * prev_obj:
        raise SolverDivergenceError(n, f"objective grew from {prev_obj:.4g} to {obj:.4g}")


def _initial(y, tr, geom, init, mu_water):
    if init is None:
        y_li, x_li = li_correct(y, tr, geom, mu_water=mu_water)
    else:
        y_li, x_li = init
    _check_sino(geom, y_li)
    _check_image(geom, x_li)
    x0 = x_li.values if x_li.unit is Unit.ATTENUATION else hu_to_mu(x_li, mu_water).values
    return y_li.values, x0


def run(y: Sinogram, tr: Sinogram, y_tilde: Sinogram, cfg: SolverConfig, geom: ProjectionGeometry,
        init: tuple[Sinogram, Image] | None = None, mu_water: float = MU_WATER) -> StageTrace:
    """Run ``cfg.n_stages`` stages from the LI warm start.

    ``init`` is ``(y_li, x_li)``; it is computed with ``li_correct`` when
    omitted. ``x_li`` may be given in HU or attenuation.
    """
    _check_sino(geom, y, tr, y_tilde)
    yt = y_tilde.values
    supp = yt > EPS_DIV
    if not supp.any():
        raise ValueError("normalization coefficient has empty support")
    y_li, x = _initial(y, tr, geom, init, mu_water)
    yv, trv = y.values, tr.values
    eta1, eta2 = stepsizes(cfg, yt, geom)
    log.debug("stepsizes eta1=%.4g eta2=%.4g", eta1, eta2)

    s_tilde = safe_divide(y_li, yt)
    px = _project_array(x, geom)
    stages = [_record(geom, s_tilde, yt * s_tilde, x, px, yv, trv, cfg.alpha)]
    for n in range(1, cfg.n_stages + 1):
        s_tilde = _s_update(s_tilde, px, yv, yt, trv, eta1, cfg.alpha, cfg.prox_s, supp)
        s = yt * s_tilde
        x = _x_update(x, px, s, eta2, cfg.prox_x, geom)
        px = _project_array(x, geom)
        stage = _record(geom, s_tilde, s, x, px, yv, trv, cfg.alpha, n, stages[-1].objective)
        stages.append(stage)
    return StageTrace(stages, y_tilde, eta1, eta2)


def _record(geom, s_tilde, s, x, px, y, tr, alpha, n=0, prev_obj=0.0) -> Stage:
    obj = _objective(px, s, y, tr, alpha)
    _guard(n, obj, prev_obj, s_tilde, x)
    return Stage(
        Sinogram(geom.sino_grid, s_tilde, SinoKind.NORMALIZED),
        Sinogram(geom.sino_grid, s, SinoKind.RAW),
        Image(geom.image_grid, x, Unit.ATTENUATION),
        obj,
        _trace_residual(s, y, tr),
    )


def run_degraded(y: Sinogram, tr: Sinogram, cfg: SolverConfig, geom: ProjectionGeometry,
                 init: tuple[Sinogram, Image] | None = None, mu_water: float = MU_WATER) -> StageTrace:
    """Same stage structure acting directly on the sinogram, without normalization.

    The recorded ``s_tilde`` equals ``s``; ``y_tilde`` is all ones.
    """
    _check_sino(geom, y, tr)
    s, x = _initial(y, tr, geom, init, mu_water)
    s = s.copy()
    yv, trv = y.values, tr.values
    ones = np.ones(geom.sino_grid.shape)
    eta1, eta2 = stepsizes(cfg, ones, geom)
    supp = np.ones(geom.sino_grid.shape, bool)

    px = _project_array(x, geom)
    stages = [_record(geom, s, s, x, px, yv, trv, cfg.alpha)]
    for n in range(1, cfg.n_stages + 1):
        s_hat = s - eta1 * ((s - px) + cfg.alpha * (1.0 - trv) * (s - yv))
        s = prox_apply(cfg.prox_s, s_hat, Domain.SINOGRAM, supp)
        x_hat = x - eta2 * _backproject_array(px - s, geom)
        x = prox_apply(cfg.prox_x, x_hat, Domain.IMAGE)
        px = _project_array(x, geom)
        stages.append(_record(geom, s, s, x, px, yv, trv, cfg.alpha, n, stages[-1].objective))
    return StageTrace(stages, Sinogram(geom.sino_grid, ones), eta1, eta2)


def default_betas(n_stages: int) -> np.ndarray:
    betas = np.full(n_stages + 1, 0.1)
    betas[-1] = 1.0
    return betas


def training_objective(trace: StageTrace, x_gt: Image, y_gt: Sinogram, m: Image, betas=None,
                       gamma: float = 0.1, mu_water: float = MU_WATER) -> float:
    """Stage-weighted image and sinogram fidelity, with metal pixels excluded from the image term.

    ``x_gt`` may be in HU or attenuation; it is compared in attenuation.
    """
    n = len(trace) - 1
    betas = default_betas(n) if betas is None else np.asarray(betas, dtype=float)
    if betas.shape != (n + 1,):
        raise ShapeError(f"betas must have length {n + 1}, got {betas.shape}")
    if x_gt.grid != trace[0].x.grid or m.grid != x_gt.grid:
        raise ShapeError("ground-truth image or mask grid does not match the trace")
    if y_gt.grid != trace[0].s.grid:
        raise ShapeError("ground-truth sinogram grid does not match the trace")
    gt = x_gt.values if x_gt.unit is Unit.ATTENUATION else hu_to_mu(x_gt, mu_water).values
    keep = 1.0 - m.values
    img_term = sum(b * np.sum(((st.x.values - gt) * keep) ** 2) for b, st in zip(betas, trace.stages))
    sino_term = sum(b * np.sum((st.s.values - y_gt.values) ** 2)
                    for b, st in zip(betas[1:], trace.stages[1:]))
    return float(img_term + gamma * sino_term)


def with_stages(cfg: SolverConfig, n_stages: int) -> SolverConfig:
    return replace(cfg, n_stages=n_stages)
