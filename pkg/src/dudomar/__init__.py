"""Dual-domain metal artifact reduction for parallel-beam CT.

Exact ray-driven projector with FBP, a polychromatic metal simulator,
LI/NMAR baselines, a tissue-classified prior for sinogram normalization,
and the staged proximal-gradient solver on the normalized sinogram and
image.
"""

from .baselines import li_correct, nmar_correct
from .dualdomain import SolverConfig, StageTrace, run, run_degraded, training_objective
from .grids import Image, ImageGrid, SinoKind, Sinogram, SinogramGrid, Unit, hu_to_mu, mu_to_hu
from .metrics import group_report, psnr, ssim
from .prior import PriorConfig, build_prior, coarse_prior, normalization_coefficient, refine_prior
from .projector import ProjectionGeometry, RampFilter, back_project, fbp, forward_project, operator_norm
from .prox import Domain, ProxOperator, prox_apply
from .simulate import MetalSpec, SpectrumConfig, compute_metal_trace, make_phantom, simulate_artifacts

__version__ = "0.1.0"

__all__ = [
    "Domain", "Image", "ImageGrid", "MetalSpec", "PriorConfig", "ProjectionGeometry", "ProxOperator",
    "RampFilter", "SinoKind", "Sinogram", "SinogramGrid", "SolverConfig", "SpectrumConfig", "StageTrace",
    "Unit", "back_project", "build_prior", "coarse_prior", "compute_metal_trace", "fbp", "forward_project",
    "group_report", "hu_to_mu", "li_correct", "make_phantom", "mu_to_hu", "nmar_correct",
    "normalization_coefficient", "operator_norm", "prox_apply", "psnr", "refine_prior", "run", "run_degraded",
    "simulate_artifacts", "ssim", "training_objective",
]
