"""Tissue prior from the LI image and the normalized sinogram it induces.

Run: python demos/03_prior_and_normalization.py
"""
import numpy as np
from scipy import ndimage

from dudomar import (Image, MetalSpec, PriorConfig, SpectrumConfig, Unit, build_prior, compute_metal_trace,
                     li_correct, simulate_artifacts)
from dudomar.baselines import dilate_trace
from dudomar.prior import kmeans_thresholds, support
from dudomar.suite import SuiteConfig, body_phantom, implant_masks

cfg = SuiteConfig()
geom = cfg.geometry()
clean = body_phantom(cfg.grid)
mask = implant_masks(cfg.grid)[1]
metal = MetalSpec(mask, cfg.metal_hu)
sim = simulate_artifacts(clean, metal, SpectrumConfig.default(cfg.photon_count), geom, seed=1, filt=cfg.filt)
trace = dilate_trace(compute_metal_trace(metal, geom), 1)
y_li, x_li = li_correct(sim.y, trace, geom, cfg.filt)

# %% Smooth, cluster into air / soft tissue / bone, flatten air and soft tissue.
lo, hi = kmeans_thresholds(ndimage.gaussian_filter(x_li.values, 1.5))
print(f"k-means thresholds: {lo:.0f} HU and {hi:.0f} HU")
x_prior, y_tilde = build_prior(x_li, geom, PriorConfig(), mask)
v = x_prior.values
print(f"prior: {np.sum(v == -1000)} air px, {np.sum(v == 0)} soft-tissue px, {np.sum(v > 0)} bone px kept as is")

# %% Dividing by the prior's projection leaves a near-flat sinogram off the metal trace.
# Rays that only graze the body have a tiny Y~, so the ratio is taken where Y~ is not negligible.
sup = support(y_tilde) & (trace.values == 0) & (y_tilde.values > 0.05 * y_tilde.values.max())
ratio = y_li.values[sup] / y_tilde.values[sup]
print(f"Y    : relative stdev {y_li.values[sup].std() / y_li.values[sup].mean():.3f}")
print(f"Y/Y~ : relative stdev {ratio.std() / ratio.mean():.3f}")

# %% A pixel-wise weight map rescales the prior's attenuation (all ones = unchanged).
weights = Image(cfg.grid, np.full(cfg.grid.shape, 1.1), Unit.WEIGHT)
_, y_tilde_w = build_prior(x_li, geom, PriorConfig(weights=weights), mask)
print(f"weights 1.1 scale Y~ by {np.median(y_tilde_w.values[sup] / y_tilde.values[sup]):.3f}")
