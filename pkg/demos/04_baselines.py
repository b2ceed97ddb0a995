"""Linear interpolation and normalized interpolation inside the metal trace.

Run: python demos/04_baselines.py
"""
import numpy as np

from dudomar import MetalSpec, SpectrumConfig, compute_metal_trace, li_correct, nmar_correct, psnr, simulate_artifacts
from dudomar.baselines import dilate_trace, interpolate_trace
from dudomar.prior import PriorConfig, build_prior
from dudomar.suite import SuiteConfig, body_phantom, implant_masks

# %% Along each view, trace bins are bridged linearly between their untouched neighbors.
column = np.array([[0.0], [0.0], [10.0], [99.0], [99.0], [99.0], [20.0], [0.0], [0.0]])
flags = np.zeros_like(column)
flags[3:6] = 1
print("interpolated bins 3-5:", interpolate_trace(column, flags)[3:6, 0].tolist())

# %% On the bundled suite's largest implant.
cfg = SuiteConfig()
geom = cfg.geometry()
clean = body_phantom(cfg.grid)
mask = implant_masks(cfg.grid)[0]
metal = MetalSpec(mask, cfg.metal_hu)
sim = simulate_artifacts(clean, metal, SpectrumConfig.default(cfg.photon_count), geom, seed=0, filt=cfg.filt)
trace = dilate_trace(compute_metal_trace(metal, geom), 1)

y_li, x_li = li_correct(sim.y, trace, geom, cfg.filt)
_, y_tilde = build_prior(x_li, geom, PriorConfig(), mask)
_, x_nmar = nmar_correct(sim.y, trace, x_li, geom, filt=cfg.filt, y_tilde=y_tilde)
for name, img in (("input", sim.x_ma), ("LI", x_li), ("NMAR", x_nmar)):
    print(f"{name:6s} PSNR {psnr(img, clean, exclude_mask=mask):.2f} dB")
