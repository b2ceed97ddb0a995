"""Forward projection, its adjoint, and filtered back-projection.

Run: python demos/01_projector_and_fbp.py
"""
import numpy as np

from dudomar import (Image, ImageGrid, ProjectionGeometry, RampFilter, Sinogram, back_project, fbp,
                     forward_project, hu_to_mu, make_phantom, mu_to_hu, operator_norm, psnr)
from dudomar.projector import FilterKind

# %% A 128x128 Shepp-Logan slice seen by 180 parallel views over a full turn.
grid = ImageGrid(128, 128, pixel_size=1.0)
geom = ProjectionGeometry.parallel(grid, n_views=180)
print("sinogram shape (bins, views):", geom.sino_grid.shape)

phantom = make_phantom("SheppLogan", grid)
sino = forward_project(hu_to_mu(phantom), geom)

# %% Each sinogram entry is a sum of exact ray/pixel intersection lengths times attenuation.
# The back-projector is the exact transpose, so <Px, y> = <x, P^T y>.
rng = np.random.default_rng(0)
x = Image(grid, rng.standard_normal(grid.shape))
y = Sinogram(geom.sino_grid, rng.standard_normal(geom.sino_grid.shape))
lhs = np.vdot(forward_project(x, geom).values, y.values)
rhs = np.vdot(x.values, back_project(y, geom).values)
print(f"adjoint gap: {abs(lhs - rhs) / abs(lhs):.1e}")

# %% Power iteration gives ||P||, which bounds the image-domain stepsize.
print(f"||P|| ~ {operator_norm(geom):.2f}")

# %% FBP with each ramp window.
for kind in FilterKind:
    rec = mu_to_hu(fbp(sino, geom, RampFilter(kind)))
    print(f"FBP {kind.value:>18s}: PSNR {psnr(rec, phantom):.2f} dB")
