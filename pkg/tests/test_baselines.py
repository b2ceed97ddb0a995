import numpy as np
import pytest

from dudomar.baselines import dilate_trace, interpolate_trace, li_correct, nmar_correct
from dudomar.grids import EPS_DIV, Image, ImageGrid, ShapeError, SinoKind, Sinogram, SinogramGrid, Unit
from dudomar.prior import normalization_coefficient
from dudomar.projector import ProjectionGeometry
from dudomar.simulate import MetalSpec, SpectrumConfig, compute_metal_trace, make_phantom, simulate_artifacts


def test_interpolation_example_bins_3_to_5():
    y = np.zeros((9, 1))
    y[2, 0], y[6, 0] = 10.0, 20.0
    tr = np.zeros((9, 1))
    tr[3:6, 0] = 1
    out = interpolate_trace(y, tr)
    assert out[3:6, 0].tolist() == [12.5, 15.0, 17.5]


def test_boundary_trace_extrapolates_constant():
    y = np.arange(6.0)[:, None] + 6
    tr = np.zeros((6, 1))
    tr[0] = 1
    assert interpolate_trace(y, tr)[0, 0] == 7.0


def test_fully_traced_view_uses_mean():
    y = np.array([[1.0, 5.0], [3.0, 6.0]])
    tr = np.array([[1.0, 0.0], [1.0, 0.0]])
    with pytest.warns(RuntimeWarning, match="fully traced"):
        out = interpolate_trace(y, tr)
    assert np.array_equal(out[:, 0], [2.0, 2.0])
    assert np.array_equal(out[:, 1], y[:, 1])


def test_dilate_trace_along_bins_only():
    sg = SinogramGrid(7, 3, 1.0)
    v = np.zeros(sg.shape)
    v[3, 1] = 1
    grown = dilate_trace(Sinogram(sg, v, SinoKind.TRACE), 1).values
    assert np.flatnonzero(grown[:, 1]).tolist() == [2, 3, 4]
    assert not grown[:, 0].any() and not grown[:, 2].any()
    assert dilate_trace(Sinogram(sg, v, SinoKind.TRACE), 0).values is not grown


@pytest.fixture(scope="module")
def case():
    g = ImageGrid(48, 48, 0.5)
    geom = ProjectionGeometry.parallel(g, 60)
    clean = make_phantom("Discs", g, [(0, 0, 0.8, 20.0), (0.35, 0.1, 0.15, 800.0), (-0.3, -0.3, 0.12, 500.0)])
    mask = Image(g, make_phantom("Discs", g, [(0.0, 0.3, 0.1, 1.0)]).values > 0, Unit.BINARY)
    metal = MetalSpec(mask)
    sim = simulate_artifacts(clean, metal, SpectrumConfig.default(), geom)
    return geom, clean, mask, sim, compute_metal_trace(metal, geom)


def test_li_without_trace_is_identity(case):
    geom, _, _, sim, tr = case
    y_li, x_li = li_correct(sim.y, Sinogram.zeros(tr.grid, SinoKind.TRACE), geom)
    assert np.array_equal(y_li.values, sim.y.values)
    assert x_li.unit is Unit.HU


def test_li_preserves_data_outside_trace(case):
    geom, _, _, sim, tr = case
    for dilate in (0, 1):
        y_li, _ = li_correct(sim.y, tr, geom, dilate=dilate)
        keep = dilate_trace(tr, dilate).values == 0
        assert np.array_equal(y_li.values[keep], sim.y.values[keep])


def test_li_rejects_grid_mismatch(case):
    geom, _, _, sim, _ = case
    with pytest.raises(ShapeError):
        li_correct(sim.y, Sinogram.zeros(SinogramGrid(5, 5, 30.0), SinoKind.TRACE), geom)


def test_nmar_without_trace_is_identity(case):
    geom, _, _, sim, tr = case
    _, x_li = li_correct(sim.y, tr, geom)
    empty = Sinogram.zeros(tr.grid, SinoKind.TRACE)
    y_n, _ = nmar_correct(sim.y, empty, x_li, geom)
    assert np.array_equal(y_n.values, sim.y.values)


def test_nmar_preserves_data_outside_trace(case):
    geom, _, mask, sim, tr = case
    _, x_li = li_correct(sim.y, tr, geom)
    y_n, _ = nmar_correct(sim.y, tr, x_li, geom, metal_mask=mask)
    keep = tr.values == 0
    assert np.abs(y_n.values[keep] - sim.y.values[keep]).max() <= 1e-9


def test_nmar_with_exact_prior_recovers_clean_sinogram(case):
    geom, clean, mask, _, tr = case
    # metal-free measurement inside the trace is what an exact prior lets NMAR restore
    mono = simulate_artifacts(clean, MetalSpec(mask), SpectrumConfig.monochromatic(), geom)
    exact = Image(clean.grid, np.where(mask.values > 0, 0.0, clean.values), Unit.HU)
    y_tilde = normalization_coefficient(exact, geom)
    _, x_li = li_correct(mono.y, tr, geom)
    y_n, _ = nmar_correct(mono.y, tr, x_li, geom, y_tilde=y_tilde)
    inside = tr.values > 0
    y_ref = normalization_coefficient(exact, geom).values
    rel = np.abs(y_n.values[inside] - y_ref[inside]) / np.maximum(y_ref[inside], EPS_DIV)
    assert rel.max() <= 0.01


def test_nmar_with_uniform_prior_is_li(case):
    geom, _, _, sim, tr = case
    y_li, x_li = li_correct(sim.y, tr, geom)
    y_n, _ = nmar_correct(sim.y, tr, x_li, geom, y_tilde=Sinogram(tr.grid, np.full(tr.grid.shape, 2.5)))
    assert np.allclose(y_n.values, y_li.values, rtol=0, atol=1e-12)
