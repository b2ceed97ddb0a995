import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dudomar.grids import (EPS_DIV, Image, ImageGrid, ShapeError, SinoKind, Sinogram, SinogramGrid, Unit,
                           ValidationError, hu_to_mu, mu_to_hu, pointwise)

G = ImageGrid(3, 4)


def hu(values):
    return Image(G, np.broadcast_to(np.asarray(values, float), G.shape), Unit.HU)


def test_grid_validation():
    with pytest.raises(ValueError):
        ImageGrid(0, 4)
    with pytest.raises(ValueError):
        ImageGrid(4, 4, 0.0)
    with pytest.raises(ValueError):
        SinogramGrid(5, 0, 1.0)


def test_view_angles_uniform_over_full_turn():
    angles = SinogramGrid(5, 8, 1.0).view_angles
    assert angles[0] == 0.0
    assert np.all(np.diff(angles) > 0)
    assert np.allclose(np.diff(angles), 2 * np.pi / 8)
    assert angles[-1] < 2 * np.pi


def test_image_invariants():
    with pytest.raises(ShapeError):
        Image(G, np.zeros((4, 3)))
    with pytest.raises(ValidationError):
        Image(G, np.full(G.shape, np.nan))
    with pytest.raises(ValidationError):
        Image(G, np.full(G.shape, 0.5), Unit.BINARY)
    with pytest.raises(ValidationError):
        Image(G, np.full(G.shape, 2.5), Unit.WEIGHT)
    Image(G, np.full(G.shape, 2.0), Unit.WEIGHT)
    img = Image(G, np.zeros(G.shape))
    with pytest.raises(ValueError):
        img.values[0, 0] = 1.0  # read-only


def test_trace_sinogram_must_be_binary():
    sg = SinogramGrid(3, 2, 1.0)
    with pytest.raises(ValidationError):
        Sinogram(sg, np.full(sg.shape, 0.3), SinoKind.TRACE)


@pytest.mark.parametrize("h, mu", [(0.0, 0.192), (-1000.0, 0.0), (1000.0, 0.384)])
def test_hu_to_mu_anchor_values(h, mu):
    assert hu_to_mu(hu(h), 0.192).values[0, 0] == pytest.approx(mu, abs=1e-15)


def test_hu_to_mu_clamps_below_air():
    assert hu_to_mu(hu(-1500.0)).values.max() == 0.0


def test_mu_to_hu_anchor_values():
    img = Image(G, np.full(G.shape, 0.192))
    assert np.allclose(mu_to_hu(img, 0.192).values, 0.0)
    assert np.allclose(mu_to_hu(Image.full(G, 0.0)).values, -1000.0)


def test_unit_checks():
    with pytest.raises(ValidationError):
        hu_to_mu(Image.full(G, 0.1))
    with pytest.raises(ValidationError):
        mu_to_hu(hu(0.0))
    with pytest.raises(ValidationError):
        hu_to_mu(hu(0.0), mu_water=0.0)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, G.shape, elements=st.floats(-1000, 4000)))
def test_unit_round_trip(values):
    back = mu_to_hu(hu_to_mu(hu(values))).values
    assert np.allclose(back, values, rtol=1e-12, atol=1e-9)


def test_pointwise_examples():
    x = Image(G, np.arange(12.0).reshape(G.shape))
    assert np.array_equal(pointwise(x, Image.full(G, 1.0), "mul").values, x.values)
    assert np.array_equal(pointwise(x, x, "sub").values, np.zeros(G.shape))
    sg = SinogramGrid(2, 3, 1.0)
    y = Sinogram(sg, np.ones(sg.shape))
    yt = Sinogram(sg, np.array([[2.0, 0.0, 4.0], [1e-9, 1.0, 0.5]]))
    q = pointwise(y, yt, "safe_div").values
    assert q[0, 1] == 0.0 and q[1, 0] == 0.0
    assert q[0, 0] == 0.5 and q[1, 2] == 2.0


def test_pointwise_rejects_grid_mismatch():
    with pytest.raises(ShapeError):
        pointwise(Image.full(G, 1.0), Image.full(ImageGrid(4, 3), 1.0), "add")
    with pytest.raises(ValueError):
        pointwise(Image.full(G, 1.0), Image.full(G, 1.0), "pow")


@settings(max_examples=30, deadline=None)
@given(arrays(np.int8, G.shape, elements=st.integers(0, 1)), arrays(np.int8, G.shape, elements=st.integers(0, 1)))
def test_binary_closed_under_mul(a, b):
    out = pointwise(Image(G, a, Unit.BINARY), Image(G, b, Unit.BINARY), "mul")
    assert out.unit is Unit.BINARY
    sg = SinogramGrid(3, 4, 1.0)
    tr = pointwise(Sinogram(sg, a, SinoKind.TRACE), Sinogram(sg, b, SinoKind.TRACE), "mul")
    assert tr.kind is SinoKind.TRACE


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, G.shape, elements=st.floats(-1e3, 1e3)),
       arrays(np.float64, G.shape, elements=st.floats(-1e3, 1e3)))
def test_safe_div_inverts_mul(a, b):
    q = pointwise(Image(G, a), Image(G, b), "safe_div").values
    ok = np.abs(b) >= EPS_DIV
    assert np.allclose((q * b)[ok], a[ok], rtol=1e-12, atol=1e-300)
    assert np.all(q[~ok] == 0)
