import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dudomar.grids import EPS_DIV, Image, ImageGrid, ShapeError, Unit, ValidationError, safe_divide
from dudomar.prior import (PriorConfig, build_prior, classify_tissue, coarse_prior, kmeans_thresholds,
                           normalization_coefficient, refine_prior)
from dudomar.projector import ProjectionGeometry, forward_project
from dudomar.grids import hu_to_mu
from dudomar.simulate import make_phantom

from oracles import best_three_means, disc_chord

G = ImageGrid(24, 24)


def three_level(a=-1000.0, b=40.0, c=700.0):
    v = np.full(G.shape, a)
    v[4:20, 4:20] = b
    v[9:14, 9:14] = c
    return Image(G, v, Unit.HU)


def test_three_level_phantom_classified_exactly():
    out = coarse_prior(three_level(), sigma=0.0)
    assert set(np.unique(out.values)) == {-1000.0, 0.0, 700.0}
    want = three_level(-1000.0, 0.0, 700.0).values
    assert np.array_equal(out.values, want)


def test_uniform_air_uses_fallback():
    with pytest.warns(RuntimeWarning, match="fixed thresholds"):
        out = coarse_prior(Image.full(G, -1000.0, Unit.HU))
    assert np.all(out.values == -1000.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(5, 40), st.integers(5, 40), st.integers(5, 40), st.integers(0, 2 ** 16))
def test_kmeans_thresholds_match_exhaustive_split(n1, n2, n3, seed):
    rng = np.random.default_rng(seed)
    samples = np.concatenate([np.full(n1, -1000.0), np.full(n2, 40.0), np.full(n3, 700.0)])
    samples = samples + rng.normal(0, 5, samples.size)
    got = kmeans_thresholds(samples)
    want = best_three_means(samples)
    assert np.allclose(got, want, atol=1e-6)
    assert got[0] < 40 - 20 and -1000 + 20 < got[0]
    assert 40 + 20 < got[1] < 700 - 20


def test_kmeans_needs_three_values():
    assert kmeans_thresholds(np.array([1.0, 1.0, 2.0])) is None
    with pytest.raises(ValidationError):
        kmeans_thresholds(np.arange(10.0), k=4)


def test_metal_pixels_become_soft_tissue():
    m = np.zeros(G.shape)
    m[10, 10] = 1
    out = coarse_prior(three_level(), sigma=0.0, metal_mask=Image(G, m, Unit.BINARY))
    assert out.values[10, 10] == 0.0


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (6, 7), elements=st.floats(-1500, 3000)), st.floats(-999, 0), st.floats(1, 1500))
def test_classification_is_stable_under_fixed_thresholds(x, t_air, t_bone):
    once = classify_tissue(x, t_air, t_bone)
    assert np.array_equal(classify_tissue(once, t_air, t_bone), once)


@settings(max_examples=15, deadline=None)
@given(st.floats(-1000, -300), st.floats(-100, 150), st.floats(400, 2000))
def test_idempotent_without_smoothing(a, b, c):
    once = coarse_prior(three_level(a, b, c), sigma=0.0)
    twice = coarse_prior(once, sigma=0.0)
    assert np.array_equal(once.values, twice.values)


def test_coarse_prior_input_checks():
    with pytest.raises(ValidationError):
        coarse_prior(Image.full(G, 0.1))
    with pytest.raises(ValidationError):
        coarse_prior(three_level(), sigma=-1)


def test_refine_prior_examples():
    coarse = three_level(-1000.0, 0.0, 700.0)
    same = refine_prior(coarse, Image.full(G, 1.0, Unit.WEIGHT))
    assert np.array_equal(same.values, coarse.values)
    air = refine_prior(coarse, Image.full(G, 0.0, Unit.WEIGHT))
    assert np.allclose(air.values, -1000.0)
    w = np.ones(G.shape)
    w[10, 10] = 0.5
    half = refine_prior(coarse, Image(G, w, Unit.WEIGHT))
    mu = hu_to_mu(half).values
    mu0 = hu_to_mu(coarse).values
    assert mu[10, 10] == pytest.approx(0.5 * mu0[10, 10], rel=1e-12)
    assert np.array_equal(np.delete(half.values.ravel(), 10 * 24 + 10), np.delete(coarse.values.ravel(), 10 * 24 + 10))
    with pytest.raises(ShapeError):
        refine_prior(coarse, Image.full(ImageGrid(3, 3), 1.0, Unit.WEIGHT))
    with pytest.raises(ValidationError):
        Image.full(G, 2.5, Unit.WEIGHT)


def test_normalization_coefficient_examples():
    geom = ProjectionGeometry.parallel(G, 12)
    yt = normalization_coefficient(Image.full(G, -1000.0, Unit.HU), geom)
    assert not yt.values.any()
    clean = three_level()
    y = forward_project(hu_to_mu(clean), geom).values
    yt = normalization_coefficient(clean, geom).values
    ok = yt > EPS_DIV
    assert np.allclose(safe_divide(y, yt)[ok], 1.0, rtol=1e-12)
    with pytest.raises(ShapeError):
        normalization_coefficient(Image.full(ImageGrid(5, 5), 0.0, Unit.HU), geom)


def test_water_disc_prior_matches_chord_lengths():
    g = ImageGrid(64, 64, 1.0)
    geom = ProjectionGeometry.parallel(g, 32)
    # disc area sampled finely so the prior is close to the analytic object
    sub = (np.arange(8) + 0.5) / 8
    yy, xx = np.mgrid[:64, :64]
    cx = xx[..., None, None] + sub[None, None, :, None] - 32.0
    cy = 32.0 - (yy[..., None, None] + sub[None, None, None, :])
    frac = ((cx ** 2 + cy ** 2) <= 24.0 ** 2).mean(axis=(2, 3))
    prior = Image(g, 1000.0 * frac - 1000.0, Unit.HU)  # water inside, air outside
    yt = normalization_coefficient(prior, geom, mu_water=0.2).values
    want = disc_chord(geom.sino_grid.bin_centers, 24.0, 0.2)
    # central half of the profile; the rim carries the pixelization error
    inner = np.abs(geom.sino_grid.bin_centers) < 12
    assert np.max(np.abs(yt[inner] - want[inner, None])) <= 0.01 * want.max()


def test_build_prior_with_weights():
    geom = ProjectionGeometry.parallel(G, 12)
    x_li = three_level()
    _, yt1 = build_prior(x_li, geom, PriorConfig(sigma=0.0))
    _, yt0 = build_prior(x_li, geom, PriorConfig(sigma=0.0, weights=Image.full(G, 0.0, Unit.WEIGHT)))
    assert yt1.values.max() > 0 and not yt0.values.any()
