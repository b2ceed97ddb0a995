import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dudomar.grids import Image, ImageGrid, Sinogram, SinogramGrid
from dudomar.prox import Domain, ProxDomainError, ProxKind, ProxOperator, prox_apply, total_variation, tv_denoise

fields = arrays(np.float64, (9, 7), elements=st.floats(-10, 10))


def test_operator_validation():
    with pytest.raises(ValueError):
        ProxOperator.tv(-1.0)
    with pytest.raises(ValueError):
        ProxOperator.tv(1.0, inner_iters=0)
    with pytest.raises(ValueError):
        ProxOperator.clamp(1.0, 1.0)


@settings(max_examples=30, deadline=None)
@given(fields)
def test_identity_and_zero_strength(v):
    assert prox_apply(ProxOperator.identity(), v) is v
    assert np.array_equal(prox_apply(ProxOperator.soft_threshold(0.0), v), v)
    assert np.array_equal(prox_apply(ProxOperator.tv(0.0), v), v)


def test_soft_threshold_about_median():
    v = np.array([[0.0, 1.0, 2.0, 5.0, -3.0]])
    out = prox_apply(ProxOperator.soft_threshold(1.5), v)
    # median 1 -> deviations (-1, 0, 1, 4, -4) shrink by 1.5
    assert np.allclose(out, [[1.0, 1.0, 1.0, 3.5, -1.5]])


def test_clamp():
    v = np.array([[-1.0, 0.5, 3.0]])
    assert np.array_equal(prox_apply(ProxOperator.clamp(0.0, 1.0), v), [[0.0, 0.5, 1.0]])


@settings(max_examples=25, deadline=None)
@given(fields, st.floats(0.01, 5.0))
def test_tv_denoise_does_not_increase_tv(v, lam):
    out = tv_denoise(v, lam, 50)
    assert total_variation(out) <= total_variation(v) + 1e-9


def test_tv_denoise_minimizes_rof_energy():
    rng = np.random.default_rng(0)
    v = np.kron(np.eye(3), np.ones((4, 4))) + 0.2 * rng.standard_normal((12, 12))
    lam = 0.3
    u = tv_denoise(v, lam, 300)
    energy = lambda w: 0.5 * np.sum((w - v) ** 2) + lam * total_variation(w)
    assert energy(u) < energy(v)
    for _ in range(20):
        assert energy(u) <= energy(u + 0.01 * rng.standard_normal(u.shape)) + 1e-9


def test_tv_preserves_mean():
    rng = np.random.default_rng(1)
    v = rng.standard_normal((10, 10))
    assert tv_denoise(v, 0.5, 40).mean() == pytest.approx(v.mean(), abs=1e-12)


def test_masked_regions_are_independent():
    v = np.zeros((6, 6))
    v[:, 3:] = 5.0
    mask = np.ones((6, 6), bool)
    mask[:, 0] = False
    out = prox_apply(ProxOperator.tv(10.0, 100), v, mask=mask)
    assert np.array_equal(out[:, 0], v[:, 0])


def test_domain_checks_and_containers():
    sg = SinogramGrid(5, 4, 1.0)
    sino = Sinogram(sg, np.arange(20.0).reshape(5, 4))
    out = prox_apply(ProxOperator.tv(0.5, domain=Domain.SINOGRAM), sino)
    assert isinstance(out, Sinogram) and out.grid == sg
    img = Image(ImageGrid(3, 3), np.eye(3))
    assert isinstance(prox_apply(ProxOperator.clamp(0, 0.5), img), Image)
    with pytest.raises(ProxDomainError):
        prox_apply(ProxOperator.tv(0.5), sino)
    with pytest.raises(ProxDomainError):
        prox_apply(ProxOperator.tv(0.5, domain=Domain.SINOGRAM), np.eye(3), Domain.IMAGE)
    assert ProxKind("TVDenoise") is ProxKind.TV
