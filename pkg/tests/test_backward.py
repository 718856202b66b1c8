"""Backward-pass tests: exact zeros, oracle agreement, finite differences."""

import numpy as np
import pytest

import oracles
from jbf import (FilterParams, Volume, Window, backward, grad_guide, grad_input,
                 grad_sigma, jbf_forward, mse_loss)


def rand_volume(rng, dims, lo=-150.0, hi=500.0):
    return Volume(dims, rng.uniform(lo, hi, size=dims[0] * dims[1] * dims[2]))


def setup_instance(seed, dims=(5, 4, 3), radii=(2, 2, 1),
                   sigmas=(1.2, 0.8, 1.0, 30.0), guide_band=60.0):
    """Random instance with the guide confined to a band the range kernel
    can resolve (keeps every weight well away from underflow)."""
    rng = np.random.default_rng(seed)
    n = dims[0] * dims[1] * dims[2]
    x = rand_volume(rng, dims)
    z = Volume(dims, rng.uniform(-guide_band, guide_band, size=n))
    dl = Volume(dims, rng.normal(size=n))
    params = FilterParams(*sigmas)
    window = Window(radii)
    cache = jbf_forward(x, z, params, window)
    return x, z, params, window, cache, dl


def test_constant_input_sigma_grads_exactly_zero():
    rng = np.random.default_rng(41)
    for _ in range(5):
        dims = (4, 4, 3)
        x = Volume(dims, np.full(48, float(rng.uniform(-100, 400))))
        z = rand_volume(rng, dims)
        dl = Volume(dims, rng.normal(size=48))
        params = FilterParams(1.0, 1.3, 0.6, 45.0)
        window = Window((2, 1, 1))
        cache = jbf_forward(x, z, params, window)
        d_sigma = grad_sigma(x, z, params, window, cache, dl)
        assert np.all(d_sigma == 0.0)


def test_constant_guide_grad_exactly_zero():
    rng = np.random.default_rng(42)
    dims = (5, 4, 2)
    x = rand_volume(rng, dims)
    z = Volume(dims, np.full(40, 7.5))
    dl = Volume(dims, rng.normal(size=40))
    params = FilterParams(1.2, 1.2, 0.9, 25.0)
    window = Window((2, 2, 1))
    cache = jbf_forward(x, z, params, window)
    assert np.all(grad_guide(x, z, params, window, cache, dl).data == 0.0)


@pytest.mark.parametrize("seed", [43, 44, 45])
def test_matches_scatter_oracle(seed):
    x, z, params, window, cache, dl = setup_instance(seed)
    bundle = backward(x, z, params, window, cache, dl)
    d_sigma, d_input, d_guide = oracles.naive_backward(x, z, params, window, dl)
    scale_s = np.max(np.abs(d_sigma))
    assert np.max(np.abs(bundle.d_sigma - d_sigma)) <= 1e-11 * scale_s
    scale_i = np.max(np.abs(d_input))
    assert np.max(np.abs(bundle.d_input.zyx - d_input)) <= 1e-11 * scale_i
    scale_g = np.max(np.abs(d_guide))
    assert np.max(np.abs(bundle.d_guide.zyx - d_guide)) <= 1e-11 * scale_g


def test_sigma_grads_against_finite_differences():
    x, z, params, window, cache, dl = setup_instance(46, sigmas=(1.0, 1.4, 0.7, 40.0))
    d_sigma = grad_sigma(x, z, params, window, cache, dl)

    def loss_at(p):
        y = jbf_forward(x, z, p, window).y_hat
        return float(np.sum(dl.data * y.data))

    values = params.as_array()
    for i in range(4):
        h = 1e-5 * values[i]
        bumped = values.copy()
        bumped[i] = values[i] + h
        up = loss_at(FilterParams.from_array(bumped))
        bumped[i] = values[i] - h
        dn = loss_at(FilterParams.from_array(bumped))
        fd = (up - dn) / (2 * h)
        assert d_sigma[i] == pytest.approx(fd, rel=1e-6, abs=1e-12)


def test_input_grad_against_finite_differences():
    x, z, params, window, cache, dl = setup_instance(47, dims=(4, 3, 2))
    d_input = backward(x, z, params, window, cache, dl).d_input
    # the filter is linear in the input, so the central difference has no
    # truncation error at all; a large step drowns the loss roundoff
    h = 1.0
    rng = np.random.default_rng(48)
    for j in rng.choice(x.n_voxels, size=6, replace=False):
        for sign, store in ((+1, "up"), (-1, "dn")):
            data = x.data.copy()
            data[j] += sign * h
            y = jbf_forward(Volume(x.dims, data), z, params, window).y_hat
            if sign > 0:
                up = float(np.sum(dl.data * y.data))
            else:
                dn = float(np.sum(dl.data * y.data))
        fd = (up - dn) / (2 * h)
        assert d_input.data[j] == pytest.approx(fd, rel=1e-9, abs=1e-12)


def test_guide_grad_against_finite_differences():
    x, z, params, window, cache, dl = setup_instance(49, dims=(4, 3, 2))
    d_guide = backward(x, z, params, window, cache, dl).d_guide
    h = 1e-4 * float(np.std(z.data))
    rng = np.random.default_rng(50)
    for j in rng.choice(z.n_voxels, size=6, replace=False):
        vals = {}
        for sign in (+1, -1):
            data = z.data.copy()
            data[j] += sign * h
            zz = Volume(z.dims, data)
            cache_j = jbf_forward(x, zz, params, window)
            vals[sign] = float(np.sum(dl.data * cache_j.y_hat.data))
        fd = (vals[1] - vals[-1]) / (2 * h)
        assert d_guide.data[j] == pytest.approx(fd, rel=1e-5, abs=1e-10)


def test_backward_linear_in_dldy():
    x, z, params, window, cache, dl = setup_instance(51)
    one = backward(x, z, params, window, cache, dl)
    dl2 = Volume(dl.dims, 2.0 * dl.data)
    two = backward(x, z, params, window, cache, dl2)
    # doubling is exact in binary floating point, so this holds bitwise
    assert np.array_equal(two.d_sigma, 2.0 * one.d_sigma)
    assert np.array_equal(two.d_input.data, 2.0 * one.d_input.data)
    assert np.array_equal(two.d_guide.data, 2.0 * one.d_guide.data)


def test_zero_radius_axis_has_zero_spatial_grad():
    x, z, params, window, cache, dl = setup_instance(52, radii=(2, 2, 0))
    d_sigma = grad_sigma(x, z, params, window, cache, dl)
    assert d_sigma[2] == 0.0
    assert d_sigma[0] != 0.0


def test_dims_mismatch_rejected():
    x, z, params, window, cache, dl = setup_instance(53)
    bad = Volume((2, 2, 2), np.zeros(8))
    with pytest.raises(ValueError, match="dims"):
        grad_sigma(x, z, params, window, cache, bad)
    with pytest.raises(ValueError, match="dims"):
        grad_input(bad, params, window, cache, dl)
    with pytest.raises(ValueError, match="dims"):
        grad_guide(x, bad, params, window, cache, dl)


def test_mse_pipeline_consistency():
    # chain rule through the mse loss reproduces a direct finite
    # difference of the end-to-end scalar loss
    rng = np.random.default_rng(54)
    dims = (4, 4, 2)
    x = rand_volume(rng, dims)
    z = Volume(dims, rng.uniform(-50, 50, size=32))
    target = rand_volume(rng, dims)
    params = FilterParams(1.1, 0.9, 0.8, 35.0)
    window = Window((1, 1, 1))
    cache = jbf_forward(x, z, params, window)
    _, dl = mse_loss(cache.y_hat, target)
    d_sigma = grad_sigma(x, z, params, window, cache, dl)

    h = 1e-5 * params.sigma_r
    for sign in (+1, -1):
        p = FilterParams(params.sigma_x, params.sigma_y, params.sigma_z,
                         params.sigma_r + sign * h)
        y = jbf_forward(x, z, p, window).y_hat
        loss, _ = mse_loss(y, target)
        if sign > 0:
            up = loss
        else:
            dn = loss
    assert d_sigma[3] == pytest.approx((up - dn) / (2 * h), rel=1e-5)
