import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from pytest import approx

from vbdeblur.grids import (
    BlurredImage,
    GradientImage,
    Kernel,
    as_2d,
    boundary_mask_dense,
    build_pyramid,
    conv2d_adjoint,
    conv2d_valid,
    conv_adjoint,
    convolve_valid,
    effective_norms,
    gradient_filters,
    resample_kernel,
)

from conftest import dense_conv_matrix


def test_convolve_identity_kernel():
    x = np.array([[1.0, 2.0, 3.0, 4.0]])
    assert conv2d_valid(x, np.array([[1.0]])) == approx(x)


def test_convolve_hand_case():
    """[1,0,0,1] * [0.5,0.5], valid region, by hand."""
    y = conv2d_valid(np.array([[1.0, 0.0, 0.0, 1.0]]), np.array([[0.5, 0.5]]))
    assert y == approx(np.array([[0.5, 0.0, 0.5]]))


def test_convolve_output_length():
    x = np.zeros((5, 9))
    k = np.ones((3, 4)) / 12.0
    assert conv2d_valid(x, k).shape == (3, 6)


def test_convolve_rejects_kernel_larger_than_image():
    with pytest.raises(ValueError):
        conv2d_valid(np.zeros((1, 3)), np.ones((1, 5)) / 5.0)


def test_adjoint_inner_product_identity(rng):
    # <k*x, y> == <x, H^T y> to 1e-10 relative, many random instances
    for _ in range(50):
        mr, mc = int(rng.integers(4, 12)), int(rng.integers(4, 12))
        kr = int(rng.integers(1, mr + 1))
        kc = int(rng.integers(1, mc + 1))
        x = rng.normal(size=(mr, mc))
        k = rng.uniform(0.0, 1.0, (kr, kc))
        y = rng.normal(size=(mr - kr + 1, mc - kc + 1))
        lhs = float(np.sum(conv2d_valid(x, k) * y))
        rhs = float(np.sum(x * conv2d_adjoint(y, k)))
        assert lhs == approx(rhs, rel=1e-10, abs=1e-12)


def test_adjoint_delta_kernel_embeds():
    y = np.array([[1.0, 2.0, 3.0]])
    assert conv2d_adjoint(y, np.array([[1.0]])) == approx(y)


def test_adjoint_hand_case():
    # k=[0.5,0.5], y=[1] on a length-2 latent support
    out = conv2d_adjoint(np.array([[1.0]]), np.array([[0.5, 0.5]]))
    assert out == approx(np.array([[0.5, 0.5]]))


def test_adjoint_matches_dense_matrix(rng):
    k = rng.uniform(0.0, 1.0, (1, 4))
    H = dense_conv_matrix(k, (1, 16))
    y = rng.normal(size=(1, 13))
    assert conv2d_adjoint(y, k).ravel() == approx(H.T @ y.ravel(), rel=1e-12)


def test_convolve_linear_in_signal_and_kernel(rng):
    for _ in range(10):
        x1 = rng.normal(size=(6, 6))
        x2 = rng.normal(size=(6, 6))
        k1 = rng.uniform(0.0, 1.0, (3, 3))
        k2 = rng.uniform(0.0, 1.0, (3, 3))
        a, b = rng.normal(), rng.normal()
        assert conv2d_valid(a * x1 + b * x2, k1) == approx(
            a * conv2d_valid(x1, k1) + b * conv2d_valid(x2, k1), abs=1e-12)
        assert conv2d_valid(x1, a * k1 + b * k2) == approx(
            a * conv2d_valid(x1, k1) + b * conv2d_valid(x1, k2), abs=1e-12)


def test_typed_wrappers_round_trip():
    x = GradientImage(np.array([[1.0, 0.0, 0.0, 1.0]]), filter_id="dx")
    k = Kernel(np.array([[0.5, 0.5]]), normalized=True)
    y = convolve_valid(x, k)
    assert isinstance(y, BlurredImage)
    back = conv_adjoint(y, k)
    assert isinstance(back, GradientImage)
    assert back.array.shape == x.array.shape


def test_effective_norms_uniform_interior():
    l = 5
    k = np.full((1, l), 1.0 / l)
    en = effective_norms(k, (1, 32))
    # interior pixels see every tap once: sum k_j^2 = 1/l
    assert en[0, l - 1] == approx(1.0 / l, rel=1e-12)
    assert en[0, 16] == approx(1.0 / l, rel=1e-12)


def test_effective_norms_delta_is_one():
    k = np.zeros((1, 5))
    k[0, 2] = 1.0
    en = effective_norms(k, (1, 20))
    covered = en > 0
    assert np.all(en[covered] == approx(1.0))


def test_effective_norms_match_dense_columns(rng):
    k = rng.uniform(0.0, 1.0, (3, 3))
    k /= k.sum()
    H = dense_conv_matrix(k, (9, 9))
    en = effective_norms(k, (9, 9))
    assert en.ravel() == approx(np.sum(H**2, axis=0), rel=1e-12)


def test_effective_norms_bounded_by_kernel_energy(rng):
    k = rng.uniform(0.0, 1.0, (1, 7))
    k /= k.sum()
    en = effective_norms(k, (1, 40))
    assert np.all(en >= 0)
    assert np.all(en <= float(np.sum(k**2)) + 1e-15)


def test_boundary_mask_matches_dense_support(rng):
    k = rng.uniform(0.1, 1.0, (1, 3))
    H = dense_conv_matrix(k, (1, 8))
    mask = boundary_mask_dense((1, 3), (1, 8))
    assert mask.shape == (3, 8)
    assert set(np.unique(mask)) <= {0, 1}
    # columnwise: effective norm = sum_j k_j^2 * mask_ji
    en = (k.ravel() ** 2) @ mask
    assert en == approx(np.sum(H**2, axis=0), rel=1e-12)


def test_gradient_filters_constant_image_is_zero():
    dx, dy = gradient_filters(np.full((8, 8), 0.7))
    assert np.all(dx.array == 0)
    assert np.all(dy.array == 0)


def test_gradient_filters_ramp_sign_convention():
    # x(i,j) = j and dx(i,j) = x(i,j+1) - x(i,j) = +1
    img = np.tile(np.arange(6.0), (4, 1))
    dx, dy = gradient_filters(img)
    assert np.all(dx.array == 1.0)
    assert np.all(dy.array == 0.0)
    assert dx.filter_id == "dx"
    assert dy.filter_id == "dy"


def test_gradient_filters_step_edge_single_column():
    img = np.zeros((5, 8))
    img[:, 4:] = 1.0
    dx, _ = gradient_filters(img)
    nz_cols = np.nonzero(np.any(dx.array != 0, axis=0))[0]
    assert list(nz_cols) == [3]


def test_pyramid_kernel_size_ladder():
    levels = build_pyramid(np.zeros((64, 64)), 15)
    sizes = sorted((lv.kernel_size for lv in levels), reverse=True)
    assert sizes == [15, 11, 7, 5, 3]
    assert all(lv.kernel_size % 2 == 1 for lv in levels)
    # coarsest first, full resolution last
    assert levels[-1].image.shape == (64, 64)
    assert levels[0].image.shape[0] < levels[-1].image.shape[0]


def test_pyramid_single_level_when_kernel_small():
    levels = build_pyramid(np.zeros((32, 32)), 3)
    assert len(levels) == 1
    assert levels[0].kernel_size == 3


def test_resample_kernel_renormalizes(rng):
    k = rng.uniform(0.0, 1.0, (5, 5))
    k /= k.sum()
    up = resample_kernel(k, (9, 9))
    assert up.shape == (9, 9)
    assert np.all(up >= 0)
    assert float(up.sum()) == approx(1.0, abs=1e-12)


def test_kernel_rejects_negative_entries():
    with pytest.raises(ValueError):
        Kernel(np.array([[0.5, -0.1]]))


def test_kernel_normalized_flag_checks_sum():
    with pytest.raises(ValueError):
        Kernel(np.array([[0.5, 0.6]]), normalized=True)
    Kernel(np.array([[0.5, 0.5]]), normalized=True)


def test_gradient_image_rejects_nonfinite():
    with pytest.raises(ValueError):
        GradientImage(np.array([[1.0, np.nan]]))


def test_as_2d_promotes_1d_to_row():
    out = as_2d(np.array([1.0, 2.0]))
    assert out.shape == (1, 2)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 9), st.integers(1, 5))
def test_adjoint_identity_property(seed, m, klen):
    rng = np.random.default_rng(seed)
    klen = min(klen, m)
    x = rng.normal(size=(1, m))
    k = rng.uniform(0.0, 1.0, (1, klen))
    y = rng.normal(size=(1, m - klen + 1))
    lhs = float(np.sum(conv2d_valid(x, k) * y))
    rhs = float(np.sum(x * conv2d_adjoint(y, k)))
    assert lhs == approx(rhs, rel=1e-10, abs=1e-12)
