import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(0)


def dense_conv_matrix(k: np.ndarray, image_shape: tuple) -> np.ndarray:
    """Dense H with H @ x.ravel() == conv2d_valid(x, k).ravel().

    Built column by column from unit impulses; quadratic cost, so keep
    m = prod(image_shape) small (<= 256).
    """
    from vbdeblur.grids import conv2d_valid

    image_shape = tuple(image_shape)
    m = int(np.prod(image_shape))
    probe = np.zeros(image_shape)
    out_shape = conv2d_valid(probe, k).shape
    H = np.zeros((int(np.prod(out_shape)), m))
    for i in range(m):
        probe.ravel()[i] = 1.0
        H[:, i] = conv2d_valid(probe, k).ravel()
        probe.ravel()[i] = 0.0
    return H
