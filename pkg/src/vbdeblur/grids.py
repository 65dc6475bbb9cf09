"""Derivative-domain images, kernels, valid-convolution operators and pyramids.

Conventions used throughout the package:

* images are 2D float arrays, row-major ("lexicographic") when flattened;
  width = number of columns, height = number of rows;
* a sharp (latent) image of width M, height N convolved with a kernel of
  width P, height Q under *valid* semantics yields an observation of size
  (N-Q+1) x (M-P+1), i.e. n = (M-P+1)(N-Q+1) samples and m = M*N unknowns;
* 1D signals are handled as single-row 2D arrays.

The valid-only convolution keeps every output sample fully explained by the
kernel, so boundary effects live entirely in the tap-coverage mask and the
per-pixel effective kernel norms computed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage, signal

__all__ = [
    "GradientImage",
    "BlurredImage",
    "Kernel",
    "conv2d_valid",
    "conv2d_adjoint",
    "conv2d_kernel_adjoint",
    "convolve_valid",
    "conv_adjoint",
    "boundary_mask_dense",
    "effective_norms",
    "tap_weight_sums",
    "gradient_filters",
    "build_pyramid",
    "resample_kernel",
    "as_2d",
]

KERNEL_SUM_TOL = 1e-12


def as_2d(a) -> np.ndarray:
    """Coerce a scalar/1D/2D array to 2D float64 (1D becomes a single row)."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        raise ValueError(f"expected 1D or 2D data, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class GradientImage:
    """Lexicographically ordered derivative-domain image (column width M)."""

    array: np.ndarray
    filter_id: str = "raw"

    def __post_init__(self):
        object.__setattr__(self, "array", as_2d(self.array))
        if not np.all(np.isfinite(self.array)):
            raise ValueError("gradient image contains non-finite values")

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def values(self) -> np.ndarray:
        """m-vector view, m = width * height."""
        return self.array.ravel()


@dataclass(frozen=True)
class BlurredImage:
    """Valid-region observation, n = (M-P+1)(N-Q+1) samples."""

    array: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "array", as_2d(self.array))

    @property
    def values(self) -> np.ndarray:
        return self.array.ravel()


@dataclass(frozen=True)
class Kernel:
    """Nonnegative blur kernel; `normalized` asserts unit sum within 1e-12."""

    array: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "array", as_2d(self.array))
        if np.any(self.array < 0):
            raise ValueError("kernel entries must be nonnegative")
        if self.normalized and abs(self.array.sum() - 1.0) > KERNEL_SUM_TOL:
            raise ValueError(
                f"kernel flagged normalized but sums to {self.array.sum()!r}"
            )

    @property
    def width(self) -> int:
        return self.array.shape[1]

    @property
    def height(self) -> int:
        return self.array.shape[0]

    @property
    def values(self) -> np.ndarray:
        return self.array.ravel()


def _check_dims(x: np.ndarray, k: np.ndarray) -> None:
    if x.shape[0] < k.shape[0] or x.shape[1] < k.shape[1]:
        raise ValueError(
            f"image {x.shape} smaller than kernel {k.shape}; valid convolution undefined"
        )


def conv2d_valid(x: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Valid-region convolution of a 2D image with a 2D kernel."""
    x = as_2d(x)
    k = as_2d(k)
    _check_dims(x, k)
    return signal.convolve(x, k, mode="valid", method="auto")


def conv2d_adjoint(y: np.ndarray, k: np.ndarray) -> np.ndarray:
    """Exact adjoint of conv2d_valid(., k): maps n-sized data to m-sized image."""
    y = as_2d(y)
    k = as_2d(k)
    return signal.correlate(y, k, mode="full", method="auto")


def conv2d_kernel_adjoint(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Adjoint of k -> conv2d_valid(x, k) at fixed image x, applied to data r.

    Returns a kernel-shaped array; with W the n-by-l matrix such that
    conv2d_valid(x, k) = W k, this computes W^T r.
    """
    x = as_2d(x)
    r = as_2d(r)
    return np.flip(signal.correlate(x, r, mode="valid", method="auto"))


def convolve_valid(x: GradientImage, k: Kernel) -> BlurredImage:
    return BlurredImage(conv2d_valid(x.array, k.array))


def conv_adjoint(y: BlurredImage, k: Kernel) -> GradientImage:
    return GradientImage(conv2d_adjoint(y.array, k.array), filter_id="adjoint")


def boundary_mask_dense(kernel_shape: tuple, image_shape: tuple) -> np.ndarray:
    """Dense l-by-m binary tap-coverage mask.

    Entry (j, i) is 1 exactly when kernel tap j multiplies image pixel i in
    some output sample of the valid convolution.  Intended for small oracle
    checks; operator-form equivalents below are used in the solver.
    """
    q, p = kernel_shape
    nrows, ncols = image_shape
    if nrows < q or ncols < p:
        raise ValueError("image smaller than kernel")
    out_r, out_c = nrows - q + 1, ncols - p + 1
    mask = np.zeros((q * p, nrows * ncols), dtype=np.uint8)
    for a in range(q):
        for b in range(p):
            j = a * p + b
            # tap (a, b) multiplies pixel (i_r + q-1-a, i_c + p-1-b) in output (i_r, i_c)
            rows = np.arange(out_r) + (q - 1 - a)
            cols = np.arange(out_c) + (p - 1 - b)
            rr, cc = np.meshgrid(rows, cols, indexing="ij")
            mask[j, (rr * ncols + cc).ravel()] = 1
    return mask


def effective_norms(k: np.ndarray, image_shape: tuple) -> np.ndarray:
    """Per-pixel squared effective kernel norms over an image of given shape.

    Entry i is sum_j k_j^2 over the taps j that touch pixel i in the valid
    convolution, which equals the squared ell2 norm of column i of the
    convolution matrix.  Interior pixels (all taps valid) give ||k||_2^2;
    boundary pixels give strictly smaller values.
    """
    k = as_2d(np.asarray(getattr(k, "array", k)))
    nrows, ncols = image_shape
    _check_dims(np.empty(image_shape), k)
    out_shape = (nrows - k.shape[0] + 1, ncols - k.shape[1] + 1)
    return conv2d_adjoint(np.ones(out_shape), k**2)


def tap_weight_sums(weights: np.ndarray, kernel_shape: tuple) -> np.ndarray:
    """Per-tap sums c_j = sum_i w_i over the pixels i that tap j touches.

    `weights` is an image-shaped (m-sized) array; the result is kernel-shaped.
    This is the mask-weighted quadratic coefficient of the kernel update.
    """
    weights = as_2d(weights)
    q, p = kernel_shape
    out_shape = (weights.shape[0] - q + 1, weights.shape[1] - p + 1)
    if out_shape[0] < 1 or out_shape[1] < 1:
        raise ValueError("weights image smaller than kernel")
    return conv2d_kernel_adjoint(weights, np.ones(out_shape))


def gradient_filters(pixel_image: np.ndarray) -> tuple:
    """Horizontal/vertical first differences over the valid region.

    Sign convention dx(i, j) = x(i, j+1) - x(i, j) and likewise for rows.
    Returns (dx, dy) as GradientImage instances.
    """
    img = as_2d(pixel_image)
    dx = img[:, 1:] - img[:, :-1]
    dy = img[1:, :] - img[:-1, :]
    return GradientImage(dx, filter_id="dx"), GradientImage(dy, filter_id="dy")


def _nearest_odd(v: float) -> int:
    return max(3, 2 * int(round((v - 1.0) / 2.0)) + 1)


def resample_kernel(k: np.ndarray, new_shape: tuple) -> np.ndarray:
    """Bilinear kernel resampling with zero clamp and unit-sum renormalization."""
    k = as_2d(k)
    if k.shape == tuple(new_shape):
        out = k.copy()
    else:
        zoom = (new_shape[0] / k.shape[0], new_shape[1] / k.shape[1])
        out = ndimage.zoom(k, zoom, order=1, grid_mode=True, mode="nearest")
        if out.shape != tuple(new_shape):  # guard against rounding in zoom
            out = out[: new_shape[0], : new_shape[1]]
    out = np.maximum(out, 0.0)
    s = out.sum()
    if s <= 0:
        raise ValueError("kernel resampling produced an all-zero kernel")
    return out / s


@dataclass(frozen=True)
class PyramidLevel:
    image: np.ndarray
    kernel_size: int
    scale: float  # downsampling factor applied to the original image


def build_pyramid(image: np.ndarray, kernel_size: int) -> list:
    """Coarse-to-fine scale levels for multiresolution kernel estimation.

    Downsampling by sqrt(2) per level (bilinear); the kernel size at level
    L is the nearest odd integer to kernel_size / sqrt(2)^L, never below 3.
    Levels stop once the kernel reaches 3x3 (or the image would no longer
    contain the kernel).  Returned coarsest-first.
    """
    img = as_2d(image)
    if kernel_size % 2 == 0:
        raise ValueError("kernel size must be odd")
    if min(img.shape) <= kernel_size:
        raise ValueError("image must be larger than the kernel")
    levels = []
    lev = 0
    while True:
        factor = np.sqrt(2.0) ** lev
        ksize = _nearest_odd(kernel_size / factor)
        shape = (int(round(img.shape[0] / factor)), int(round(img.shape[1] / factor)))
        if min(shape) <= ksize:
            if not levels:
                raise ValueError("kernel larger than image at the coarsest level")
            break
        if lev == 0:
            data = img
        else:
            data = ndimage.zoom(img, (shape[0] / img.shape[0], shape[1] / img.shape[1]),
                                order=1, grid_mode=True, mode="nearest")
        levels.append(PyramidLevel(image=data, kernel_size=ksize, scale=factor))
        if ksize <= 3:
            break
        lev += 1
    return levels[::-1]
