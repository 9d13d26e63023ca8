"""Grayscale input adapter and the augmentations used during fine-tuning.

Images are float64 arrays of shape ``(height, width, channels)``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InputError


def as_image(img):
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        img = img[:, :, None]
    if img.ndim != 3:
        raise InputError(f"expected an (h, w, c) image, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise InputError("image has non-finite pixels")
    return img


def conv_output_size(n, kernel, stride, padding):
    return (n + 2 * padding - kernel) // stride + 1


@dataclass(frozen=True)
class ConvSpec:
    """2-D convolution; ``weights`` has shape (out, kernel, kernel, in)."""

    kernel_size: int
    stride: int
    padding: int
    in_channels: int
    out_channels: int
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride_overridden: bool = False

    def output_shape(self, h, w):
        return (conv_output_size(h, self.kernel_size, self.stride, self.padding),
                conv_output_size(w, self.kernel_size, self.stride, self.padding),
                self.out_channels)

    def with_he_uniform(self, seed):
        fan_in = self.kernel_size * self.kernel_size * self.in_channels
        bound = np.sqrt(6.0 / fan_in)
        rng = np.random.default_rng(seed)
        shape = (self.out_channels, self.kernel_size, self.kernel_size, self.in_channels)
        return ConvSpec(self.kernel_size, self.stride, self.padding, self.in_channels,
                        self.out_channels, rng.uniform(-bound, bound, shape),
                        np.zeros(self.out_channels), self.stride_overridden)


def im2col(x, kernel, stride, padding):
    """Patches of a batch ``(b, h, w, c)`` as ``(b, ho, wo, kernel*kernel*c)``."""
    b, h, w, c = x.shape
    ho = conv_output_size(h, kernel, stride, padding)
    wo = conv_output_size(w, kernel, stride, padding)
    if ho < 1 or wo < 1:
        raise InputError(f"kernel {kernel} does not fit a {h}x{w} input with padding {padding}")
    xp = np.pad(x, ((0, 0), (padding, padding), (padding, padding), (0, 0)))
    cols = np.empty((b, ho, wo, kernel, kernel, c))
    for ky in range(kernel):
        for kx in range(kernel):
            cols[:, :, :, ky, kx, :] = xp[:, ky:ky + stride * ho:stride, kx:kx + stride * wo:stride, :]
    return cols.reshape(b, ho, wo, kernel * kernel * c)


def conv_forward(img, spec):
    """Cross-correlation with zero padding (no kernel flip)."""
    img = as_image(img)
    if img.shape[2] != spec.in_channels:
        raise InputError(f"image has {img.shape[2]} channels, conv expects {spec.in_channels}")
    if spec.weights is None:
        raise InputError("conv spec has no weights")
    cols = im2col(img[None], spec.kernel_size, spec.stride, spec.padding)[0]
    W = spec.weights.reshape(spec.out_channels, -1)
    out = cols @ W.T
    if spec.bias is not None:
        out = out + spec.bias
    return out


def adapter_spec_for(first_layer, in_size=448, out_size=224, seed=0):
    """Single-channel adapter matching the backbone's first convolution.

    Keeps the kernel size and, when it halves ``in_size`` to ``out_size``,
    the stride; otherwise the stride is forced to 2 and ``stride_overridden``
    is set. Padding is the smallest value in ``[0, kernel)`` giving exactly
    ``out_size``.
    """
    k = first_layer.kernel_size
    for stride in (first_layer.stride, 2):
        for pad in range(k):
            if conv_output_size(in_size, k, stride, pad) == out_size:
                spec = ConvSpec(k, stride, pad, 1, 3,
                                stride_overridden=stride != first_layer.stride)
                return spec.with_he_uniform(seed)
    raise InputError(f"no padding maps {in_size} to {out_size} with kernel {k}")


# -- resampling -------------------------------------------------------------

def bilinear_sample(img, ys, xs):
    """Sample ``img`` at float coordinates; neighbours outside the image count as 0."""
    h, w, _ = img.shape
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    fy = ys - y0
    fx = xs - x0
    out = np.zeros(ys.shape + (img.shape[2],))
    for dy, wy in ((0, 1 - fy), (1, fy)):
        for dx, wx in ((0, 1 - fx), (1, fx)):
            yy, xx = y0 + dy, x0 + dx
            inside = (yy >= 0) & (yy < h) & (xx >= 0) & (xx < w)
            wgt = np.where(inside, wy * wx, 0.0)
            vals = img[np.clip(yy, 0, h - 1), np.clip(xx, 0, w - 1)]
            out += wgt[..., None] * vals
    return out


def _grid(h, w):
    return np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")


def rotate(img, degrees):
    """Rotate counter-clockwise (as displayed, rows pointing down) about the centre."""
    img = as_image(img)
    if abs(degrees) > 180:
        raise InputError(f"rotation of {degrees} degrees is outside the supported range")
    if degrees == 0:
        return img.copy()
    h, w, _ = img.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    t = np.deg2rad(degrees)
    Y, X = _grid(h, w)
    u, v = X - cx, Y - cy
    # inverse map: rotate output coordinates clockwise to find the source
    xs = cx + np.cos(t) * u - np.sin(t) * v
    ys = cy + np.sin(t) * u + np.cos(t) * v
    return bilinear_sample(img, ys, xs)


def flip_horizontal(img):
    return as_image(img)[:, ::-1, :].copy()


def center_crop(img, size):
    img = as_image(img)
    h, w, _ = img.shape
    if not 1 <= size <= min(h, w):
        raise InputError(f"crop size {size} does not fit a {h}x{w} image")
    top, left = (h - size) // 2, (w - size) // 2
    return img[top:top + size, left:left + size, :].copy()


def scale(img, factor):
    """Zoom by ``factor`` about the centre, keeping the image size."""
    img = as_image(img)
    if not factor > 0:
        raise InputError(f"scale factor must be positive, got {factor}")
    h, w, _ = img.shape
    cy, cx = (h - 1) / 2, (w - 1) / 2
    Y, X = _grid(h, w)
    return bilinear_sample(img, cy + (Y - cy) / factor, cx + (X - cx) / factor)


def translate(img, dx, dy):
    """Shift right by ``dx`` and down by ``dy`` whole pixels, zero fill."""
    img = as_image(img)
    dx, dy = int(dx), int(dy)
    h, w, _ = img.shape
    out = np.zeros_like(img)
    ys, yd = (slice(0, h - dy), slice(dy, h)) if dy >= 0 else (slice(-dy, h), slice(0, h + dy))
    xs, xd = (slice(0, w - dx), slice(dx, w)) if dx >= 0 else (slice(-dx, w), slice(0, w + dx))
    if abs(dx) < w and abs(dy) < h:
        out[yd, xd] = img[ys, xs]
    return out


def resize_to(img, h, w):
    """Bilinear resize with corner-aligned sampling grids."""
    img = as_image(img)
    if h < 1 or w < 1:
        raise InputError(f"target size {h}x{w} is empty")
    ih, iw, _ = img.shape
    if (ih, iw) == (h, w):
        return img.copy()
    ys = np.arange(h) * ((ih - 1) / (h - 1)) if h > 1 else np.full(1, (ih - 1) / 2)
    xs = np.arange(w) * ((iw - 1) / (w - 1)) if w > 1 else np.full(1, (iw - 1) / 2)
    Y, X = np.meshgrid(ys, xs, indexing="ij")
    # guard the last row/column against rounding just past the edge
    return bilinear_sample(img, np.minimum(Y, ih - 1), np.minimum(X, iw - 1))
