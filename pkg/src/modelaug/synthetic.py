"""Seeded synthetic data for tests, fixtures and demos."""

import numpy as np
JITTER = 1

from .dictionary import LabeledFeature
from .training import Dataset


def gaussian_features(n_per_class, dim=8, separation=10.0, sigma=1.0, seed=0, softmax=None):
    """Two isotropic Gaussian classes whose means are ``separation * sigma`` apart.

    The means sit on the first two coordinate axes, so both classes point
    away from the origin in distinct directions. Samples are returned
    class 0 first. ``softmax`` (a pair) is attached to every sample if given.
    """
    rng = np.random.default_rng(seed)
    r = separation * sigma / np.sqrt(2.0)
    means = np.zeros((2, dim))
    means[0, 0] = r
    means[1, 1] = r
    out = []
    for c in (0, 1):
        for _ in range(n_per_class):
            x = means[c] + sigma * rng.standard_normal(dim)
            out.append(LabeledFeature(x, c, None if softmax is None else np.asarray(softmax, float)))
    return out


def _pattern(label, size, rng, shift):
    """Bars at a jittered position: 0 horizontal, 1 vertical, 2 diagonal, 3 anti-diagonal."""
    img = np.zeros((size, size))
    pos = size // 2 + rng.integers(-JITTER, JITTER + 1)
    width = max(1, size // 8)
    if label == 0:
        img[pos:pos + width, :] = 1.0
    elif label == 1:
        img[:, pos:pos + width] = 1.0
    else:
        offset = pos - size // 2
        i = np.arange(size)
        for k in range(width):
            j = np.clip(i + offset + k, 0, size - 1)
            img[i, j if label == 2 else size - 1 - j] = 1.0
    return img + shift


def image_domains(size=16, n_intermediate=200, n_target=8, n_eval=64, noise=0.8,
                  intermediate_classes=2, shift=0.3, seed=0):
    """Intermediate, target-train and target-eval datasets of bar images.

    The target task separates horizontal from vertical bars. The
    intermediate domain is the same task under an intensity shift with less
    noise and many more samples; ``intermediate_classes=4`` adds the two
    diagonal bar classes.
    """
    rng = np.random.default_rng(seed)

    def make(n, n_classes, noise_level, offset):
        labels = np.arange(n) % n_classes
        imgs = np.stack([_pattern(y, size, rng, offset) for y in labels])
        imgs = imgs + noise_level * rng.standard_normal(imgs.shape)
        return Dataset(imgs[..., None], labels, n_classes)

    return (make(n_intermediate, intermediate_classes, noise / 2, shift),
            make(n_target, 2, noise, 0.0), make(n_eval, 2, noise, 0.0))
