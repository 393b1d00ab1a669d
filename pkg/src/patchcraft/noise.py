"""Synthesis of i.i.d. and spatially correlated Gaussian noise.

Correlated noise is white noise passed through a variance-preserving flat
kernel (entries 1/k for a k x k kernel, so the squared coefficients sum to 1).
Filtering is circular, which keeps the field strictly stationary up to the
borders. The bilinear-decay model (triangular autocovariance of width theta
per axis) is exactly realized by a separable flat filter of length theta.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from patchcraft.image import Burst, Image
from patchcraft.rng import Rng

__all__ = [
    "NoiseModel",
    "bilinear_autocov",
    "correlate",
    "flat_kernel",
    "noise_field",
    "sample_bilinear",
    "sample_iid",
    "synth_burst",
]


@dataclass(frozen=True)
class NoiseModel:
    """Noise parameters: std sigma plus a correlation kind.

    kind is one of "iid", "flat" (k x k flat kernel) or "bilinear"
    (triangular autocovariance with decay width theta).
    """

    sigma: float
    kind: str = "iid"
    k: int = 1
    theta: float = 1.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.kind not in ("iid", "flat", "bilinear"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if self.kind == "flat" and self.k < 1:
            raise ValueError("kernel size k must be >= 1")
        if self.kind == "bilinear" and self.theta < 1:
            raise ValueError("theta must be >= 1")


def sample_iid(shape, sigma: float, rng: Rng) -> np.ndarray:
    """I.i.d. N(0, sigma^2) samples; deterministic per seed."""
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return rng.normal(shape, sigma=sigma)


def flat_kernel(k: int) -> np.ndarray:
    """k x k kernel with every entry 1/k; sum of squared entries is 1."""
    if k < 1:
        raise ValueError("kernel size must be >= 1")
    return np.full((k, k), 1.0 / k)


def correlate(noise: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Circular 2D convolution of the trailing two axes with `kernel`.

    Output shape equals input shape; wrap-around keeps the field stationary
    everywhere, including borders.
    """
    h, w = noise.shape[-2:]
    kh, kw = kernel.shape
    if kh > h or kw > w:
        raise ValueError(f"kernel {kernel.shape} larger than field {(h, w)}")
    out = np.zeros_like(noise, dtype=np.float64)
    for a in range(kh):
        for b in range(kw):
            out += kernel[a, b] * np.roll(noise, (a, b), axis=(-2, -1))
    return out


def bilinear_autocov(tau1: float, tau2: float, theta: float, sigma: float) -> float:
    """Separable triangular autocovariance sigma^2 * tri(tau1) * tri(tau2)."""
    if theta < 1:
        raise ValueError("theta must be >= 1")
    tri1 = max(1.0 - abs(tau1) / theta, 0.0)
    tri2 = max(1.0 - abs(tau2) / theta, 0.0)
    return sigma * sigma * tri1 * tri2


def sample_bilinear(shape, theta: int, sigma: float, rng: Rng) -> np.ndarray:
    """Noise with exact bilinear-decay autocovariance on the circular field.

    White noise filtered along each of the trailing two axes by a length-theta
    flat kernel with entries 1/sqrt(theta); the filter autocorrelation is the
    triangle of width theta.
    """
    if int(theta) != theta or theta < 1:
        raise ValueError("theta must be a positive integer for sampling")
    theta = int(theta)
    field = sample_iid(shape, sigma, rng)
    if theta == 1:
        return field
    scale = 1.0 / np.sqrt(theta)
    for axis in (-2, -1):
        acc = np.zeros_like(field)
        for t in range(theta):
            acc += np.roll(field, t, axis=axis)
        field = acc * scale
    return field


def noise_field(shape, model: NoiseModel, rng: Rng) -> np.ndarray:
    """One realization of `model` on the trailing two axes of `shape`."""
    if model.kind == "iid":
        return sample_iid(shape, model.sigma, rng)
    if model.kind == "flat":
        return correlate(sample_iid(shape, model.sigma, rng), flat_kernel(model.k))
    return sample_bilinear(shape, int(model.theta), model.sigma, rng)


def synth_burst(clean: Burst, model: NoiseModel, rng: Rng) -> Burst:
    """Add an independent noise realization to every frame of a clean burst.

    Channels receive independent fields; frame f draws from the child
    generator (seed, f) so frames are reproducible in isolation.
    """
    noisy = []
    for f, frame in enumerate(clean.frames):
        noisy.append(Image(frame.data + noise_field(frame.data.shape, model, rng.child(f))))
    return Burst(tuple(noisy), clean.input_index)
