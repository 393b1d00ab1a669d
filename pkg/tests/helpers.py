"""Shared fixtures: synthetic clean content, bursts and small desk sets."""

import numpy as np

from patchcraft.image import Burst, Image
from patchcraft.noise import NoiseModel, synth_burst
from patchcraft.rng import Rng


def clean_frame(rng, height=96, width=96, channels=1):
    """Piecewise-smooth content: bent edge over a low-frequency texture."""
    yy, xx = np.mgrid[0:height, 0:width].astype(float)
    planes = []
    for _ in range(channels):
        a, b, c, d = [float(u) for u in rng.uniform(4)]
        plane = 110 + 70 * np.sin(xx / (6 + 6 * a) + 6 * b) * np.cos(yy / (7 + 5 * c) + 6 * d)
        plane += 50 * ((yy - height / 2 + 12 * np.sin(xx / 11 + 6 * a)) > 0)
        planes.append(plane)
    return Image(np.clip(np.stack(planes), 0, 255))


def integer_frame(rng, channels, height, width):
    """Random 8-bit-valued frame; integer samples keep L2 distances exact."""
    return Image(rng.integers(0, 256, (channels, height, width)).astype(float))


def static_noisy_burst(rng, model, frames=4, height=96, width=96, channels=1, input_index=0):
    """Same clean scene in every frame plus independent noise realizations."""
    clean = clean_frame(rng.child("clean"), height, width, channels)
    burst = synth_burst(Burst((clean,) * frames, input_index), model, rng.child("noise"))
    return clean, burst


def desk_set(seed, count=20, sigma=10.0, k=3, frames=4, side=96):
    """`count` static noisy bursts with their clean frames."""
    rng = Rng(seed)
    model = NoiseModel(sigma=sigma, kind="flat", k=k)
    out = []
    for i in range(count):
        out.append(static_noisy_burst(rng.child(i), model, frames=frames, height=side, width=side))
    return out
