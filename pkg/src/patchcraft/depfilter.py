"""Input/residual covariance statistic and left-tail dataset filtering.

For each training pair the scalar s = cov(input, target - input) is computed
with empirically estimated means. Under independence of content, input noise
and target noise, s concentrates at minus the input noise variance; pairs
whose target noise anti-correlates with the content drag the histogram's left
tail down. The cutoff s_min is chosen so that the mean of the retained
samples coincides with the histogram peak, and filtering only flags records
instead of deleting them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from patchcraft.image import Image

__all__ = [
    "Histogram",
    "ThresholdResult",
    "build_histogram",
    "cov_syr",
    "filter_pairs",
    "find_smin",
    "residual",
]


def residual(target: Image, noisy: Image) -> np.ndarray:
    """Elementwise target - input; equals target noise minus input noise."""
    if target.data.shape != noisy.data.shape:
        raise ValueError(f"shape mismatch: {target.data.shape} vs {noisy.data.shape}")
    return target.data - noisy.data


def cov_syr(y, r) -> float:
    """Empirical covariance of the two sample sets, all channels pooled.

    Means are estimated from the samples themselves; normalization is 1/N.
    """
    y = np.asarray(y.data if isinstance(y, Image) else y, dtype=np.float64).ravel()
    r = np.asarray(r.data if isinstance(r, Image) else r, dtype=np.float64).ravel()
    if y.size != r.size:
        raise ValueError(f"sample count mismatch: {y.size} vs {r.size}")
    if y.size == 0:
        raise ValueError("empty sample set")
    return float(np.mean((y - y.mean()) * (r - r.mean())))


@dataclass(frozen=True)
class Histogram:
    """Bin edges, counts, leftmost peak bin and the sample mean."""

    bin_edges: np.ndarray
    counts: np.ndarray
    peak_bin: int
    mean: float

    @property
    def bin_width(self) -> float:
        return float(self.bin_edges[1] - self.bin_edges[0])

    @property
    def peak_location(self) -> float:
        return float(0.5 * (self.bin_edges[self.peak_bin] + self.bin_edges[self.peak_bin + 1]))


def build_histogram(samples) -> Histogram:
    """Histogram with Freedman-Diaconis bin width (Scott's rule if IQR = 0)."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.size < 2 or samples.min() == samples.max():
        raise ValueError("need at least 2 distinct samples")
    q75, q25 = np.percentile(samples, [75, 25])
    width = 2.0 * (q75 - q25) * samples.size ** (-1.0 / 3.0)
    if width == 0.0:
        width = 3.49 * samples.std() * samples.size ** (-1.0 / 3.0)
    span = samples.max() - samples.min()
    nbins = max(1, int(math.ceil(span / width)))
    edges = np.linspace(samples.min(), samples.max(), nbins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    return Histogram(edges, counts, int(np.argmax(counts)), float(samples.mean()))


@dataclass(frozen=True)
class ThresholdResult:
    """Left-tail cutoff; s_min is -inf when the mean already meets the peak."""

    s_min: float
    retained_fraction: float
    peak_location: float
    retained_mean: float


def find_smin(samples) -> ThresholdResult:
    """Smallest cutoff whose retained-sample mean reaches the histogram peak.

    The peak is fixed on the full histogram; since dropping the smallest
    samples can only raise the retained mean, a single left-to-right sweep
    over the sorted values finds the cutoff.
    """
    samples = np.asarray(samples, dtype=np.float64)
    hist = build_histogram(samples)
    peak = hist.peak_location
    if hist.mean >= peak:
        return ThresholdResult(-math.inf, 1.0, peak, hist.mean)
    ordered = np.sort(samples)
    total = ordered.sum()
    kept = samples.size - np.arange(samples.size)
    suffix_mean = (total - np.concatenate([[0.0], np.cumsum(ordered)[:-1]])) / kept
    idx = int(np.argmax(suffix_mean >= peak))
    if suffix_mean[idx] < peak:  # no prefix cut reaches the peak
        raise ValueError("histogram peak unreachable by any left-tail cut")
    return ThresholdResult(
        float(ordered[idx]),
        float(kept[idx] / samples.size),
        peak,
        float(suffix_mean[idx]),
    )


def filter_pairs(records, s_min: float):
    """Set `retained = (s_yr >= s_min)` on every record; nothing is deleted."""
    out = []
    for rec in records:
        if rec.s_yr is None:
            raise ValueError(f"record {rec.input!r} has no s_yr value")
        out.append(rec.with_retained(rec.s_yr >= s_min))
    return out
