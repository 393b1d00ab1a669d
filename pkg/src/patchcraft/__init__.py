"""Patch-craft target synthesis for correlated-noise denoising.

Builds training targets from bursts of noisy shots by bounded nearest-neighbor
patch matching and stitching, filters image pairs by an input/residual
covariance statistic, trains a miniature denoiser on the result, and ships a
numerical verification suite for the statistical claims the pipeline rests on.
"""

from patchcraft.image import Burst, FormatError, Image, load_image, load_tensor, mirror_pad, psnr, save_image, save_tensor
from patchcraft.rng import Rng
from patchcraft.noise import NoiseModel, bilinear_autocov, correlate, flat_kernel, sample_bilinear, sample_iid, synth_burst
from patchcraft.craft import CraftParams, Match, OffsetGrid, build_patchcraft, nearest_neighbors, offset_grids, patch_distance, sample_target
from patchcraft.depfilter import Histogram, ThresholdResult, build_histogram, cov_syr, filter_pairs, find_smin, residual
from patchcraft.manifest import PairRecord, read_manifest, write_manifest

__version__ = "0.1.0"

__all__ = [
    "Burst",
    "CraftParams",
    "FormatError",
    "Histogram",
    "Image",
    "Match",
    "NoiseModel",
    "OffsetGrid",
    "PairRecord",
    "Rng",
    "ThresholdResult",
    "bilinear_autocov",
    "build_histogram",
    "build_patchcraft",
    "correlate",
    "cov_syr",
    "filter_pairs",
    "find_smin",
    "flat_kernel",
    "load_image",
    "load_tensor",
    "mirror_pad",
    "nearest_neighbors",
    "offset_grids",
    "patch_distance",
    "psnr",
    "read_manifest",
    "residual",
    "sample_bilinear",
    "sample_iid",
    "sample_target",
    "save_image",
    "save_tensor",
    "synth_burst",
    "write_manifest",
]
