"""Patch-craft target construction from bursts.

The input shot is split into one of n^2 offset tilings of non-overlapping
n x n patches (mirror-padded at the borders). Every patch is replaced by a
nearest neighbor found by exhaustive L2 search inside a box-bounded window of
the remaining burst frames; the input shot itself is strictly excluded from
the search. Stitching the replacements and cropping the padding yields the
target image.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from patchcraft.image import Burst, Image, mirror_pad_array
from patchcraft.kernels import knn_search
from patchcraft.rng import Rng

__all__ = [
    "CraftParams",
    "Match",
    "OffsetGrid",
    "PATCH_SIZE_BY_NOISE",
    "build_patchcraft",
    "default_patch_size",
    "nearest_neighbors",
    "offset_grids",
    "patch_distance",
    "sample_target",
]

# Default patch side per (kernel size, sigma) for flat-kernel correlated noise.
PATCH_SIZE_BY_NOISE = {
    (2, 5): 19, (2, 10): 27, (2, 15): 31, (2, 20): 33,
    (3, 5): 19, (3, 10): 37, (3, 15): 41, (3, 20): 43,
    (4, 5): 25, (4, 10): 43, (4, 15): 43, (4, 20): 45,
}


def default_patch_size(k: int, sigma: float) -> int:
    """Default patch side for flat-kernel noise; nearest configured entry."""
    sigmas = sorted({s for _, s in PATCH_SIZE_BY_NOISE})
    ks = sorted({kk for kk, _ in PATCH_SIZE_BY_NOISE})
    k_near = min(ks, key=lambda v: abs(v - k))
    s_near = min(sigmas, key=lambda v: abs(v - sigma))
    return PATCH_SIZE_BY_NOISE[(k_near, s_near)]


@dataclass(frozen=True)
class CraftParams:
    """Patch side n, odd search-box side, neighbors kept per patch, seed."""

    n: int
    box: int = 65
    knn: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("patch side must be >= 1")
        if self.box < 1 or self.box % 2 == 0:
            raise ValueError("search box side must be odd and >= 1")
        if self.knn < 1:
            raise ValueError("neighbor count must be >= 1")


@dataclass(frozen=True)
class OffsetGrid:
    """One of the n^2 non-overlapping patch tilings of the padded image.

    The (ko, lo) tiling starts at (-ko, -lo) relative to the image origin with
    stride n; mirror padding extends the plane to whole patches.
    """

    offset: tuple
    height: int
    width: int
    n: int

    @property
    def pads(self) -> tuple:
        """(top, bottom, left, right) mirror-pad amounts."""
        ko, lo = self.offset
        bottom = (self.n - (self.height + ko) % self.n) % self.n
        right = (self.n - (self.width + lo) % self.n) % self.n
        return (ko, bottom, lo, right)

    @property
    def padded_shape(self) -> tuple:
        top, bottom, left, right = self.pads
        return (self.height + top + bottom, self.width + left + right)

    def origins(self) -> np.ndarray:
        """(P, 2) top-left patch coordinates in padded space, row-major."""
        hp, wp = self.padded_shape
        rows = np.arange(0, hp, self.n)
        cols = np.arange(0, wp, self.n)
        grid = np.stack(np.meshgrid(rows, cols, indexing="ij"), axis=-1)
        return grid.reshape(-1, 2).astype(np.int64)


def offset_grids(height: int, width: int, n: int) -> list:
    """All n^2 offset tilings covering the (height, width) support."""
    if n < 1:
        raise ValueError("patch side must be >= 1")
    return [OffsetGrid((ko, lo), height, width, n) for ko in range(n) for lo in range(n)]


@dataclass(frozen=True)
class Match:
    """One neighbor: burst frame index, padded-space position, squared L2."""

    frame_index: int
    position: tuple
    distance: float


def patch_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Unnormalized squared L2 distance over all channels and pixels."""
    if a.shape != b.shape:
        raise ValueError(f"patch shape mismatch: {a.shape} vs {b.shape}")
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sum(diff * diff))


def _padded_search_inputs(burst: Burst, grid: OffsetGrid):
    top, bottom, left, right = grid.pads
    inp = mirror_pad_array(burst.input_frame.data, top, bottom, left, right)
    ref_pairs = burst.reference_frames()
    refs = np.stack([mirror_pad_array(f.data, top, bottom, left, right) for _, f in ref_pairs])
    frame_map = np.array([i for i, _ in ref_pairs], dtype=np.int32)
    return inp, refs, frame_map


def nearest_neighbors(burst: Burst, grid: OffsetGrid, origin, params: CraftParams) -> list:
    """Matches for one patch, ascending by distance.

    Ties broken by lower frame index, then row-major position. Returns
    min(knn, candidate count) matches; the input shot is never searched.
    """
    inp, refs, frame_map = _padded_search_inputs(burst, grid)
    origins = np.asarray([origin], dtype=np.int64)
    dists, frames, rows, cols, counts = knn_search(inp, refs, origins, params.n, params.box, params.knn)
    return [
        Match(int(frame_map[frames[0, s]]), (int(rows[0, s]), int(cols[0, s])), float(dists[0, s]))
        for s in range(int(counts[0]))
    ]


def _craft(burst: Burst, grid: OffsetGrid, params: CraftParams, rng: Rng, workers=None):
    """Stitch a patch-craft image; also returns the chosen match per patch."""
    inp, refs, frame_map = _padded_search_inputs(burst, grid)
    origins = grid.origins()
    # neighbor picks drawn before the (threaded) search so scheduling cannot
    # perturb the output
    picks_u = rng.uniform(len(origins)) if params.knn > 1 else None
    dists, frames, rows, cols, counts = knn_search(
        inp, refs, origins, params.n, params.box, params.knn, workers=workers
    )
    if picks_u is None:
        picks = np.zeros(len(origins), dtype=np.int64)
    else:
        picks = np.minimum((picks_u * counts).astype(np.int64), counts - 1)

    n = params.n
    out = np.empty_like(inp)
    chosen = []
    for p, (pr, pc) in enumerate(origins):
        s = int(picks[p])
        f, r, c = int(frames[p, s]), int(rows[p, s]), int(cols[p, s])
        out[:, pr : pr + n, pc : pc + n] = refs[f, :, r : r + n, c : c + n]
        chosen.append(Match(int(frame_map[f]), (r, c), float(dists[p, s])))
    top, _, left, _ = grid.pads
    h, w = grid.height, grid.width
    target = Image(out[:, top : top + h, left : left + w])
    return target, chosen


def build_patchcraft(burst: Burst, grid: OffsetGrid, params: CraftParams, rng: Rng, workers=None) -> Image:
    """Patch-craft image for one offset grid (uniform pick among knn matches)."""
    target, _ = _craft(burst, grid, params, rng, workers=workers)
    return target


def _match_summary(chosen) -> dict:
    dists = [m.distance for m in chosen]
    frames = {}
    for m in chosen:
        frames[m.frame_index] = frames.get(m.frame_index, 0) + 1
    return {
        "patches": len(chosen),
        "frame_counts": {str(k): v for k, v in sorted(frames.items())},
        "distance_min": min(dists),
        "distance_mean": sum(dists) / len(dists),
        "distance_max": max(dists),
        "matches": [[m.frame_index, m.position[0], m.position[1], m.distance] for m in chosen],
    }


def sample_target(burst: Burst, params: CraftParams, rng: Rng, workers=None):
    """Uniformly pick one of the n^2 offset grids and build its target.

    Returns (target, metadata); metadata records the chosen offset and a
    per-patch match summary so the draw is reproducible and auditable.
    """
    grids = offset_grids(burst.input_frame.height, burst.input_frame.width, params.n)
    idx = int(rng.uniform() * len(grids)) if len(grids) > 1 else 0
    idx = min(idx, len(grids) - 1)
    grid = grids[idx]
    target, chosen = _craft(burst, grid, params, rng, workers=workers)
    meta = {
        "offset": list(grid.offset),
        "patch_size": params.n,
        "search_box": params.box,
        "knn": params.knn,
        "input_index": burst.input_index,
        "match_summary": _match_summary(chosen),
    }
    return target, meta
