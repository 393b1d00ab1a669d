import numpy as np
import pytest

from helpers import integer_frame, static_noisy_burst
from patchcraft.craft import (
    CraftParams,
    OffsetGrid,
    build_patchcraft,
    default_patch_size,
    nearest_neighbors,
    offset_grids,
    patch_distance,
    sample_target,
)
from patchcraft.image import Burst, Image, mirror_pad_array, psnr
from patchcraft.noise import NoiseModel
from patchcraft.rng import Rng


# ---------------------------------------------------------------------------
# brute-force reference
# ---------------------------------------------------------------------------


def oracle_search(inp, refs, origin, n, box):
    """Quadruple-loop scan: frames, rows, cols, then pixel accumulation."""
    hp, wp = inp.shape[1:]
    half = box // 2
    pr, pc = origin
    best = None
    for f in range(refs.shape[0]):
        for r in range(max(pr - half, 0), min(pr + half, hp - n) + 1):
            for c in range(max(pc - half, 0), min(pc + half, wp - n) + 1):
                d = 0.0
                for ch in range(inp.shape[0]):
                    diff = inp[ch, pr : pr + n, pc : pc + n] - refs[f, ch, r : r + n, c : c + n]
                    d += float(np.dot(diff.ravel(), diff.ravel()))
                if best is None or d < best[0]:
                    best = (d, f, r, c)
    return best


def oracle_target(burst, grid, n, box):
    top, bottom, left, right = grid.pads
    inp = mirror_pad_array(burst.input_frame.data, top, bottom, left, right)
    ref_pairs = burst.reference_frames()
    refs = np.stack([mirror_pad_array(fr.data, top, bottom, left, right) for _, fr in ref_pairs])
    out = np.empty_like(inp)
    picks = []
    for pr, pc in grid.origins():
        d, f, r, c = oracle_search(inp, refs, (pr, pc), n, box)
        out[:, pr : pr + n, pc : pc + n] = refs[f, :, r : r + n, c : c + n]
        picks.append((ref_pairs[f][0], r, c, d))
    h, w = grid.height, grid.width
    return out[:, top : top + h, left : left + w], picks


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


def test_offset_grid_counts_and_padding():
    grids = offset_grids(4, 4, 2)
    assert len(grids) == 4
    assert len(grids[0].origins()) == 4  # offset (0,0)
    g11 = [g for g in grids if g.offset == (1, 1)][0]
    assert len(g11.origins()) == 9
    assert g11.pads == (1, 1, 1, 1)


def test_offset_grid_n1_trivial():
    grids = offset_grids(5, 7, 1)
    assert len(grids) == 1
    assert len(grids[0].origins()) == 35
    assert grids[0].pads == (0, 0, 0, 0)


def test_grids_cover_support_exactly_once():
    rng = Rng(21)
    for _ in range(10):
        h = int(rng.integers(3, 20))
        w = int(rng.integers(3, 20))
        n = int(rng.integers(1, 5))
        for grid in offset_grids(h, w, n):
            hp, wp = grid.padded_shape
            hits = np.zeros((hp, wp), dtype=int)
            for pr, pc in grid.origins():
                hits[pr : pr + n, pc : pc + n] += 1
            assert hits.min() == 1 and hits.max() == 1
            top, _, left, _ = grid.pads
            assert hp >= top + h and wp >= left + w


def test_patch_distance():
    rng = Rng(22)
    a = rng.uniform((3, 4, 4))
    assert patch_distance(a, a) == 0.0
    b = a + 2.0
    assert abs(patch_distance(a, b) - 4.0 * a.size) < 1e-12
    with pytest.raises(ValueError):
        patch_distance(a, a[:, :2])


def test_default_patch_size():
    assert default_patch_size(3, 10) == 37
    assert default_patch_size(2, 5) == 19
    assert default_patch_size(3, 11) == 37  # nearest sigma
    assert default_patch_size(5, 20) == 45  # nearest k


def test_params_validation():
    with pytest.raises(ValueError):
        CraftParams(n=0)
    with pytest.raises(ValueError):
        CraftParams(n=3, box=4)
    with pytest.raises(ValueError):
        CraftParams(n=3, knn=0)


# ---------------------------------------------------------------------------
# nearest neighbors
# ---------------------------------------------------------------------------


def _int_burst(rng, frames=3, channels=1, h=12, w=12, input_index=0):
    return Burst(tuple(integer_frame(rng.child(i), channels, h, w) for i in range(frames)), input_index)


def test_exact_copy_gives_zero_distance():
    rng = Rng(30)
    frame = integer_frame(rng, 1, 10, 10)
    burst = Burst((frame, frame), 0)
    grid = offset_grids(10, 10, 2)[0]
    matches = nearest_neighbors(burst, grid, (0, 0), CraftParams(n=2, box=5))
    assert matches[0].distance == 0.0
    assert matches[0].position == (0, 0)
    assert matches[0].frame_index == 1


def test_box_1_searches_colocated_only():
    rng = Rng(31)
    burst = _int_burst(rng, frames=4)
    grid = offset_grids(12, 12, 3)[0]
    matches = nearest_neighbors(burst, grid, (3, 6), CraftParams(n=3, box=1, knn=4))
    assert len(matches) == 3  # one candidate per reference frame
    assert all(m.position == (3, 6) for m in matches)
    assert matches[0].distance <= matches[1].distance <= matches[2].distance


def test_input_frame_excluded():
    rng = Rng(32)
    burst = _int_burst(rng, frames=3, input_index=1)
    grid = offset_grids(12, 12, 2)[0]
    for origin in [(0, 0), (4, 6), (10, 10)]:
        for m in nearest_neighbors(burst, grid, origin, CraftParams(n=2, box=7, knn=5)):
            assert m.frame_index != 1


def test_nearest_neighbors_matches_oracle():
    rng = Rng(33)
    for trial in range(20):
        r = rng.child(trial)
        h = int(r.integers(8, 17))
        w = int(r.integers(8, 17))
        n = int(r.integers(1, 4))
        box = int(r.integers(0, 4)) * 2 + 1
        burst = _int_burst(r.child("b"), frames=int(r.integers(2, 5)), h=h, w=w)
        grid = offset_grids(h, w, n)[int(r.uniform() * n * n)]
        origins = grid.origins()
        origin = tuple(origins[int(r.uniform() * len(origins))])
        top, bottom, left, right = grid.pads
        inp = mirror_pad_array(burst.input_frame.data, top, bottom, left, right)
        refs = np.stack([
            mirror_pad_array(f.data, top, bottom, left, right) for _, f in burst.reference_frames()
        ])
        d, f, rr, cc = oracle_search(inp, refs, origin, n, box)
        got = nearest_neighbors(burst, grid, origin, CraftParams(n=n, box=box))[0]
        ref_idx = [i for i, _ in burst.reference_frames()][f]
        assert (got.frame_index, got.position, got.distance) == (ref_idx, (rr, cc), d)


# ---------------------------------------------------------------------------
# stitching
# ---------------------------------------------------------------------------


def test_static_noiseless_burst_identity():
    rng = Rng(40)
    frame = integer_frame(rng, 1, 11, 13)
    burst = Burst((frame,) * 3, 0)
    for grid in offset_grids(11, 13, 3)[:4]:
        out = build_patchcraft(burst, grid, CraftParams(n=3, box=5), Rng(0))
        assert np.array_equal(out.data, frame.data)


def test_build_matches_oracle_pixel_exact():
    rng = Rng(41)
    for trial in range(15):
        r = rng.child(trial)
        h = int(r.integers(6, 15))
        w = int(r.integers(6, 15))
        n = int(r.integers(1, 4))
        box = int(r.integers(0, 4)) * 2 + 1
        burst = _int_burst(r.child("b"), frames=int(r.integers(2, 5)), h=h, w=w,
                           channels=[1, 3][int(r.integers(0, 2))])
        grid = offset_grids(h, w, n)[int(r.uniform() * n * n)]
        want, _ = oracle_target(burst, grid, n, box)
        got = build_patchcraft(burst, grid, CraftParams(n=n, box=box), Rng(0))
        assert np.array_equal(got.data, want)


def test_sample_target_deterministic_and_excludes_input():
    rng = Rng(42)
    model = NoiseModel(sigma=10.0, kind="flat", k=3)
    _, burst = static_noisy_burst(rng, model, frames=4, height=24, width=24)
    params = CraftParams(n=5, box=7)
    t1, m1 = sample_target(burst, params, Rng(9))
    t2, m2 = sample_target(burst, params, Rng(9))
    assert np.array_equal(t1.data, t2.data)
    assert m1["offset"] == m2["offset"]
    assert all(row[0] != burst.input_index for row in m1["match_summary"]["matches"])


def test_sample_target_offsets_uniform():
    rng = Rng(43)
    model = NoiseModel(sigma=10.0, kind="flat", k=2)
    _, burst = static_noisy_burst(rng, model, frames=2, height=9, width=9)
    params = CraftParams(n=3, box=1)
    counts = {}
    draws = 1800
    pick_rng = Rng(44)
    for _ in range(draws):
        _, meta = sample_target(burst, params, pick_rng)
        counts[tuple(meta["offset"])] = counts.get(tuple(meta["offset"]), 0) + 1
    p = 1.0 / 9.0
    se = (draws * p * (1 - p)) ** 0.5
    for offset in [(k, l) for k in range(3) for l in range(3)]:
        assert abs(counts.get(offset, 0) - draws * p) < 4 * se


def test_target_not_much_noisier_than_input():
    rng = Rng(45)
    model = NoiseModel(sigma=10.0, kind="flat", k=3)
    clean, burst = static_noisy_burst(rng, model, frames=4, height=96, width=96)
    params = CraftParams(n=19, box=21)
    target, _ = sample_target(burst, params, Rng(1))
    assert psnr(target, clean) >= psnr(burst.input_frame, clean) - 0.2


def test_workers_do_not_change_output():
    rng = Rng(46)
    model = NoiseModel(sigma=15.0, kind="flat", k=2)
    _, burst = static_noisy_burst(rng, model, frames=3, height=40, width=40)
    params = CraftParams(n=7, box=9, knn=2)
    outs = [build_patchcraft(burst, offset_grids(40, 40, 7)[3], params, Rng(2), workers=w)
            for w in (1, 2, 4)]
    assert all(np.array_equal(outs[0].data, o.data) for o in outs[1:])


def test_backends_agree():
    from patchcraft import kernels

    if kernels.BACKEND != "cython":
        pytest.skip("compiled backend unavailable")
    rng = Rng(47)
    burst = _int_burst(rng, frames=4, h=20, w=20)
    grid = offset_grids(20, 20, 3)[5]
    inp = mirror_pad_array(burst.input_frame.data, *grid.pads)
    refs = np.stack([mirror_pad_array(f.data, *grid.pads) for _, f in burst.reference_frames()])
    origins = grid.origins()
    got_c = kernels.knn_search(inp, refs, origins, 3, 7, 2)
    saved = kernels.BACKEND
    try:
        kernels.BACKEND = "numpy"
        got_n = kernels.knn_search(inp, refs, origins, 3, 7, 2)
    finally:
        kernels.BACKEND = saved
    for a, b in zip(got_c, got_n):
        assert np.array_equal(a, b)
