"""Backend selection for the patch-search hot loop.

The compiled Cython kernel is used when the extension built; otherwise a
vectorized NumPy implementation with identical semantics takes over. Set
PCST_BACKEND=numpy (or cython) to force a backend, and PCST_THREADS to cap
the worker count. Results are independent of backend and thread count up to
floating-point summation order, and positions are identical except on exact
distance ties, which both backends break the same way (earlier candidate in
frame-ascending, row-major enumeration order wins).
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

try:
    from patchcraft import _search as _compiled
except ImportError:  # extension not built
    _compiled = None

_forced = os.environ.get("PCST_BACKEND", "").strip().lower()
if _forced == "numpy":
    BACKEND = "numpy"
elif _forced == "cython":
    if _compiled is None:
        raise ImportError("PCST_BACKEND=cython but the compiled extension is unavailable")
    BACKEND = "cython"
else:
    BACKEND = "cython" if _compiled is not None else "numpy"

__all__ = ["BACKEND", "knn_search", "worker_count"]


def worker_count(requested: int | None = None) -> int:
    """Effective worker count: requested, capped by PCST_THREADS, default 1."""
    cap = os.environ.get("PCST_THREADS")
    workers = requested if requested is not None else (int(cap) if cap else 1)
    if cap:
        workers = min(workers, int(cap))
    return max(1, workers)


def _search_block_numpy(inp, refs, origins, p_start, p_stop, n, half, knn,
                        dist_out, frame_out, row_out, col_out, count_out):
    hp, wp = inp.shape[1:]
    # (F, C, Hp-n+1, Wp-n+1, n, n) candidate patch views, no copy
    windows = sliding_window_view(refs, (n, n), axis=(2, 3))
    for p in range(p_start, p_stop):
        pr, pc = int(origins[p, 0]), int(origins[p, 1])
        r0, r1 = max(pr - half, 0), min(pr + half, hp - n)
        c0, c1 = max(pc - half, 0), min(pc + half, wp - n)
        patch = inp[:, pr : pr + n, pc : pc + n]
        per_frame = []
        for f in range(refs.shape[0]):
            cand = windows[f, :, r0 : r1 + 1, c0 : c1 + 1]
            diff = cand - patch[:, None, None]
            per_frame.append(np.einsum("crsij,crsij->rs", diff, diff).ravel())
        dists = np.concatenate(per_frame)
        order = np.argsort(dists, kind="stable")[:knn]
        rows = r1 - r0 + 1
        cols = c1 - c0 + 1
        m = len(order)
        count_out[p] = m
        for slot, idx in enumerate(order):
            f, rem = divmod(int(idx), rows * cols)
            rr, cc = divmod(rem, cols)
            dist_out[p, slot] = dists[idx]
            frame_out[p, slot] = f
            row_out[p, slot] = r0 + rr
            col_out[p, slot] = c0 + cc


def knn_search(inp: np.ndarray, refs: np.ndarray, origins: np.ndarray,
               n: int, box: int, knn: int, workers: int | None = None):
    """Best-`knn` matches for every patch origin.

    Args:
        inp: padded input frame, (C, Hp, Wp) float64.
        refs: padded reference frames, (F, C, Hp, Wp) float64, input excluded.
        origins: (P, 2) top-left patch coordinates in padded space.
        n: patch side; box: odd search-box side; knn: matches kept per patch.

    Returns:
        (dists, frames, rows, cols, counts); `frames` indexes into `refs`.
        Slots past counts[p] are unused (fewer candidates than knn).
    """
    if box < 1 or box % 2 == 0:
        raise ValueError("search box side must be odd and >= 1")
    inp = np.ascontiguousarray(inp, dtype=np.float64)
    refs = np.ascontiguousarray(refs, dtype=np.float64)
    origins = np.ascontiguousarray(origins, dtype=np.int64)
    n_patches = origins.shape[0]
    dist_out = np.empty((n_patches, knn), dtype=np.float64)
    frame_out = np.empty((n_patches, knn), dtype=np.int32)
    row_out = np.empty((n_patches, knn), dtype=np.int32)
    col_out = np.empty((n_patches, knn), dtype=np.int32)
    count_out = np.zeros(n_patches, dtype=np.int32)
    half = box // 2
    block = _compiled.search_block if BACKEND == "cython" else _search_block_numpy

    workers = worker_count(workers)
    if workers == 1 or n_patches < 2 * workers:
        block(inp, refs, origins, 0, n_patches, n, half, knn,
              dist_out, frame_out, row_out, col_out, count_out)
    else:
        bounds = np.linspace(0, n_patches, workers + 1, dtype=int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(block, inp, refs, origins, int(a), int(b), n, half, knn,
                            dist_out, frame_out, row_out, col_out, count_out)
                for a, b in zip(bounds[:-1], bounds[1:])
                if b > a
            ]
            for fut in futures:
                fut.result()
    return dist_out, frame_out, row_out, col_out, count_out
