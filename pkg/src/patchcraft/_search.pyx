# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled exhaustive bounded nearest-neighbor patch search.

Semantics are shared with the NumPy fallback in `patchcraft.kernels`:
candidates are enumerated frame-ascending then row-major, distances are
accumulated sequentially in double precision, and on ties the earlier
candidate wins. Runs without the GIL so Python threads scale over patches.
"""

import numpy as np

cimport numpy as cnp


cdef inline double _patch_ssd(const double[:, :, ::1] inp,
                              const double[:, :, :, ::1] refs,
                              int f, int pr, int pc, int cr, int cc,
                              int n, int channels, double worst, bint prune) noexcept nogil:
    cdef double acc = 0.0
    cdef double diff
    cdef int ch, i, j
    for ch in range(channels):
        for i in range(n):
            for j in range(n):
                diff = inp[ch, pr + i, pc + j] - refs[f, ch, cr + i, cc + j]
                acc += diff * diff
            if prune and acc >= worst:
                return acc
    return acc


def search_block(const double[:, :, ::1] inp,
                 const double[:, :, :, ::1] refs,
                 const long long[:, ::1] origins,
                 int p_start, int p_stop, int n, int half, int knn,
                 double[:, ::1] dist_out, int[:, ::1] frame_out,
                 int[:, ::1] row_out, int[:, ::1] col_out, int[::1] count_out):
    """Fill the best-`knn` match tables for patches [p_start, p_stop)."""
    cdef int channels = inp.shape[0]
    cdef int hp = inp.shape[1]
    cdef int wp = inp.shape[2]
    cdef int n_frames = refs.shape[0]
    cdef int p, f, cr, cc, r0, r1, c0, c1, m, pos, q
    cdef long long pr, pc
    cdef double d, worst
    cdef bint full

    with nogil:
        for p in range(p_start, p_stop):
            pr = origins[p, 0]
            pc = origins[p, 1]
            r0 = <int>pr - half
            if r0 < 0:
                r0 = 0
            r1 = <int>pr + half
            if r1 > hp - n:
                r1 = hp - n
            c0 = <int>pc - half
            if c0 < 0:
                c0 = 0
            c1 = <int>pc + half
            if c1 > wp - n:
                c1 = wp - n
            m = 0
            worst = 0.0
            for f in range(n_frames):
                for cr in range(r0, r1 + 1):
                    for cc in range(c0, c1 + 1):
                        full = m == knn
                        d = _patch_ssd(inp, refs, f, <int>pr, <int>pc, cr, cc,
                                       n, channels, worst, full)
                        if full and d >= worst:
                            continue
                        # insert before the first strictly larger entry, after equals
                        pos = m if m < knn else knn - 1
                        while pos > 0 and dist_out[p, pos - 1] > d:
                            dist_out[p, pos] = dist_out[p, pos - 1]
                            frame_out[p, pos] = frame_out[p, pos - 1]
                            row_out[p, pos] = row_out[p, pos - 1]
                            col_out[p, pos] = col_out[p, pos - 1]
                            pos -= 1
                        dist_out[p, pos] = d
                        frame_out[p, pos] = f
                        row_out[p, pos] = cr
                        col_out[p, pos] = cc
                        if m < knn:
                            m += 1
                        if m == knn:
                            worst = dist_out[p, knn - 1]
            count_out[p] = m
