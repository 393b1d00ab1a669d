"""Benchmark the compiled patch-search kernel against the NumPy fallback.

Usage: python benchmarks/bench_search.py [--side 240] [--frames 4] [--n 19]
"""

import argparse
import time

import numpy as np

from patchcraft import kernels
from patchcraft.craft import CraftParams, offset_grids
from patchcraft.image import Burst, Image, mirror_pad_array
from patchcraft.noise import NoiseModel, synth_burst
from patchcraft.rng import Rng


def make_inputs(side, frames, n, seed):
    rng = Rng(seed)
    clean = Image(rng.uniform((1, side, side)) * 255)
    burst = synth_burst(Burst((clean,) * frames, 0), NoiseModel(10.0, "flat", k=3), rng.child("n"))
    grid = offset_grids(side, side, n)[0]
    inp = mirror_pad_array(burst.input_frame.data, *grid.pads)
    refs = np.stack([mirror_pad_array(f.data, *grid.pads) for _, f in burst.reference_frames()])
    return inp, refs, grid.origins()


def run_backend(backend, inp, refs, origins, n, box, knn, repeats):
    saved = kernels.BACKEND
    kernels.BACKEND = backend
    try:
        best = float("inf")
        result = None
        for _ in range(repeats):
            t0 = time.perf_counter()
            result = kernels.knn_search(inp, refs, origins, n, box, knn)
            best = min(best, time.perf_counter() - t0)
        return best, result
    finally:
        kernels.BACKEND = saved


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--side", type=int, default=240)
    parser.add_argument("--frames", type=int, default=4)
    parser.add_argument("--n", type=int, default=19)
    parser.add_argument("--box", type=int, default=33)
    parser.add_argument("--knn", type=int, default=1)
    parser.add_argument("--repeats", type=int, default=3)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    inp, refs, origins = make_inputs(args.side, args.frames, args.n, args.seed)
    print(f"{len(origins)} patches of {args.n}x{args.n}, box {args.box}, "
          f"{args.frames - 1} reference frames, {args.side}x{args.side} px")

    t_np, r_np = run_backend("numpy", inp, refs, origins, args.n, args.box, args.knn, args.repeats)
    print(f"numpy : {t_np * 1e3:9.1f} ms")
    if kernels._compiled is None:
        print("cython: extension not built")
        return
    t_cy, r_cy = run_backend("cython", inp, refs, origins, args.n, args.box, args.knn, args.repeats)
    # positions must agree exactly; distances only up to summation order
    agree = all(np.array_equal(a, b) for a, b in zip(r_np[1:], r_cy[1:]))
    agree = agree and np.allclose(r_np[0], r_cy[0], rtol=1e-9, atol=1e-9)
    print(f"cython: {t_cy * 1e3:9.1f} ms   ({t_np / t_cy:.1f}x faster, matches agree: {agree})")


if __name__ == "__main__":
    main()
