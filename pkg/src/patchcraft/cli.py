"""Command-line front end for the pipeline.

synth -> craft -> cov -> threshold -> filter -> train -> eval, plus lemma1
and the statistical verify suite. Every subcommand prints exactly one JSON
summary line on stdout and exits 0 on success, 1 on a failed invariant, 2 on
usage errors. Per-record seeds derive from (master seed, stage, index), so
any output can be regenerated in isolation. PCST_THREADS caps workers.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from patchcraft import craft as craftmod
from patchcraft import mini, verify
from patchcraft.depfilter import build_histogram, cov_syr, filter_pairs, find_smin, residual
from patchcraft.image import Burst, FormatError, Image, load_image, load_tensor, save_tensor
from patchcraft.kernels import worker_count
from patchcraft.manifest import PairRecord, read_manifest, write_manifest
from patchcraft.noise import NoiseModel, synth_burst
from patchcraft.rng import Rng

__all__ = ["main", "run"]


def _jsonable(value):
    """json.dump default hook for numpy scalars."""
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def _emit(payload: dict) -> None:
    print(json.dumps(payload, sort_keys=True, default=_jsonable))


def _load_frame(path: str) -> Image:
    if path.endswith(".pcrf"):
        arr = load_tensor(path)
        if arr.ndim == 2:
            arr = arr[None]
        return Image(np.asarray(arr, dtype=np.float64))
    return load_image(path)


def _save_frame(img: Image, path: str) -> None:
    save_tensor(img.data, path)


def _burst_frames(burst_dir: str):
    names = sorted(
        f for f in os.listdir(burst_dir)
        if f.startswith("frame") and f.endswith((".pcrf", ".pgm", ".ppm"))
    )
    if not names:
        raise FileNotFoundError(f"no frame files in {burst_dir}")
    return [(name, _load_frame(os.path.join(burst_dir, name))) for name in names]


def _cmd_synth(args) -> int:
    model = NoiseModel(sigma=args.sigma, kind=args.kind, k=args.kernel_size, theta=args.theta)
    stems = sorted(
        f for f in os.listdir(args.clean_dir) if f.endswith((".pcrf", ".pgm", ".ppm"))
    )
    if not stems:
        raise FileNotFoundError(f"no clean images in {args.clean_dir}")
    rng = Rng(args.seed)
    bursts = []
    for idx, name in enumerate(stems):
        clean = _load_frame(os.path.join(args.clean_dir, name))
        static = Burst((clean,) * args.frames, 0)
        burst = synth_burst(static, model, rng.child("synth", idx))
        stem = os.path.splitext(name)[0]
        bdir = os.path.join(args.out_dir, f"burst_{stem}")
        os.makedirs(bdir, exist_ok=True)
        _save_frame(clean, os.path.join(bdir, "clean.pcrf"))
        for f, frame in enumerate(burst.frames):
            _save_frame(frame, os.path.join(bdir, f"frame_{f:02d}.pcrf"))
        bursts.append(bdir)
    _emit({"command": "synth", "bursts": len(bursts), "frames": args.frames,
           "sigma": args.sigma, "kind": args.kind, "out_dir": args.out_dir})
    return 0


def _cmd_craft(args) -> int:
    frames = _burst_frames(args.burst_dir)
    burst = Burst(tuple(img for _, img in frames), args.input_index)
    params = craftmod.CraftParams(n=args.patch_size, box=args.search_box,
                                  knn=args.knn, seed=args.seed)
    rng = Rng(args.seed).child("craft")
    target, meta = craftmod.sample_target(burst, params, rng, workers=worker_count())
    _save_frame(target, args.out)
    meta_path = args.meta or args.out + ".json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")
    if args.manifest:
        record = PairRecord(
            input=os.path.join(args.burst_dir, frames[args.input_index][0]),
            targets=(args.out,),
            offset_used=tuple(meta["offset"]),
            seed_trail=(args.seed,),
        )
        existing = read_manifest(args.manifest) if os.path.exists(args.manifest) else []
        write_manifest(existing + [record], args.manifest)
    summary = {k: v for k, v in meta.items() if k != "match_summary"}
    summary.update({"command": "craft", "out": args.out,
                    "distance_mean": meta["match_summary"]["distance_mean"]})
    _emit(summary)
    return 0


def _cmd_cov(args) -> int:
    records = read_manifest(args.manifest)
    updated = []
    for rec in records:
        noisy = _load_frame(rec.input)
        target = _load_frame(rec.targets[0])
        updated.append(rec.with_s_yr(cov_syr(noisy, residual(target, noisy))))
    write_manifest(updated, args.out or args.manifest)
    values = [r.s_yr for r in updated]
    _emit({"command": "cov", "pairs": len(updated),
           "s_yr_mean": sum(values) / len(values),
           "s_yr_min": min(values), "s_yr_max": max(values)})
    return 0


def _cmd_threshold(args) -> int:
    records = read_manifest(args.manifest)
    samples = [r.s_yr for r in records]
    if any(s is None for s in samples):
        raise ValueError("manifest has records without s_yr; run cov first")
    result = find_smin(samples)
    if args.hist_csv:
        hist = build_histogram(samples)
        with open(args.hist_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["bin_center", "count"])
            centers = 0.5 * (hist.bin_edges[:-1] + hist.bin_edges[1:])
            for center, count in zip(centers, hist.counts):
                writer.writerow([f"{center:.10g}", int(count)])
    _emit({"command": "threshold", "s_min": result.s_min,
           "retained_fraction": result.retained_fraction,
           "peak_location": result.peak_location,
           "retained_mean": result.retained_mean})
    return 0


def _cmd_filter(args) -> int:
    records = read_manifest(args.manifest)
    s_min = args.s_min
    if s_min is None:
        s_min = find_smin([r.s_yr for r in records]).s_min
    updated = filter_pairs(records, s_min)
    write_manifest(updated, args.out or args.manifest)
    kept = sum(1 for r in updated if r.retained)
    _emit({"command": "filter", "s_min": s_min, "retained": kept,
           "dropped": len(updated) - kept})
    return 0


def _save_model(model: mini.MiniDenoiser, out_dir: str) -> None:
    os.makedirs(out_dir, exist_ok=True)
    save_tensor(model.w1, os.path.join(out_dir, "w1.pcrf"))
    save_tensor(model.w2, os.path.join(out_dir, "w2.pcrf"))
    header = {"channels": model.channels, "filters": model.filters,
              "w1": "w1.pcrf", "w2": "w2.pcrf"}
    with open(os.path.join(out_dir, "model.json"), "w", encoding="utf-8") as fh:
        json.dump(header, fh, sort_keys=True)
        fh.write("\n")


def _load_model(model_dir: str) -> mini.MiniDenoiser:
    with open(os.path.join(model_dir, "model.json"), "r", encoding="utf-8") as fh:
        header = json.load(fh)
    w1 = load_tensor(os.path.join(model_dir, header["w1"]))
    w2 = load_tensor(os.path.join(model_dir, header["w2"]))
    return mini.MiniDenoiser(w1, w2)


def _cmd_train(args) -> int:
    records = read_manifest(args.manifest)
    kept = [r for r in records if r.retained is not False]
    pairs = []
    for rec in kept:
        noisy = _load_frame(rec.input)
        for tpath in rec.targets:
            pairs.append((noisy.data, _load_frame(tpath).data))
    config = mini.TrainConfig(epochs=args.epochs, lr=args.lr, batch=args.batch,
                              crop=args.crop, seed=args.seed, filters=args.filters,
                              halve_every=args.halve_every)
    model, losses = mini.sgd_train(pairs, config)
    _save_model(model, args.out)
    _emit({"command": "train", "pairs": len(pairs), "epochs": args.epochs,
           "first_epoch_loss": losses[0], "final_epoch_loss": losses[-1],
           "out": args.out})
    return 0


def _cmd_eval(args) -> int:
    model = _load_model(args.model)
    names = sorted(f for f in os.listdir(args.pairs_dir) if ".noisy." in f)
    if not names:
        raise FileNotFoundError(f"no '*.noisy.*' files in {args.pairs_dir}")
    pairs = []
    stems = []
    for name in names:
        clean_name = name.replace(".noisy.", ".clean.")
        pairs.append((
            _load_frame(os.path.join(args.pairs_dir, name)),
            _load_frame(os.path.join(args.pairs_dir, clean_name)),
        ))
        stems.append(name.split(".noisy.")[0])
    report = mini.evaluate(model, pairs)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["name", "before_db", "after_db"])
            for stem, row in zip(stems, report["rows"]):
                writer.writerow([stem, f"{row['before_db']:.6f}", f"{row['after_db']:.6f}"])
    _emit({"command": "eval", "pairs": len(pairs),
           "mean_before_db": report["mean_before_db"],
           "mean_after_db": report["mean_after_db"],
           "gain_db": report["gain_db"]})
    return 0


def _cmd_lemma1(args) -> int:
    rng = Rng(args.seed)
    model = mini.MiniDenoiser.random(args.channels, args.filters, rng.child("model"))
    x = Image(rng.child("x").uniform((args.channels, args.size, args.size)) * 255.0)
    z = rng.child("z").normal(x.data.shape, sigma=args.sigma)
    report = mini.lemma1_check(model, x, z, args.draws, args.w_sigma,
                               rng.child("w"), w_mean=args.w_mean)
    unbiased_expected = args.w_mean == 0.0
    passed = (report["max_standardized_deviation"] < 4.0) == unbiased_expected
    report.update({"command": "lemma1", "passed": passed})
    _emit(report)
    return 0 if passed else 1


def _cmd_verify(args) -> int:
    runners = {
        "rho": lambda: verify.check_rho_equalities(),
        "bound": lambda: verify.check_rho_bound(),
        "lemma11": lambda: verify.check_lemma11(seed=args.seed),
        "delta": lambda: verify.check_delta(seed=args.seed),
        "syr": lambda: verify.check_syr(seed=args.seed),
    }
    names = list(runners) if args.check == "all" else [args.check]
    reports = [runners[name]() for name in names]
    all_passed = all(r["passed"] for r in reports)
    payload = {"command": "verify", "checks": names, "passed": all_passed,
               "reports": reports}
    if args.json_out:
        with open(args.json_out, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, sort_keys=True, indent=1, default=_jsonable)
            fh.write("\n")
    if args.csv_out:
        id_keys = ("n", "theta", "scenario", "side", "pairs", "trials", "n_max", "delta_x")
        with open(args.csv_out, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["check", "configuration", "passed", "detail"])
            for rep in reports:
                for row in rep["rows"]:
                    config = ",".join(f"{k}={row[k]}" for k in id_keys if k in row)
                    oks = [v for k, v in row.items() if k == "passed" or k.endswith("_ok")]
                    row_passed = all(oks) if oks else rep["passed"]
                    writer.writerow([rep["name"], config, bool(row_passed),
                                     json.dumps(row, sort_keys=True, default=_jsonable)])
    _emit({"command": "verify", "checks": names, "passed": all_passed})
    return 0 if all_passed else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="patchcraft")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="add correlated noise to clean images, building bursts")
    p.add_argument("--clean-dir", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--frames", type=int, default=4)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--kind", choices=["iid", "flat", "bilinear"], default="flat")
    p.add_argument("--kernel-size", type=int, default=3)
    p.add_argument("--theta", type=float, default=2.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("craft", help="build one patch-composited target from a burst")
    p.add_argument("--burst-dir", required=True)
    p.add_argument("--input-index", type=int, default=0)
    p.add_argument("--patch-size", type=int, required=True)
    p.add_argument("--search-box", type=int, default=65)
    p.add_argument("--knn", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--meta", default=None)
    p.add_argument("--manifest", default=None)
    p.set_defaults(func=_cmd_craft)

    p = sub.add_parser("cov", help="append the input/residual covariance to each record")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_cov)

    p = sub.add_parser("threshold", help="pick the left-tail covariance cutoff")
    p.add_argument("--manifest", required=True)
    p.add_argument("--hist-csv", default=None)
    p.set_defaults(func=_cmd_threshold)

    p = sub.add_parser("filter", help="flag records below the covariance cutoff")
    p.add_argument("--manifest", required=True)
    p.add_argument("--s-min", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("train", help="fit the small residual denoiser on manifest pairs")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--epochs", type=int, default=10)
    p.add_argument("--lr", type=float, default=0.5)
    p.add_argument("--halve-every", type=int, default=5)
    p.add_argument("--batch", type=int, default=16)
    p.add_argument("--crop", type=int, default=50)
    p.add_argument("--filters", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_train)

    p = sub.add_parser("eval", help="PSNR before/after on (noisy, clean) pairs")
    p.add_argument("--model", required=True)
    p.add_argument("--pairs-dir", required=True)
    p.add_argument("--csv", default=None)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("lemma1", help="unbiased-gradient Monte Carlo report")
    p.add_argument("--draws", type=int, default=10000)
    p.add_argument("--w-sigma", type=float, default=25.0)
    p.add_argument("--w-mean", type=float, default=0.0)
    p.add_argument("--sigma", type=float, default=10.0)
    p.add_argument("--size", type=int, default=12)
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--filters", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_lemma1)

    p = sub.add_parser("verify", help="statistical verification suite")
    p.add_argument("--check", choices=["rho", "bound", "lemma11", "delta", "syr", "all"],
                   default="all")
    p.add_argument("--json-out", default=None)
    p.add_argument("--csv-out", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)
    return parser


def run(argv) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (FormatError, FileNotFoundError, NotADirectoryError, ValueError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
