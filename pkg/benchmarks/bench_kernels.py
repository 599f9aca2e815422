"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import sys
import timeit

import numpy as np

from latentdp import kernels


def workloads(rng):
    z = rng.normal(scale=0.2, size=(512, 640))
    u = rng.random(512 * 640)
    lengths = rng.integers(5, 20, size=2000)
    hyp = [rng.integers(0, 400, size=n) for n in lengths]
    ref = [np.where(rng.random(n) < 0.8, h, rng.integers(0, 400, size=n)) for n, h in zip(lengths, hyp)]
    flat_h, flat_r = np.concatenate(hyp).astype(np.int64), np.concatenate(ref).astype(np.int64)
    offs = np.concatenate([[0], np.cumsum(lengths)]).astype(np.int64)
    return {
        "clip_values 512x640": lambda k: k.clip_values(z, -0.1, 0.1),
        "clip_norm_rows 512x640": lambda k: k.clip_norm_rows(z, 1.0),
        "laplace_from_uniform 327680": lambda k: k.laplace_from_uniform(u, 0.5),
        "corpus_ngram_stats 2000 pairs": lambda k: k.corpus_ngram_stats(flat_h, offs, flat_r, offs, 4),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write results to this file")
    args = ap.parse_args(argv)
    if kernels.compiled is None:
        print("compiled extension not available; build with `pip install -e .`", file=sys.stderr)
        return 1
    rows = []
    print(f"{'kernel':32s} {'python ms':>10s} {'cython ms':>10s} {'speedup':>8s}")
    for name, fn in workloads(np.random.default_rng(0)).items():
        times = {}
        for label, mod in (("python", kernels.python), ("cython", kernels.compiled)):
            times[label] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat)) * 1e3
        rows.append({"kernel": name, **times, "speedup": times["python"] / times["cython"]})
        print(f"{name:32s} {times['python']:10.2f} {times['cython']:10.2f} {rows[-1]['speedup']:7.1f}x")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
