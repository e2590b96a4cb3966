"""Compiled vs numpy kernels on inputs shaped like real pipeline calls.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--json out.json]
"""

import argparse
import json
import timeit

import numpy as np

from provgraph import _pykernels
from provgraph.core import ImageRecord
from provgraph.descriptor import extract_local
from provgraph.imaging import jpeg_roundtrip, luminance
from provgraph.synth import procedural_seed

try:
    from provgraph import _ckernels
except ImportError:
    _ckernels = None


def cases(rng):
    a = extract_local(ImageRecord(0, jpeg_roundtrip(procedural_seed(1), 85)))
    b = extract_local(ImageRecord(1, jpeg_roundtrip(procedural_seed(1), 70)))
    n = 300
    src = rng.uniform(0, 1, (n, 2))
    dst = src * 0.9 + 0.03 + rng.normal(0, 0.003, (n, 2))
    samples = rng.integers(0, n, (200, 2))
    plane = luminance(jpeg_roundtrip(procedural_seed(2), 75))
    coefs = np.round(rng.normal(0, 25, (576, 64)) / 6) * 6
    return {
        "ratio_match": ("ratio_match", (a.descriptors, b.descriptors, 0.8)),
        "ransac_similarity": ("ransac_similarity", (src, dst, samples, 0.01, 0.25, 4.0)),
        "deblock_median": ("deblock_median", (plane,)),
        "quant_steps": ("quant_steps", (coefs, 60, 0.9, 8)),
    }


def bench(fn, args, repeat):
    number = 1
    while timeit.timeit(lambda: fn(*args), number=number) < 0.05:
        number *= 2
    return min(timeit.repeat(lambda: fn(*args), number=number, repeat=repeat)) / number


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", default=None, help="also write results here")
    args = ap.parse_args(argv)

    rng = np.random.default_rng(0)
    rows = []
    print(f"{'kernel':<20}{'python ms':>12}{'cython ms':>12}{'speedup':>10}")
    for label, (name, fargs) in cases(rng).items():
        py = bench(getattr(_pykernels, name), fargs, args.repeat)
        cy = bench(getattr(_ckernels, name), fargs, args.repeat) if _ckernels else float("nan")
        rows.append({"kernel": label, "python_s": py, "cython_s": cy, "speedup": py / cy})
        print(f"{label:<20}{py * 1e3:>12.3f}{cy * 1e3:>12.3f}{py / cy:>9.1f}x")
    if _ckernels is None:
        print("compiled extension not built; only the numpy column is meaningful")
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(rows, fh, indent=2)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
