"""Compare the compiled kernels with the numpy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Each kernel is timed on both backends and the outputs are checked for bitwise equality.
"""
import argparse
import itertools
import time

import numpy as np

from leafpressure import CAT_MAP, make_splitting, make_toral_system
from leafpressure.kernels import backends
from leafpressure.oracle import grid_context


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def cases():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(2_000_000)
    yield "pairwise_sum 2e6", lambda m: m.pairwise_sum(x)

    cat = make_toral_system(CAT_MAP)
    ctx = grid_context(cat, 200, 6)
    orbits = np.ascontiguousarray(ctx.orbits)
    eps = 0.05
    cells = int(1 / eps)
    keys = np.concatenate([np.floor(orbits[:, 0] * cells), np.floor(orbits[:, -1] * cells)],
                          axis=1).astype(np.int64)
    offs = np.array(list(itertools.product((-1, 0, 1), repeat=4)), dtype=np.int64)
    yield "greedy_separated 200^2 n=6", lambda m: m.greedy_separated(orbits, keys, offs, cells, eps)

    pert = make_toral_system(CAT_MAP, eps_p=0.05)
    init = np.ascontiguousarray(make_splitting(pert).leaf_basis[:, 0])
    pts = rng.random((20_000, 2))
    yield "perturbed_frames_1d 2e4", lambda m: m.perturbed_frames_1d(
        pts, pert._fmat, pert._bmat, pert.eps_p, init, 40)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    mods = backends()
    print(f"{'kernel':32s}" + "".join(f"{k:>12s}" for k in mods) + "   speedup  identical")
    for name, fn in cases():
        res = {k: best_of(lambda: fn(m), args.repeat) for k, m in mods.items()}
        row = f"{name:32s}" + "".join(f"{t:11.4f}s" for t, _ in res.values())
        if "cython" in res:
            sp = res["python"][0] / res["cython"][0]
            row += f"   {sp:7.1f}x  {same(res['python'][1], res['cython'][1])}"
        print(row)


if __name__ == "__main__":
    main()
