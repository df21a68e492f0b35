#!/usr/bin/env python3
"""Benchmark the compiled kernels against the numpy fallback.

Usage: python benchmarks/bench_kernels.py [--n 100] [--repeats 50]

Times each kernel on a snapshot-sized workload (node positions and the two
graphs of a typical dense snapshot) and prints the per-call times plus the
speedup. Also times one full simulation run with each implementation by
toggling FANETKEYS_PURE in subprocesses.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def make_workload(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    pos = np.ascontiguousarray(rng.uniform(0, 700, size=(n, 3)))
    pos[:, 2] *= 100.0 / 700.0
    r = 100.0
    d = pos[:, None, :] - pos[None, :, :]
    adj = (d**2).sum(axis=2) <= r * r
    np.fill_diagonal(adj, False)
    phys = adj.copy()
    drop = rng.random(adj.shape) < 0.3
    key = adj & ~(drop | drop.T)
    return pos, r, key, phys


def bench(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def run_kernel_bench(n: int, repeats: int):
    from fanetkeys._kernels import graph_csr, pure, using_compiled

    try:
        from fanetkeys._kernels import _fast as fast
    except ImportError:
        print("compiled kernels not built; run `python setup.py build_ext --inplace`")
        return

    pos, r, key, phys = make_workload(n)
    ki, kx = graph_csr(key)
    pi, px = graph_csr(phys)
    key_dist, key_parent = fast.bfs_tree(ki, kx, n)
    phys_dist = fast.all_pairs_hops(pi, px, n)

    cases = [
        ("contact_pairs_idx", lambda impl: impl.contact_pairs_idx(pos, r)),
        ("component_labels", lambda impl: impl.component_labels(ki, kx, n)),
        ("all_pairs_hops", lambda impl: impl.all_pairs_hops(pi, px, n)),
        ("bfs_tree", lambda impl: impl.bfs_tree(ki, kx, n)),
        (
            "path_expand_sums",
            lambda impl: impl.path_expand_sums(key_dist, key_parent, phys_dist),
        ),
    ]
    print(
        f"kernel benchmark, n={n} nodes (best of {repeats}; default impl: "
        f"{'compiled' if using_compiled else 'pure'})",
        flush=True,
    )
    print(f"{'kernel':20s} {'pure':>12s} {'compiled':>12s} {'speedup':>9s}")
    for name, call in cases:
        tp = bench(lambda: call(pure), repeats)
        tf = bench(lambda: call(fast), repeats)
        print(
            f"{name:20s} {tp * 1e6:10.1f}us {tf * 1e6:10.1f}us {tp / tf:8.1f}x",
            flush=True,
        )


def run_sim_bench():
    code = (
        "import time; from fanetkeys.engine import fanet_defaults, run; "
        "from fanetkeys.mobility import BoundingBox; "
        "from fanetkeys._kernels import using_compiled; "
        "cfg = fanet_defaults(box=BoundingBox(700.0, 700.0, 100.0), "
        "duration=300.0, metrics_stride=10); "
        "t0 = time.perf_counter(); run(cfg, seed=1); "
        "print(('compiled' if using_compiled else 'pure    ') + "
        "f' full run (n=100, 300 snapshots): {time.perf_counter() - t0:.2f}s')"
    )
    for pure_flag in ("0", "1"):
        env = dict(os.environ, FANETKEYS_PURE=pure_flag)
        subprocess.run([sys.executable, "-c", code], env=env, check=True)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--repeats", type=int, default=50)
    ap.add_argument("--skip-sim", action="store_true")
    args = ap.parse_args()
    run_kernel_bench(args.n, args.repeats)
    if not args.skip_sim:
        run_sim_bench()


if __name__ == "__main__":
    main()
